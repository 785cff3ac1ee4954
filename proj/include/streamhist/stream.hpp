#pragma once

#include "streamhist/core_types.hpp"
#include "streamhist/datagen.hpp"
#include "streamhist/kernels.hpp"
#include "streamhist/pattern.hpp"
#include "streamhist/policy.hpp"

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace streamhist {

struct AccumulatorState {
    Histogram256 running;
    std::uint64_t chunks_seen = 0;

    friend auto operator==(AccumulatorState const &, AccumulatorState const &)
        -> bool = default;
};

// Throws error{count_overflow}.
auto accumulator_push(AccumulatorState state, Histogram256 const &h)
    -> AccumulatorState;

// Sum of the last `capacity` pushed histograms, maintained by adding the new
// histogram and subtracting the evicted one.
class WindowState {
  public:
    explicit WindowState(std::size_t capacity = 128);

    // Throws error{negative_count} if the incremental sum ever disagrees with
    // the ring, which would be a bug.
    void push(Histogram256 const &h);

    [[nodiscard]] auto capacity() const noexcept -> std::size_t {
        return capacity_;
    }
    [[nodiscard]] auto size() const noexcept -> std::size_t {
        return ring_.size();
    }
    [[nodiscard]] auto windowed() const noexcept -> Histogram256 const & {
        return windowed_;
    }
    [[nodiscard]] auto ring() const noexcept
        -> std::deque<Histogram256> const & {
        return ring_;
    }
    // Sum of the ring from scratch.
    [[nodiscard]] auto recompute() const -> Histogram256;

    friend auto operator==(WindowState const &, WindowState const &)
        -> bool = default;

  private:
    std::size_t capacity_;
    std::deque<Histogram256> ring_;
    Histogram256 windowed_;
};

auto window_push(WindowState state, Histogram256 const &h) -> WindowState;

// One launch returning one histogram per slice.
auto batch_histograms(std::span<PackedChunk const> slices, KernelKind kernel,
                      BinningPattern const &pattern,
                      WorkerGroupConfig const &cfg) -> std::vector<Histogram256>;

enum class PipelineStage { CpuPre, TransferIn, Compute, TransferOut, CpuPost };
inline constexpr std::size_t kStageCount = 5;

auto to_string(PipelineStage stage) -> std::string_view;

// Minimum per-iteration duration of each stage. A stage that finishes its
// real work early waits out the remainder on the monotonic clock.
struct StageProfile {
    std::array<std::chrono::nanoseconds, kStageCount> minimum{};

    [[nodiscard]] auto operator[](PipelineStage s) const
        -> std::chrono::nanoseconds {
        return minimum[static_cast<std::size_t>(s)];
    }
    [[nodiscard]] auto operator[](PipelineStage s)
        -> std::chrono::nanoseconds & {
        return minimum[static_cast<std::size_t>(s)];
    }
};

struct PipelineConfig {
    // Pipeline iterations (the "number of streams" axis).
    std::size_t num_iterations = 16;
    // Slices per iteration, processed by a single kernel launch.
    std::size_t batch_size = 1;
    // Moving-window length in slices.
    std::size_t window = 128;
    // Synthetic bus rates in bytes per second; 0 disables the delay.
    double bandwidth_in = 0.0;
    double bandwidth_out = 0.0;
    std::size_t recompute_pattern_every = 1;
    WorkerGroupConfig kernel;
    std::size_t total_slots = kDefaultSlots;
    std::size_t cap = kDefaultCap;
    KernelKind initial_kernel = KernelKind::Naive;
    std::optional<StageProfile> profile;
};

// Throws error{invalid_config}.
void validate_pipeline(PipelineConfig const &cfg);

struct IterationRecord {
    std::array<std::chrono::nanoseconds, kStageCount> stage{};
    KernelKind kernel = KernelKind::Naive;
    // Of the moving window after this iteration.
    double degeneracy = 0.0;
    // Total variation between the accumulator and the window after this
    // iteration (0 while either is empty).
    double divergence = 0.0;

    [[nodiscard]] auto operator[](PipelineStage s) const
        -> std::chrono::nanoseconds {
        return stage[static_cast<std::size_t>(s)];
    }
};

struct PipelineReport {
    std::vector<IterationRecord> iterations;
    // Sum of every stage duration of every iteration.
    std::chrono::nanoseconds total_sequential{};
    // Wall time of the whole run.
    std::chrono::nanoseconds total_pipelined{};
    // Staging writes that found the buffer set still held by a reader.
    std::size_t buffer_violations = 0;

    [[nodiscard]] auto stage_total(PipelineStage s) const
        -> std::chrono::nanoseconds;
    [[nodiscard]] auto stage_percent(PipelineStage s) const -> double;
    // total_pipelined / total_sequential.
    [[nodiscard]] auto pipelined_fraction() const -> double;

    // Per-iteration rows, then a summary section. If `sequential_baseline`
    // is given, it replaces total_sequential in the summary.
    void write_csv(std::ostream &out,
                   std::optional<std::chrono::nanoseconds> sequential_baseline =
                       std::nullopt) const;
};

struct StreamResult {
    AccumulatorState accumulator;
    WindowState window;
    PipelineReport report;
    std::vector<KernelKind> kernel_log;
    std::vector<Histogram256> slice_histograms;
};

// Slices for iteration i, or nullopt once the stream has ended.
using ChunkSource =
    std::function<std::optional<std::vector<PackedChunk>>(std::size_t)>;

// Iteration i draws slices i*batch .. i*batch+batch-1 via generate_chunk.
auto make_source(SourceSpec const &spec, std::size_t batch_size,
                 std::optional<std::size_t> iterations = std::nullopt)
    -> ChunkSource;

// Consecutive segments of a source; segment k covers `iterations` iterations.
struct ScheduleSegment {
    SourceSpec source;
    std::size_t iterations = 0;
};
auto make_schedule_source(std::vector<ScheduleSegment> segments,
                          std::size_t batch_size) -> ChunkSource;

// Data dependencies, identical in both runners:
//   * the kernel for iteration i+1 is chosen from the window after
//     iteration i, refreshed only when recompute_pattern_every divides i
//     (otherwise the previous choice carries over);
//   * the pattern for iteration i+1 is recomputed under the same cadence,
//     from the window after iteration i-1 (uniform before any history),
//     because its CPU preparation overlaps iteration i's compute.
// run_pipeline overlaps iteration i+1's cpu_pre and transfer_in with
// iteration i's compute, transfer_out and cpu_post, using two staging buffer
// sets; iteration i's cpu_post always completes before iteration i+1's
// compute starts.
// Throws error{source_exhausted} and propagates kernel errors.
auto run_pipeline(ChunkSource const &source, PipelineConfig const &cfg,
                  SwitchPolicy const &policy) -> StreamResult;
auto run_sequential(ChunkSource const &source, PipelineConfig const &cfg,
                    SwitchPolicy const &policy) -> StreamResult;

} // namespace streamhist
