#pragma once

#include "streamhist/core_types.hpp"
#include "streamhist/pattern.hpp"

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace streamhist {

enum class KernelKind {
    Naive,
    Adaptive,
    // Cumulative ablation stages of the adaptive kernel, cheapest first.
    CopyOnly,
    CopyInit,
    PatternLoad,
    SubHistNoReduce,
    Full,
};

auto to_string(KernelKind kind) -> std::string_view;
auto parse_kernel_kind(std::string_view name) -> KernelKind;

inline constexpr std::array<KernelKind, 5> kGenealogyStages = {
    KernelKind::CopyOnly, KernelKind::CopyInit, KernelKind::PatternLoad,
    KernelKind::SubHistNoReduce, KernelKind::Full};

// A chunk is split into group_count contiguous word ranges (remainder words
// go to the last group). Each group has group_size lanes sharing one counter
// array; lane L of a group handles words L, L + group_size, ... of the
// group's range, and all lanes advance in lockstep one byte plane at a time.
//
// The lanes of a group are driven by threads_per_group OS threads (thread t
// runs lanes t, t + T, ...). With one thread per group the counter array has
// a single writer and is bumped with plain increments; with more threads
// every update is an atomic fetch-and-add.
struct WorkerGroupConfig {
    std::size_t group_size = 32;
    std::size_t group_count = 64;
    std::size_t threads_per_group = 1;
    // 16-bit sub-counters with overflow detection, mirroring GPU shared
    // memory width.
    bool narrow_counters = false;
};

// Throws error{invalid_config}.
void validate_config(WorkerGroupConfig const &cfg);

// Serial single-pass oracle.
auto reference_histogram(PackedChunk const &chunk) -> Histogram256;
auto reference_histogram(std::span<std::uint32_t const> words) -> Histogram256;

// One shared counter per bin per group.
auto naive_histogram(PackedChunk const &chunk, WorkerGroupConfig const &cfg)
    -> Histogram256;

// Lane L bumps slot offset[b] + (L mod count[b]) for bin b.
auto adaptive_histogram(PackedChunk const &chunk,
                        BinningPattern const &pattern,
                        WorkerGroupConfig const &cfg) -> Histogram256;

// Per-(lane, slot) increment totals summed over all groups; used to check the
// lane-cyclic slot rule. increments[lane * total_slots + slot].
struct SlotTrace {
    std::size_t group_size = 0;
    std::size_t total_slots = 0;
    std::vector<std::uint64_t> increments;

    [[nodiscard]] auto at(std::size_t lane, std::size_t slot) const
        -> std::uint64_t {
        return increments[lane * total_slots + slot];
    }
    [[nodiscard]] auto slot_total(std::size_t slot) const -> std::uint64_t;
};

auto adaptive_histogram_traced(PackedChunk const &chunk,
                               BinningPattern const &pattern,
                               WorkerGroupConfig const &cfg, SlotTrace &trace)
    -> Histogram256;

// One launch over several slices: every (slice, group) pair is an
// independent task of the same parallel region.
auto naive_histogram_batch(std::span<PackedChunk const> slices,
                           WorkerGroupConfig const &cfg)
    -> std::vector<Histogram256>;
auto adaptive_histogram_batch(std::span<PackedChunk const> slices,
                              BinningPattern const &pattern,
                              WorkerGroupConfig const &cfg)
    -> std::vector<Histogram256>;

// counts[b] = sum of slots[offset[b] .. offset[b] + count[b]).
auto reduce_subbins(std::span<std::uint64_t const> slots,
                    BinningPattern const &pattern) -> Histogram256;

struct AblationTiming {
    KernelKind variant = KernelKind::Full;
    std::chrono::nanoseconds elapsed{};
    std::size_t bytes = 0;
    // Folded from every stage's sink output so no measured work is dead.
    std::uint64_t checksum = 0;
    // Only the Full stage produces a histogram.
    std::optional<Histogram256> histogram;

    [[nodiscard]] auto throughput_bytes_per_sec() const -> double;
};

auto run_ablation(PackedChunk const &chunk, KernelKind variant,
                  BinningPattern const &pattern, WorkerGroupConfig const &cfg)
    -> AblationTiming;

} // namespace streamhist
