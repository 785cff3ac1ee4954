#pragma once

#include "streamhist/datagen.hpp"
#include "streamhist/kernels.hpp"
#include "streamhist/policy.hpp"
#include "streamhist/stream.hpp"

#include <json.hpp>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace streamhist::cli {

inline constexpr std::size_t kFullSlicePixels = 8192u * 8192u;

struct RunConfig {
    std::string mode = "compare";
    // Each mode falls back to its own default source when unset.
    std::optional<SourceSpec> source;
    std::uint64_t seed = 1;
    // Pixels per chunk; unset means 8192 x 8192 for the kernel benchmarks
    // and 64 Ki per slice for the streaming modes.
    std::optional<std::size_t> pixels;
    WorkerGroupConfig kernel;
    std::size_t total_slots = kDefaultSlots;
    std::size_t cap = kDefaultCap;
    double threshold = kDefaultThreshold;
    std::size_t window = 128;
    std::size_t iterations = 16;
    std::size_t batch = 1;
    double bandwidth_in = 0.0;
    double bandwidth_out = 0.0;
    std::size_t recompute_every = 1;
    std::optional<StageProfile> profile;
    std::vector<ScheduleSegment> schedule;
    std::string out;
    bool pattern_dump = false;
    std::size_t repetitions = 5;
    // Orderings are only asserted when medians differ by more than this.
    double noise_guard = 0.10;
};

// Throws error{invalid_config}.
void validate_run_config(RunConfig const &cfg);

// Keys mirror the long flag names with dashes turned into underscores.
void apply_config_json(RunConfig &cfg, nlohmann::json const &j);

// {"cpu_pre_us":..,"transfer_in_us":..,"compute_us":..,"transfer_out_us":..,
//  "cpu_post_us":..}; missing keys mean 0.
auto parse_profile(nlohmann::json const &j) -> StageProfile;
auto load_profile(std::string const &path) -> StageProfile;

// "SOURCE@ITERATIONS;SOURCE@ITERATIONS;..." e.g. "uniform@100;constant:127@100".
auto parse_schedule(std::string_view text, std::uint64_t seed,
                    std::size_t pixels) -> std::vector<ScheduleSegment>;

inline constexpr std::size_t kStreamSlicePixels = 64u * 1024u;

auto pixels_or(RunConfig const &cfg, std::size_t fallback) -> std::size_t;
// cfg.source (or a default of the given kind) with cfg's seed and size.
auto source_or(RunConfig const &cfg, SourceKind fallback,
               std::size_t fallback_pixels) -> SourceSpec;
auto pipeline_config(RunConfig const &cfg) -> PipelineConfig;

enum class Verdict { Holds, Inconclusive, Inverted };
auto to_string(Verdict v) -> std::string_view;

// Holds if high > low * (1 + guard), Inverted if low > high * (1 + guard).
auto check_ordering(double expected_high, double expected_low, double guard)
    -> Verdict;

auto median(std::vector<double> values) -> double;
// Rank correlation with average ranks for ties.
auto spearman(std::vector<double> const &x, std::vector<double> const &y)
    -> double;

struct GenealogyRow {
    KernelKind stage;
    double throughput = 0.0;
    // Against the previous stage, expecting it to be no faster.
    Verdict vs_previous = Verdict::Holds;
};

struct GenealogyResult {
    std::vector<GenealogyRow> rows;
    bool histogram_correct = false;
    // No stage is faster than its predecessor by more than the guard.
    [[nodiscard]] auto ordering_ok() const -> bool;
    void write_csv(std::ostream &out) const;
};

auto mode_genealogy(RunConfig const &cfg) -> GenealogyResult;

struct CompareRow {
    std::string distribution;
    KernelKind kernel;
    double throughput = 0.0;
    // Pattern computation (adaptive only) and synthetic transfer included.
    double end_to_end_throughput = 0.0;
    bool correct = false;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    // Adaptive over naive on Constant(127).
    Verdict constant_127 = Verdict::Inconclusive;
    // Naive over adaptive on uniform random data.
    Verdict random = Verdict::Inconclusive;

    [[nodiscard]] auto all_correct() const -> bool;
    [[nodiscard]] auto throughput(std::string_view distribution,
                                  KernelKind kernel) const -> double;
    void write_csv(std::ostream &out) const;
};

auto mode_compare(RunConfig const &cfg) -> CompareResult;

struct SweepRow {
    double degeneracy_pct = 0.0;
    double naive_tp = 0.0;
    double adaptive_tp = 0.0;
    KernelKind selected = KernelKind::Naive;
    bool correct = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::uint8_t degenerate_value = 127;
    // Of (adaptive - naive) against degeneracy.
    double spearman_rho = 0.0;
    // First degeneracy where adaptive >= naive.
    std::optional<double> crossover_pct;

    [[nodiscard]] auto all_correct() const -> bool;
    void write_csv(std::ostream &out) const;
};

auto mode_sweep(RunConfig const &cfg) -> SweepResult;

struct PipelineModeResult {
    StreamResult sequential;
    StreamResult pipelined;
    bool states_equal = false;

    // Pipelined wall time over the sequential run's summed stages.
    [[nodiscard]] auto pipelined_fraction() const -> double;
    void write_csv(std::ostream &out) const;
};

auto mode_pipeline(RunConfig const &cfg) -> PipelineModeResult;

struct StreamModeResult {
    StreamResult sequential;
    StreamResult pipelined;
    bool states_equal = false;
    // Iterations at which the kernel choice changed.
    std::vector<std::size_t> switches;

    void write_csv(std::ostream &out) const;
};

auto mode_stream(RunConfig const &cfg) -> StreamModeResult;

// Every observable output of the two runs matches, timing aside.
auto same_state(StreamResult const &a, StreamResult const &b) -> bool;

// Runs cfg.mode, writes its CSV, returns the process exit status.
auto run(RunConfig const &cfg, std::ostream &csv, std::ostream &log) -> int;

} // namespace streamhist::cli
