#include "streamhist/cli.hpp"

#include "streamhist/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace streamhist::cli {

using clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kMaxPriorPixels = 4u << 20;
constexpr double kMinSampleSeconds = 0.02;
constexpr char const *kDefaultSchedule = "uniform@100;constant:127@100";

auto seconds_since(clock::time_point start) -> double {
    return std::chrono::duration<double>(clock::now() - start).count();
}

// One timed warm-up of each variant, then `reps` rounds that time every
// variant back to back; returns the per-variant medians in seconds. A sample
// repeats its variant until it spans kMinSampleSeconds, judged from the
// warm-up, so millisecond-scale variants are not swamped by their neighbours.
auto interleaved_medians(std::size_t reps,
                         std::vector<std::function<void()>> const &variants)
    -> std::vector<double> {
    std::vector<std::size_t> calls;
    calls.reserve(variants.size());
    for (auto const &fn : variants) {
        auto const start = clock::now();
        fn();
        auto const once = std::max(seconds_since(start), 1e-9);
        calls.push_back(static_cast<std::size_t>(
            std::clamp(std::ceil(kMinSampleSeconds / once), 1.0, 1000.0)));
    }
    std::vector<std::vector<double>> secs(variants.size());
    // Fresh order each round: a variant that always follows the same
    // neighbour inherits its cache and frequency state.
    std::vector<std::size_t> order(variants.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffler(0x5eed);
    for (std::size_t r = 0; r < reps; ++r) {
        std::shuffle(order.begin(), order.end(), shuffler);
        for (auto const v : order) {
            auto const start = clock::now();
            for (std::size_t c = 0; c < calls[v]; ++c) {
                variants[v]();
            }
            secs[v].push_back(seconds_since(start) /
                              static_cast<double>(calls[v]));
        }
    }
    std::vector<double> out;
    out.reserve(variants.size());
    for (auto &s : secs) {
        out.push_back(median(std::move(s)));
    }
    return out;
}

auto rate(std::size_t bytes, double seconds) -> double {
    return seconds > 0.0 ? static_cast<double>(bytes) / seconds : 0.0;
}

// Held-out chunk of the same distribution used to train the pattern.
auto prior_chunk(SourceSpec spec) -> PackedChunk {
    if (spec.kind != SourceKind::File) {
        spec.pixels = std::min(spec.pixels, kMaxPriorPixels);
    }
    return generate_chunk(spec, 1);
}

auto train(PackedChunk const &prior, RunConfig const &cfg) -> BinningPattern {
    return compute_binning_pattern(reference_histogram(prior), cfg.total_slots,
                                   cfg.cap);
}

auto trained_pattern(SourceSpec const &spec, RunConfig const &cfg)
    -> BinningPattern {
    return train(prior_chunk(spec), cfg);
}

void dump_if_asked(RunConfig const &cfg, std::ostream *log,
                   std::string const &label, BinningPattern const &p) {
    if (cfg.pattern_dump && log != nullptr) {
        *log << "# pattern " << label << "\n" << dump_pattern(p);
    }
}

thread_local std::ostream *g_log = nullptr;

} // namespace

void validate_run_config(RunConfig const &cfg) {
    static constexpr std::array modes = {"genealogy", "compare", "sweep",
                                         "pipeline", "stream"};
    if (std::find(modes.begin(), modes.end(), cfg.mode) == modes.end()) {
        throw error(errc::invalid_config, "unknown mode '" + cfg.mode + "'");
    }
    if (cfg.repetitions < 1) {
        throw error(errc::invalid_config, "repetitions must be >= 1");
    }
    if (cfg.pixels && *cfg.pixels % kPixelsPerWord != 0) {
        throw error(errc::invalid_config, "pixels must be a multiple of 4");
    }
    if (cfg.noise_guard < 0.0) {
        throw error(errc::invalid_config, "noise guard must be >= 0");
    }
    validate_config(cfg.kernel);
    validate_policy(SwitchPolicy{cfg.threshold});
    validate_pipeline(pipeline_config(cfg));
}

void apply_config_json(RunConfig &cfg, nlohmann::json const &j) {
    if (!j.is_object()) {
        throw error(errc::invalid_config, "config must be a JSON object");
    }
    try {
        if (j.contains("mode")) cfg.mode = j.at("mode").get<std::string>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("pixels")) cfg.pixels = j.at("pixels").get<std::size_t>();
        if (j.contains("source")) {
            cfg.source = parse_source(j.at("source").get<std::string>());
        }
        if (j.contains("group_size")) {
            cfg.kernel.group_size = j.at("group_size").get<std::size_t>();
        }
        if (j.contains("group_count")) {
            cfg.kernel.group_count = j.at("group_count").get<std::size_t>();
        }
        if (j.contains("threads_per_group")) {
            cfg.kernel.threads_per_group =
                j.at("threads_per_group").get<std::size_t>();
        }
        if (j.contains("narrow")) {
            cfg.kernel.narrow_counters = j.at("narrow").get<bool>();
        }
        if (j.contains("slots")) cfg.total_slots = j.at("slots").get<std::size_t>();
        if (j.contains("cap")) cfg.cap = j.at("cap").get<std::size_t>();
        if (j.contains("threshold")) cfg.threshold = j.at("threshold").get<double>();
        if (j.contains("window")) cfg.window = j.at("window").get<std::size_t>();
        if (j.contains("iterations")) {
            cfg.iterations = j.at("iterations").get<std::size_t>();
        }
        if (j.contains("batch")) cfg.batch = j.at("batch").get<std::size_t>();
        if (j.contains("bandwidth_in")) {
            cfg.bandwidth_in = j.at("bandwidth_in").get<double>();
        }
        if (j.contains("bandwidth_out")) {
            cfg.bandwidth_out = j.at("bandwidth_out").get<double>();
        }
        if (j.contains("recompute_every")) {
            cfg.recompute_every = j.at("recompute_every").get<std::size_t>();
        }
        if (j.contains("profile")) {
            auto const &p = j.at("profile");
            cfg.profile = p.is_string() ? load_profile(p.get<std::string>())
                                        : parse_profile(p);
        }
        if (j.contains("schedule")) {
            cfg.schedule =
                parse_schedule(j.at("schedule").get<std::string>(), cfg.seed,
                               pixels_or(cfg, kStreamSlicePixels));
        }
        if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
        if (j.contains("pattern_dump")) {
            cfg.pattern_dump = j.at("pattern_dump").get<bool>();
        }
        if (j.contains("repetitions")) {
            cfg.repetitions = j.at("repetitions").get<std::size_t>();
        }
        if (j.contains("noise_guard")) {
            cfg.noise_guard = j.at("noise_guard").get<double>();
        }
    } catch (nlohmann::json::exception const &e) {
        throw error(errc::invalid_config, e.what());
    }
}

auto parse_profile(nlohmann::json const &j) -> StageProfile {
    static constexpr std::array<std::pair<char const *, PipelineStage>, 5>
        keys = {{{"cpu_pre_us", PipelineStage::CpuPre},
                 {"transfer_in_us", PipelineStage::TransferIn},
                 {"compute_us", PipelineStage::Compute},
                 {"transfer_out_us", PipelineStage::TransferOut},
                 {"cpu_post_us", PipelineStage::CpuPost}}};
    if (!j.is_object()) {
        throw error(errc::invalid_config, "profile must be a JSON object");
    }
    StageProfile profile;
    for (auto const &[key, stage] : keys) {
        if (!j.contains(key)) {
            continue;
        }
        if (!j.at(key).is_number()) {
            throw error(errc::invalid_config,
                        std::string("profile key ") + key + " is not a number");
        }
        auto const us = j.at(key).get<double>();
        if (!(us >= 0.0)) {
            throw error(errc::invalid_config,
                        std::string("profile key ") + key + " is negative");
        }
        profile[stage] = std::chrono::nanoseconds(
            static_cast<std::int64_t>(std::llround(us * 1000.0)));
    }
    return profile;
}

auto load_profile(std::string const &path) -> StageProfile {
    std::ifstream in(path);
    if (!in) {
        throw error(errc::file_unreadable, path);
    }
    try {
        return parse_profile(nlohmann::json::parse(in));
    } catch (nlohmann::json::exception const &e) {
        throw error(errc::invalid_config, path + ": " + e.what());
    }
}

auto parse_schedule(std::string_view text, std::uint64_t seed,
                    std::size_t pixels) -> std::vector<ScheduleSegment> {
    std::vector<ScheduleSegment> segments;
    while (!text.empty()) {
        auto const semi = text.find(';');
        auto const item = text.substr(0, semi);
        text = semi == std::string_view::npos ? std::string_view{}
                                              : text.substr(semi + 1);
        auto const at = item.rfind('@');
        if (at == std::string_view::npos) {
            throw error(errc::invalid_config,
                        "schedule segment '" + std::string(item) +
                            "' lacks @ITERATIONS");
        }
        ScheduleSegment seg;
        seg.source = parse_source(item.substr(0, at));
        seg.source.seed = seed;
        if (seg.source.kind != SourceKind::File) {
            seg.source.pixels = pixels;
        }
        validate_source(seg.source);
        try {
            seg.iterations = std::stoul(std::string(item.substr(at + 1)));
        } catch (std::exception const &) {
            throw error(errc::invalid_config,
                        "bad iteration count in '" + std::string(item) + "'");
        }
        segments.push_back(std::move(seg));
    }
    if (segments.empty()) {
        throw error(errc::invalid_config, "empty schedule");
    }
    return segments;
}

auto pixels_or(RunConfig const &cfg, std::size_t fallback) -> std::size_t {
    return cfg.pixels.value_or(fallback);
}

auto source_or(RunConfig const &cfg, SourceKind fallback,
               std::size_t fallback_pixels) -> SourceSpec {
    SourceSpec spec;
    if (cfg.source) {
        spec = *cfg.source;
    } else {
        spec.kind = fallback;
    }
    spec.seed = cfg.seed;
    if (spec.kind != SourceKind::File || cfg.pixels) {
        spec.pixels = pixels_or(cfg, fallback_pixels);
    }
    return spec;
}

auto pipeline_config(RunConfig const &cfg) -> PipelineConfig {
    PipelineConfig p;
    p.num_iterations = cfg.iterations;
    p.batch_size = cfg.batch;
    p.window = cfg.window;
    p.bandwidth_in = cfg.bandwidth_in;
    p.bandwidth_out = cfg.bandwidth_out;
    p.recompute_pattern_every = cfg.recompute_every;
    p.kernel = cfg.kernel;
    p.total_slots = cfg.total_slots;
    p.cap = cfg.cap;
    p.profile = cfg.profile;
    return p;
}

auto to_string(Verdict v) -> std::string_view {
    switch (v) {
    case Verdict::Holds:
        return "holds";
    case Verdict::Inconclusive:
        return "inconclusive";
    case Verdict::Inverted:
        return "inverted";
    }
    return "unknown";
}

auto check_ordering(double expected_high, double expected_low, double guard)
    -> Verdict {
    if (expected_high > expected_low * (1.0 + guard)) {
        return Verdict::Holds;
    }
    if (expected_low > expected_high * (1.0 + guard)) {
        return Verdict::Inverted;
    }
    return Verdict::Inconclusive;
}

auto median(std::vector<double> values) -> double {
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    auto const n = values.size();
    return n % 2 == 1 ? values[n / 2]
                      : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

auto average_ranks(std::vector<double> const &v) -> std::vector<double> {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        auto j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
            ++j;
        }
        auto const r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (auto k = i; k <= j; ++k) {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

} // namespace

auto spearman(std::vector<double> const &x, std::vector<double> const &y)
    -> double {
    if (x.size() != y.size() || x.size() < 2) {
        throw error(errc::invalid_config,
                    "spearman needs two equal-length series of length >= 2");
    }
    auto const rx = average_ranks(x);
    auto const ry = average_ranks(y);
    auto const n = static_cast<double>(x.size());
    auto const mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    auto const my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        return 0.0;
    }
    return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------- genealogy

auto GenealogyResult::ordering_ok() const -> bool {
    return std::none_of(rows.begin(), rows.end(), [](GenealogyRow const &r) {
        return r.vs_previous == Verdict::Inverted;
    });
}

void GenealogyResult::write_csv(std::ostream &out) const {
    out << "stage,throughput_bytes_per_sec,ordering_vs_previous\n";
    for (auto const &r : rows) {
        out << to_string(r.stage) << ',' << r.throughput << ','
            << to_string(r.vs_previous) << '\n';
    }
}

auto mode_genealogy(RunConfig const &cfg) -> GenealogyResult {
    auto const spec =
        source_or(cfg, SourceKind::UniformRandom, kFullSlicePixels);
    auto const chunk = generate(spec);
    auto const pattern = trained_pattern(spec, cfg);
    dump_if_asked(cfg, g_log, describe(spec), pattern);

    GenealogyResult result;
    auto const full = run_ablation(chunk, KernelKind::Full, pattern, cfg.kernel);
    result.histogram_correct = full.histogram == reference_histogram(chunk);

    std::vector<std::function<void()>> variants;
    for (auto const stage : kGenealogyStages) {
        variants.emplace_back([&chunk, &pattern, &cfg, stage] {
            (void)run_ablation(chunk, stage, pattern, cfg.kernel);
        });
    }
    auto const secs = interleaved_medians(cfg.repetitions, variants);
    for (std::size_t k = 0; k < kGenealogyStages.size(); ++k) {
        GenealogyRow row{kGenealogyStages[k], rate(chunk.byte_size(), secs[k])};
        if (!result.rows.empty()) {
            row.vs_previous = check_ordering(result.rows.back().throughput,
                                             row.throughput, cfg.noise_guard);
        }
        result.rows.push_back(row);
    }
    return result;
}

// ------------------------------------------------------------------ compare

auto CompareResult::all_correct() const -> bool {
    return std::all_of(rows.begin(), rows.end(),
                       [](CompareRow const &r) { return r.correct; });
}

auto CompareResult::throughput(std::string_view distribution,
                               KernelKind kernel) const -> double {
    for (auto const &r : rows) {
        if (r.distribution == distribution && r.kernel == kernel) {
            return r.throughput;
        }
    }
    return 0.0;
}

void CompareResult::write_csv(std::ostream &out) const {
    out << "distribution,kernel,throughput_bytes_per_sec,"
           "end_to_end_bytes_per_sec,correct\n";
    for (auto const &r : rows) {
        out << r.distribution << ',' << to_string(r.kernel) << ','
            << r.throughput << ',' << r.end_to_end_throughput << ','
            << (r.correct ? "true" : "false") << '\n';
    }
}

auto mode_compare(RunConfig const &cfg) -> CompareResult {
    auto const pixels = pixels_or(cfg, kFullSlicePixels);
    auto make = [&](SourceKind kind, std::uint8_t value = 127) {
        SourceSpec s;
        s.kind = kind;
        s.value = value;
        s.seed = cfg.seed;
        s.pixels = pixels;
        return s;
    };
    std::vector<SourceSpec> const distributions = {
        make(SourceKind::UniformRandom), make(SourceKind::Sequential),
        make(SourceKind::Constant, 127), make(SourceKind::Constant, 1),
        make(SourceKind::Normal)};

    CompareResult result;
    for (auto const &spec : distributions) {
        auto const name = describe(spec);
        auto const chunk = generate(spec);
        auto const reference = reference_histogram(chunk);
        auto const bytes = chunk.byte_size();
        double const transfer =
            cfg.bandwidth_in > 0.0
                ? static_cast<double>(bytes) / cfg.bandwidth_in
                : 0.0;

        auto const prior = prior_chunk(spec);
        auto const pattern_start = clock::now();
        auto const pattern = train(prior, cfg);
        auto const pattern_secs = seconds_since(pattern_start);
        dump_if_asked(cfg, g_log, name, pattern);

        auto const secs = interleaved_medians(
            cfg.repetitions,
            {[&] { (void)naive_histogram(chunk, cfg.kernel); },
             [&] { (void)adaptive_histogram(chunk, pattern, cfg.kernel); }});
        auto const naive_secs = secs[0];
        auto const adaptive_secs = secs[1];

        CompareRow naive{name, KernelKind::Naive};
        naive.correct = naive_histogram(chunk, cfg.kernel) == reference;
        naive.throughput = rate(bytes, naive_secs);
        naive.end_to_end_throughput = rate(bytes, naive_secs + transfer);

        CompareRow adaptive{name, KernelKind::Adaptive};
        adaptive.correct =
            adaptive_histogram(chunk, pattern, cfg.kernel) == reference;
        adaptive.throughput = rate(bytes, adaptive_secs);
        adaptive.end_to_end_throughput =
            rate(bytes, adaptive_secs + pattern_secs + transfer);

        result.rows.push_back(naive);
        result.rows.push_back(adaptive);
    }
    auto const random = describe(distributions[0]);
    auto const c127 = describe(distributions[2]);
    result.constant_127 =
        check_ordering(result.throughput(c127, KernelKind::Adaptive),
                       result.throughput(c127, KernelKind::Naive),
                       cfg.noise_guard);
    result.random =
        check_ordering(result.throughput(random, KernelKind::Naive),
                       result.throughput(random, KernelKind::Adaptive),
                       cfg.noise_guard);
    return result;
}

// -------------------------------------------------------------------- sweep

auto SweepResult::all_correct() const -> bool {
    return std::all_of(rows.begin(), rows.end(),
                       [](SweepRow const &r) { return r.correct; });
}

void SweepResult::write_csv(std::ostream &out) const {
    out << "degeneracy,naive_tp,adaptive_tp,selected_kernel\n";
    for (auto const &r : rows) {
        out << r.degeneracy_pct << ',' << r.naive_tp << ',' << r.adaptive_tp
            << ',' << to_string(r.selected) << '\n';
    }
    out << "degenerate_value,spearman_rho,crossover_pct\n";
    out << unsigned{degenerate_value} << ',' << spearman_rho << ',';
    if (crossover_pct) {
        out << *crossover_pct;
    } else {
        out << "none";
    }
    out << '\n';
}

auto mode_sweep(RunConfig const &cfg) -> SweepResult {
    auto const training =
        source_or(cfg, SourceKind::Normal, kFullSlicePixels);
    auto prior_spec = training;
    if (prior_spec.kind != SourceKind::File) {
        prior_spec.pixels = std::min(prior_spec.pixels, kMaxPriorPixels);
    }
    auto const prior = reference_histogram(generate_chunk(prior_spec, 1));
    auto const pattern =
        compute_binning_pattern(prior, cfg.total_slots, cfg.cap);
    dump_if_asked(cfg, g_log, describe(training), pattern);

    SweepResult result;
    // Argmax of the pattern's sub-bin counts; many bins usually share the
    // cap, so ties go to the heavier prior bin, then the lower index.
    std::size_t best = 0;
    for (std::size_t b = 1; b < kBins; ++b) {
        if (pattern.count[b] > pattern.count[best] ||
            (pattern.count[b] == pattern.count[best] && prior[b] > prior[best])) {
            best = b;
        }
    }
    result.degenerate_value = static_cast<std::uint8_t>(best);
    SwitchPolicy const policy{cfg.threshold};

    // All eleven chunks are timed in the same interleaved rounds, so drift in
    // machine speed does not masquerade as a trend across degeneracy.
    std::vector<PackedChunk> chunks;
    std::vector<std::function<void()>> variants;
    for (int step = 0; step <= 10; ++step) {
        SourceSpec spec;
        spec.kind = SourceKind::Mixture;
        spec.degeneracy = step / 10.0;
        spec.value = result.degenerate_value;
        spec.seed = cfg.seed;
        spec.pixels = pixels_or(cfg, kFullSlicePixels);
        chunks.push_back(generate(spec));
    }
    for (auto const &chunk : chunks) {
        variants.emplace_back([&] { (void)naive_histogram(chunk, cfg.kernel); });
        variants.emplace_back(
            [&] { (void)adaptive_histogram(chunk, pattern, cfg.kernel); });
    }
    auto const secs = interleaved_medians(cfg.repetitions, variants);

    std::vector<double> pct;
    std::vector<double> diff;
    for (std::size_t step = 0; step < chunks.size(); ++step) {
        auto const &chunk = chunks[step];
        auto const reference = reference_histogram(chunk);
        SweepRow row;
        row.degeneracy_pct = 10.0 * static_cast<double>(step);
        row.correct = naive_histogram(chunk, cfg.kernel) == reference &&
                      adaptive_histogram(chunk, pattern, cfg.kernel) ==
                          reference;
        row.naive_tp = rate(chunk.byte_size(), secs[2 * step]);
        row.adaptive_tp = rate(chunk.byte_size(), secs[2 * step + 1]);
        row.selected = select_kernel(degeneracy(reference), policy);
        if (!result.crossover_pct && row.adaptive_tp >= row.naive_tp) {
            result.crossover_pct = row.degeneracy_pct;
        }
        pct.push_back(row.degeneracy_pct);
        diff.push_back(row.adaptive_tp - row.naive_tp);
        result.rows.push_back(row);
    }
    result.spearman_rho = spearman(pct, diff);
    return result;
}

// ----------------------------------------------------------------- pipeline

auto same_state(StreamResult const &a, StreamResult const &b) -> bool {
    return a.accumulator == b.accumulator && a.window == b.window &&
           a.slice_histograms == b.slice_histograms &&
           a.kernel_log == b.kernel_log;
}

auto PipelineModeResult::pipelined_fraction() const -> double {
    auto const seq = static_cast<double>(sequential.report.total_sequential.count());
    return seq > 0.0
               ? static_cast<double>(pipelined.report.total_pipelined.count()) /
                     seq
               : 0.0;
}

void PipelineModeResult::write_csv(std::ostream &out) const {
    pipelined.report.write_csv(out, sequential.report.total_sequential);
    auto const &seq = sequential.report;
    out << "cpu_pre_pct,transfer_in_pct,compute_pct,transfer_out_pct,"
           "cpu_post_pct,total_sequential_pct,pipelined_pct\n";
    for (auto const s :
         {PipelineStage::CpuPre, PipelineStage::TransferIn,
          PipelineStage::Compute, PipelineStage::TransferOut,
          PipelineStage::CpuPost}) {
        out << seq.stage_percent(s) << ',';
    }
    out << 100.0 << ',' << 100.0 * pipelined_fraction() << '\n';
}

auto mode_pipeline(RunConfig const &cfg) -> PipelineModeResult {
    auto const spec =
        source_or(cfg, SourceKind::UniformRandom, kStreamSlicePixels);
    auto const pcfg = pipeline_config(cfg);
    auto const source = make_source(spec, pcfg.batch_size);
    SwitchPolicy const policy{cfg.threshold};

    PipelineModeResult result{run_sequential(source, pcfg, policy),
                              run_pipeline(source, pcfg, policy), false};
    result.states_equal = same_state(result.sequential, result.pipelined);
    return result;
}

// ------------------------------------------------------------------- stream

void StreamModeResult::write_csv(std::ostream &out) const {
    out << "iteration,kernel_kind,degeneracy,divergence\n";
    auto const &its = pipelined.report.iterations;
    for (std::size_t i = 0; i < its.size(); ++i) {
        out << i << ',' << to_string(its[i].kernel) << ','
            << its[i].degeneracy << ',' << its[i].divergence << '\n';
    }
}

auto mode_stream(RunConfig const &cfg) -> StreamModeResult {
    auto schedule = cfg.schedule;
    if (schedule.empty()) {
        schedule = parse_schedule(kDefaultSchedule, cfg.seed,
                                  pixels_or(cfg, kStreamSlicePixels));
    }
    std::size_t total = 0;
    for (auto const &seg : schedule) {
        total += seg.iterations;
    }
    auto pcfg = pipeline_config(cfg);
    pcfg.num_iterations = total;
    auto const source = make_schedule_source(schedule, pcfg.batch_size);
    SwitchPolicy const policy{cfg.threshold};

    StreamModeResult result{run_sequential(source, pcfg, policy),
                            run_pipeline(source, pcfg, policy), false, {}};
    result.states_equal = same_state(result.sequential, result.pipelined);
    auto const &log = result.pipelined.kernel_log;
    for (std::size_t i = 1; i < log.size(); ++i) {
        if (log[i] != log[i - 1]) {
            result.switches.push_back(i);
        }
    }
    return result;
}

// ---------------------------------------------------------------------- run

auto run(RunConfig const &cfg, std::ostream &csv, std::ostream &log) -> int {
    validate_run_config(cfg);
    g_log = &log;
    int status = 0;

    if (cfg.mode == "genealogy") {
        auto const r = mode_genealogy(cfg);
        r.write_csv(csv);
        if (!r.histogram_correct) {
            log << "error: full-stage histogram differs from the reference\n";
            status = 1;
        }
        if (!r.ordering_ok()) {
            log << "error: a later stage is faster than its predecessor by "
                   "more than the noise guard\n";
            status = 1;
        }
    } else if (cfg.mode == "compare") {
        auto const r = mode_compare(cfg);
        r.write_csv(csv);
        log << "constant_127 adaptive>naive: " << to_string(r.constant_127)
            << "\nrandom naive>=adaptive: " << to_string(r.random) << '\n';
        if (!r.all_correct()) {
            log << "error: a kernel histogram differs from the reference\n";
            status = 1;
        }
        if (r.constant_127 == Verdict::Inverted ||
            r.random == Verdict::Inverted) {
            log << "error: kernel ordering inverted beyond the noise guard\n";
            status = 1;
        }
    } else if (cfg.mode == "sweep") {
        auto const r = mode_sweep(cfg);
        r.write_csv(csv);
        log << "spearman(adaptive-naive, degeneracy) = " << r.spearman_rho
            << '\n';
        if (!r.all_correct()) {
            log << "error: a kernel histogram differs from the reference\n";
            status = 1;
        }
    } else if (cfg.mode == "pipeline") {
        auto const r = mode_pipeline(cfg);
        r.write_csv(csv);
        log << "pipelined/sequential = " << r.pipelined_fraction() << '\n';
        if (!r.states_equal) {
            log << "error: pipelined state differs from the sequential run\n";
            status = 1;
        }
    } else {
        auto const r = mode_stream(cfg);
        r.write_csv(csv);
        for (auto const i : r.switches) {
            log << "kernel switch at iteration " << i << " -> "
                << to_string(r.pipelined.kernel_log[i]) << '\n';
        }
        if (!r.states_equal) {
            log << "error: pipelined state differs from the sequential run\n";
            status = 1;
        }
    }
    g_log = nullptr;
    return status;
}

} // namespace streamhist::cli
