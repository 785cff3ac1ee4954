#include "streamhist/error.hpp"
#include "streamhist/stream.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <sstream>

using namespace streamhist;
using namespace std::chrono_literals;

namespace {

auto small_spec(SourceKind kind, std::uint64_t seed = 1) -> SourceSpec {
    SourceSpec s;
    s.kind = kind;
    s.seed = seed;
    s.pixels = 4096;
    return s;
}

auto flip_schedule(std::size_t before, std::size_t after)
    -> std::vector<ScheduleSegment> {
    auto c = small_spec(SourceKind::Constant);
    c.value = 127;
    return {{small_spec(SourceKind::UniformRandom), before}, {c, after}};
}

auto small_pipeline(std::size_t iterations) -> PipelineConfig {
    PipelineConfig cfg;
    cfg.num_iterations = iterations;
    cfg.kernel.group_count = 4;
    return cfg;
}

auto same(StreamResult const &a, StreamResult const &b) -> bool {
    return a.accumulator == b.accumulator && a.window == b.window &&
           a.slice_histograms == b.slice_histograms &&
           a.kernel_log == b.kernel_log;
}

} // namespace

TEST_SUITE("stream") {

TEST_CASE("accumulator_push") {
    AccumulatorState s;
    s = accumulator_push(s, Histogram256{});
    CHECK(s.running == Histogram256{});
    CHECK(s.chunks_seen == 1);

    std::mt19937_64 rng(1);
    std::vector<Histogram256> hs;
    Histogram256 all;
    AccumulatorState acc;
    for (int k = 0; k < 1000; ++k) {
        hs.push_back(test::random_histogram(rng, 1000));
        acc = accumulator_push(acc, hs.back());
    }
    for (auto const &h : hs) {
        all = merge(all, h);
    }
    CHECK(acc.running == all);
    CHECK(acc.chunks_seen == 1000);
}

TEST_CASE("window keeps the last W histograms") {
    Histogram256 a;
    a[1] = 1;
    Histogram256 b;
    b[2] = 2;
    Histogram256 c;
    c[3] = 3;

    WindowState w1(1);
    w1 = window_push(window_push(w1, a), b);
    CHECK(w1.windowed() == b);
    CHECK(w1.size() == 1);

    WindowState w2(2);
    for (auto const &h : {a, b, c}) {
        w2.push(h);
    }
    CHECK(w2.windowed() == merge(b, c));
    CHECK(w2.ring().front() == b);

    CHECK_THROWS_AS(WindowState(0), error);
}

TEST_CASE("incremental window equals recompute at every step") {
    std::mt19937_64 rng(3);
    for (std::size_t w : {1u, 2u, 5u, 32u, 100u}) {
        WindowState win(w);
        std::vector<Histogram256> pushed;
        for (int step = 0; step < 300; ++step) {
            pushed.push_back(test::random_histogram(rng, 1u << 20));
            win.push(pushed.back());
            REQUIRE(win.windowed() == win.recompute());
            Histogram256 tail;
            auto const from = pushed.size() > w ? pushed.size() - w : 0;
            for (auto i = from; i < pushed.size(); ++i) {
                tail = merge(tail, pushed[i]);
            }
            REQUIRE(win.windowed() == tail);
        }
    }
}

TEST_CASE("batch_histograms dispatches on kernel kind") {
    std::vector<PackedChunk> slices = {generate(small_spec(SourceKind::Normal)),
                                       generate(small_spec(SourceKind::Sequential))};
    WorkerGroupConfig cfg;
    for (auto const kind : {KernelKind::Naive, KernelKind::Adaptive}) {
        auto const hs = batch_histograms(slices, kind, uniform_pattern(), cfg);
        REQUIRE(hs.size() == 2);
        CHECK(hs[0] == reference_histogram(slices[0]));
        CHECK(hs[1] == reference_histogram(slices[1]));
    }
    CHECK_THROWS_AS((void)batch_histograms(slices, KernelKind::CopyOnly,
                                           uniform_pattern(), cfg),
                    error);
    CHECK_THROWS_AS((void)batch_histograms({}, KernelKind::Naive,
                                           uniform_pattern(), cfg),
                    error);
}

TEST_CASE("pipelined and sequential runs agree") {
    auto const source = make_schedule_source(flip_schedule(7, 9), 2);
    auto cfg = small_pipeline(16);
    cfg.batch_size = 2;
    cfg.window = 3;
    SwitchPolicy const policy;

    auto const seq = run_sequential(source, cfg, policy);
    auto const pipe = run_pipeline(source, cfg, policy);
    CHECK(same(seq, pipe));
    CHECK(pipe.report.buffer_violations == 0);
    CHECK(pipe.report.iterations.size() == 16);
    CHECK(pipe.slice_histograms.size() == 32);
    CHECK(pipe.accumulator.chunks_seen == 32);
    CHECK(pipe.window.size() == 3);

    Histogram256 all;
    for (std::size_t i = 0; i < 16; ++i) {
        auto const batch = *source(i);
        for (std::size_t k = 0; k < batch.size(); ++k) {
            auto const h = reference_histogram(batch[k]);
            CHECK(pipe.slice_histograms[2 * i + k] == h);
            all = merge(all, h);
        }
    }
    CHECK(pipe.accumulator.running == all);
}

TEST_CASE("kernel switches one iteration after the window turns degenerate") {
    auto const source = make_schedule_source(flip_schedule(6, 6), 1);
    auto cfg = small_pipeline(12);
    cfg.window = 2;
    auto const r = run_pipeline(source, cfg, SwitchPolicy{});
    std::vector<KernelKind> expected(12, KernelKind::Naive);
    for (std::size_t i = 7; i < 12; ++i) {
        expected[i] = KernelKind::Adaptive;
    }
    CHECK(r.kernel_log == expected);

    auto const &its = r.report.iterations;
    CHECK(its[5].degeneracy < 0.45);
    CHECK(its[6].degeneracy >= 0.45);
    CHECK(its[7].degeneracy == 1.0);
    CHECK(its[5].divergence < 0.1);
    CHECK(its[7].divergence > 0.4);
    CHECK(its[0].divergence == 0.0);
}

TEST_CASE("refresh cadence delays the switch to the next refresh") {
    auto const source = make_schedule_source(flip_schedule(6, 8), 1);
    auto cfg = small_pipeline(14);
    cfg.window = 2;
    cfg.recompute_pattern_every = 4;
    auto const r = run_sequential(source, cfg, SwitchPolicy{});
    // Choices are made after iterations 0, 4, 8 and 12.
    for (std::size_t i = 0; i < 14; ++i) {
        CAPTURE(i);
        CHECK(r.kernel_log[i] ==
              (i >= 9 ? KernelKind::Adaptive : KernelKind::Naive));
    }
    CHECK(same(r, run_pipeline(source, cfg, SwitchPolicy{})));
}

TEST_CASE("stage minimums are honoured") {
    auto const source = make_source(small_spec(SourceKind::UniformRandom), 1);
    auto cfg = small_pipeline(4);
    StageProfile p;
    p[PipelineStage::CpuPre] = 300us;
    p[PipelineStage::Compute] = 500us;
    cfg.profile = p;
    for (bool overlap : {false, true}) {
        auto const r = overlap ? run_pipeline(source, cfg, SwitchPolicy{})
                               : run_sequential(source, cfg, SwitchPolicy{});
        for (auto const &it : r.report.iterations) {
            CHECK(it[PipelineStage::CpuPre] >= 300us);
            CHECK(it[PipelineStage::Compute] >= 500us);
            for (auto const d : it.stage) {
                CHECK(d.count() >= 0);
            }
        }
        CHECK(r.report.total_sequential >= 4 * 800us);
        CHECK(r.report.pipelined_fraction() > 0.0);
    }
}

TEST_CASE("bandwidth sets a transfer floor") {
    auto const source = make_source(small_spec(SourceKind::UniformRandom), 1);
    auto cfg = small_pipeline(2);
    cfg.bandwidth_in = 4096.0 / 0.002; // 4096 bytes in 2 ms
    auto const r = run_sequential(source, cfg, SwitchPolicy{});
    for (auto const &it : r.report.iterations) {
        CHECK(it[PipelineStage::TransferIn] >= 2ms);
    }
}

TEST_CASE("report csv layout") {
    auto const source = make_source(small_spec(SourceKind::UniformRandom), 1);
    auto const r = run_sequential(source, small_pipeline(3), SwitchPolicy{});
    std::ostringstream out;
    r.report.write_csv(out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "iteration,cpu_pre_us,transfer_in_us,compute_us,transfer_out_us,"
          "cpu_post_us,kernel_kind");
    std::size_t rows = 0;
    while (std::getline(in, line) && !line.starts_with("total_")) {
        ++rows;
    }
    CHECK(rows == 3);
    CHECK(line == "total_sequential_us,total_pipelined_us,pipelined_pct");
}

TEST_CASE("errors propagate out of both runners") {
    auto const finite = make_source(small_spec(SourceKind::UniformRandom), 1, 3);
    auto const cfg = small_pipeline(5);
    for (bool overlap : {false, true}) {
        try {
            (void)(overlap ? run_pipeline(finite, cfg, SwitchPolicy{})
                           : run_sequential(finite, cfg, SwitchPolicy{}));
            FAIL("expected an error");
        } catch (error const &e) {
            CHECK(e.code() == errc::source_exhausted);
        }
    }

    // A 16-bit counter overflow inside compute.
    auto big = small_spec(SourceKind::Constant);
    big.pixels = 1u << 17;
    auto narrow = small_pipeline(3);
    narrow.kernel.group_count = 1;
    narrow.kernel.group_size = 1;
    narrow.kernel.narrow_counters = true;
    try {
        (void)run_pipeline(make_source(big, 1), narrow, SwitchPolicy{});
        FAIL("expected an error");
    } catch (error const &e) {
        CHECK(e.code() == errc::sub_counter_overflow);
    }

    auto bad = small_pipeline(0);
    CHECK_THROWS_AS((void)run_pipeline(finite, bad, SwitchPolicy{}), error);
    auto bad_slots = small_pipeline(2);
    bad_slots.total_slots = 100;
    CHECK_THROWS_AS((void)run_sequential(finite, bad_slots, SwitchPolicy{}),
                    error);
}

} // TEST_SUITE
