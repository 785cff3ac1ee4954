#include "streamhist/datagen.hpp"
#include "streamhist/error.hpp"
#include "streamhist/kernels.hpp"
#include "streamhist/pattern.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <thread>

using namespace streamhist;

namespace {

auto constant_chunk(Pixel v, std::size_t pixels) -> PackedChunk {
    return pack_pixels(std::vector<Pixel>(pixels, v));
}

// Pattern with exactly eight sub-bins on bin 127.
auto peaked_pattern() -> BinningPattern {
    Histogram256 prior;
    prior[127] = 1000;
    auto p = compute_binning_pattern(prior);
    REQUIRE(p.count[127] == 8);
    return p;
}

auto bin_of_slot(BinningPattern const &p) -> std::vector<std::size_t> {
    std::vector<std::size_t> owner(p.total_slots);
    for (std::size_t b = 0; b < kBins; ++b) {
        for (std::size_t j = 0; j < p.count[b]; ++j) {
            owner[p.offset[b] + j] = b;
        }
    }
    return owner;
}

} // namespace

TEST_SUITE("kernels") {

TEST_CASE("reference_histogram examples") {
    auto const zeros = reference_histogram(pack_pixels(std::vector<Pixel>(4, 0)));
    CHECK(zeros[0] == 4);
    CHECK(zeros.total() == 4);

    std::vector<Pixel> ramp(256);
    for (std::size_t i = 0; i < ramp.size(); ++i) {
        ramp[i] = static_cast<Pixel>(i);
    }
    auto const flat = reference_histogram(pack_pixels(ramp));
    for (std::size_t b = 0; b < kBins; ++b) {
        CHECK(flat[b] == 1);
    }

    CHECK(reference_histogram(PackedChunk{}) == Histogram256{});
}

TEST_CASE("uniform 1 Mi-pixel chunk stays within 5 sigma per bin") {
    std::mt19937_64 rng(99);
    auto const px = test::random_pixels(rng, 1u << 20);
    auto const h = reference_histogram(pack_pixels(px));
    double const n = static_cast<double>(px.size());
    double const mean = n / 256.0;
    double const sigma = std::sqrt(n * (1.0 / 256.0) * (255.0 / 256.0));
    for (std::size_t b = 0; b < kBins; ++b) {
        CHECK(std::abs(static_cast<double>(h[b]) - mean) <= 5.0 * sigma);
    }
}

TEST_CASE("naive and adaptive match the reference on random inputs") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> words(1, 20000);
    for (int trial = 0; trial < 150; ++trial) {
        auto const n = 4 * words(rng);
        auto const px = trial % 2 ? test::random_pixels(rng, n)
                                  : test::skewed_pixels(rng, n);
        auto const chunk = pack_pixels(px);
        auto const cfg = test::random_config(rng, n);
        auto const pattern = test::random_pattern(rng);
        auto const expected = test::count_pixels(px);
        REQUIRE(reference_histogram(chunk) == expected);
        CHECK(naive_histogram(chunk, cfg) == expected);
        CHECK(adaptive_histogram(chunk, pattern, cfg) == expected);
    }
}

TEST_CASE("fewer words than groups or lanes") {
    auto const chunk = pack_pixels(std::vector<Pixel>{9, 9, 200, 3});
    WorkerGroupConfig cfg;
    cfg.group_count = 64;
    cfg.group_size = 32;
    auto const expected = reference_histogram(chunk);
    CHECK(naive_histogram(chunk, cfg) == expected);
    CHECK(adaptive_histogram(chunk, uniform_pattern(), cfg) == expected);
    CHECK(naive_histogram(PackedChunk{}, cfg) == Histogram256{});
}

TEST_CASE("batch launches return one histogram per slice") {
    std::mt19937_64 rng(8);
    std::vector<PackedChunk> slices;
    for (std::size_t k = 0; k < 5; ++k) {
        slices.push_back(pack_pixels(test::skewed_pixels(rng, 4 * (k * 997 + 1))));
    }
    WorkerGroupConfig cfg;
    cfg.group_count = 7;
    auto const pattern = test::random_pattern(rng);
    auto const naive = naive_histogram_batch(slices, cfg);
    auto const adaptive = adaptive_histogram_batch(slices, pattern, cfg);
    REQUIRE(naive.size() == slices.size());
    REQUIRE(adaptive.size() == slices.size());
    for (std::size_t k = 0; k < slices.size(); ++k) {
        CHECK(naive[k] == reference_histogram(slices[k]));
        CHECK(adaptive[k] == reference_histogram(slices[k]));
    }
}

TEST_CASE("constant 127 spreads over exactly eight sub-bins") {
    auto const pattern = peaked_pattern();
    auto const off = pattern.offset[127];
    WorkerGroupConfig cfg;
    cfg.group_size = 32;
    cfg.group_count = 3;
    auto const pixels = std::size_t{4} * 1001;
    auto const chunk = constant_chunk(127, pixels);

    SlotTrace trace;
    auto const h = adaptive_histogram_traced(chunk, pattern, cfg, trace);
    CHECK(h[127] == pixels);

    std::set<std::size_t> touched;
    for (std::size_t s = 0; s < pattern.total_slots; ++s) {
        if (trace.slot_total(s) > 0) {
            touched.insert(s);
        }
    }
    CHECK(touched.size() == 8);
    CHECK(*touched.begin() == off);
    CHECK(*touched.rbegin() == off + 7);

    // Lanes 0, 8, 16 and 24 share slot 0 of the bin.
    for (std::size_t lane = 0; lane < 32; ++lane) {
        for (std::size_t j = 0; j < 8; ++j) {
            if (j != lane % 8) {
                CHECK(trace.at(lane, off + j) == 0);
            }
        }
    }

    // Exact split: lane L of a group with n words handles ceil((n - L) / 32)
    // of them, four pixels each.
    auto const words = chunk.word_count();
    std::array<std::uint64_t, 8> expected{};
    for (std::size_t g = 0; g < cfg.group_count; ++g) {
        auto const per = words / cfg.group_count;
        auto const n = g + 1 == cfg.group_count ? words - per * g : per;
        for (std::size_t lane = 0; lane < cfg.group_size && lane < n; ++lane) {
            expected[lane % 8] += 4 * ((n - lane + 31) / 32);
        }
    }
    std::uint64_t sum = 0;
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(trace.slot_total(off + j) == expected[j]);
        CHECK(std::abs(static_cast<double>(expected[j]) -
                       static_cast<double>(pixels) / 8.0) <=
              static_cast<double>(4 * 32 * cfg.group_count));
        sum += expected[j];
    }
    CHECK(sum == pixels);
}

TEST_CASE("lane L only touches offset[b] + L mod count[b]") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        auto const px = test::skewed_pixels(rng, 4 * 3001);
        auto const chunk = pack_pixels(px);
        auto const pattern = test::random_pattern(rng);
        auto cfg = test::random_config(rng, px.size());
        auto const owner = bin_of_slot(pattern);

        SlotTrace trace;
        auto const h = adaptive_histogram_traced(chunk, pattern, cfg, trace);
        CHECK(h == test::count_pixels(px));
        for (std::size_t lane = 0; lane < cfg.group_size; ++lane) {
            for (std::size_t s = 0; s < pattern.total_slots; ++s) {
                if (trace.at(lane, s) == 0) {
                    continue;
                }
                auto const b = owner[s];
                CHECK(s == pattern.offset[b] + lane % pattern.count[b]);
            }
        }
        for (std::size_t b = 0; b < kBins; ++b) {
            std::uint64_t sum = 0;
            for (std::size_t j = 0; j < pattern.count[b]; ++j) {
                sum += trace.slot_total(pattern.offset[b] + j);
            }
            CHECK(sum == h[b]);
        }
    }
}

TEST_CASE("reduce_subbins") {
    auto const p = uniform_pattern(960);
    std::vector<std::uint64_t> ones(960, 1);
    auto const h = reduce_subbins(ones, p);
    for (std::size_t b = 0; b < kBins; ++b) {
        CHECK(h[b] == (b < 192 ? 4u : 3u));
    }

    std::vector<std::uint64_t> single(960, 0);
    single[p.offset[5] + 2] = 11;
    CHECK(reduce_subbins(single, p)[5] == 11);
    CHECK(reduce_subbins(single, p).total() == 11);

    std::vector<std::uint64_t> short_slots(959, 0);
    CHECK_THROWS_AS((void)reduce_subbins(short_slots, p), error);
}

TEST_CASE("ablation stages") {
    SourceSpec spec;
    spec.pixels = 1u << 18;
    auto const chunk = generate(spec);
    auto const pattern = uniform_pattern();
    WorkerGroupConfig cfg;

    for (auto const stage : kGenealogyStages) {
        auto const t = run_ablation(chunk, stage, pattern, cfg);
        CHECK(t.variant == stage);
        CHECK(t.bytes == chunk.byte_size());
        CHECK(t.elapsed.count() > 0);
        CHECK(t.histogram.has_value() == (stage == KernelKind::Full));
    }
    auto const full = run_ablation(chunk, KernelKind::Full, pattern, cfg);
    CHECK(*full.histogram == reference_histogram(chunk));
    // Same input, same sink output.
    CHECK(run_ablation(chunk, KernelKind::CopyOnly, pattern, cfg).checksum ==
          run_ablation(chunk, KernelKind::CopyOnly, pattern, cfg).checksum);

    CHECK_THROWS_AS(
        (void)run_ablation(chunk, KernelKind::Naive, pattern, cfg), error);
}

TEST_CASE("counts do not depend on scheduling") {
    std::mt19937_64 rng(5150);
    auto const px = test::skewed_pixels(rng, 4 * 50000);
    auto const chunk = pack_pixels(px);
    auto const expected = test::count_pixels(px);
    auto const pattern = peaked_pattern();

    std::atomic<bool> stop{false};
    std::vector<std::jthread> load;
    for (int k = 0; k < 3; ++k) {
        load.emplace_back([&stop, k] {
            volatile std::uint64_t x = static_cast<std::uint64_t>(k);
            while (!stop.load(std::memory_order_relaxed)) {
                x = x * 6364136223846793005ull + 1;
                if (x % 4096 == 0) {
                    std::this_thread::yield();
                }
            }
        });
    }
    for (std::size_t run = 0; run < 10; ++run) {
        WorkerGroupConfig cfg;
        cfg.group_size = 8 + run;
        cfg.group_count = 1 + run * 3;
        cfg.threads_per_group = 1 + run % 4;
        CHECK(naive_histogram(chunk, cfg) == expected);
        CHECK(adaptive_histogram(chunk, pattern, cfg) == expected);
    }
    stop.store(true);
}

TEST_CASE("narrow sub-counters report overflow instead of wrapping") {
    WorkerGroupConfig cfg;
    cfg.group_size = 1;
    cfg.group_count = 1;
    cfg.narrow_counters = true;
    auto const p = uniform_pattern(kBins, 1);

    auto const fits = constant_chunk(3, 65532);
    CHECK(adaptive_histogram(fits, p, cfg)[3] == 65532);

    auto const wraps = constant_chunk(3, 65536);
    try {
        (void)adaptive_histogram(wraps, p, cfg);
        FAIL("expected an error");
    } catch (error const &e) {
        CHECK(e.code() == errc::sub_counter_overflow);
    }

    // Eight sub-bins keep the same chunk within range.
    cfg.group_size = 8;
    CHECK(adaptive_histogram(constant_chunk(127, 65536), peaked_pattern(), cfg)[127] ==
          65536);

    cfg.narrow_counters = false;
    cfg.group_size = 1;
    CHECK(adaptive_histogram(wraps, p, cfg)[3] == 65536);
}

TEST_CASE("invalid group configurations are rejected") {
    auto const chunk = constant_chunk(1, 16);
    WorkerGroupConfig cfg;
    cfg.group_size = 0;
    CHECK_THROWS_AS((void)naive_histogram(chunk, cfg), error);
    cfg.group_size = 4;
    cfg.threads_per_group = 5;
    CHECK_THROWS_AS((void)naive_histogram(chunk, cfg), error);
    cfg.threads_per_group = 1;
    cfg.group_count = 0;
    CHECK_THROWS_AS((void)adaptive_histogram(chunk, uniform_pattern(), cfg),
                    error);

    auto bad = uniform_pattern();
    bad.count[0] = 0;
    CHECK_THROWS_AS((void)adaptive_histogram(chunk, bad, WorkerGroupConfig{}),
                    error);
}

TEST_CASE("kernel kind names round-trip") {
    for (auto const kind :
         {KernelKind::Naive, KernelKind::Adaptive, KernelKind::CopyOnly,
          KernelKind::CopyInit, KernelKind::PatternLoad,
          KernelKind::SubHistNoReduce, KernelKind::Full}) {
        CHECK(parse_kernel_kind(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS((void)parse_kernel_kind("warp"), error);
}

} // TEST_SUITE
