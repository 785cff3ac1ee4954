#include "streamhist/kernels.hpp"

#include "streamhist/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <type_traits>

namespace streamhist {

auto to_string(KernelKind kind) -> std::string_view {
    switch (kind) {
    case KernelKind::Naive:
        return "naive";
    case KernelKind::Adaptive:
        return "adaptive";
    case KernelKind::CopyOnly:
        return "copy_only";
    case KernelKind::CopyInit:
        return "copy_init";
    case KernelKind::PatternLoad:
        return "pattern_load";
    case KernelKind::SubHistNoReduce:
        return "subhist_no_reduce";
    case KernelKind::Full:
        return "full";
    }
    return "unknown";
}

auto parse_kernel_kind(std::string_view name) -> KernelKind {
    for (auto const kind :
         {KernelKind::Naive, KernelKind::Adaptive, KernelKind::CopyOnly,
          KernelKind::CopyInit, KernelKind::PatternLoad,
          KernelKind::SubHistNoReduce, KernelKind::Full}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    throw error(errc::invalid_config,
                "unknown kernel kind '" + std::string(name) + "'");
}

void validate_config(WorkerGroupConfig const &cfg) {
    if (cfg.group_size < 1 || cfg.group_count < 1 ||
        cfg.threads_per_group < 1) {
        throw error(errc::invalid_config,
                    "group_size, group_count and threads_per_group must be "
                    ">= 1");
    }
    if (cfg.threads_per_group > cfg.group_size) {
        throw error(errc::invalid_config,
                    "threads_per_group exceeds group_size");
    }
}

auto SlotTrace::slot_total(std::size_t slot) const -> std::uint64_t {
    std::uint64_t sum = 0;
    for (std::size_t lane = 0; lane < group_size; ++lane) {
        sum += at(lane, slot);
    }
    return sum;
}

auto AblationTiming::throughput_bytes_per_sec() const -> double {
    auto const secs = std::chrono::duration<double>(elapsed).count();
    return secs > 0.0 ? static_cast<double>(bytes) / secs : 0.0;
}

auto reference_histogram(std::span<std::uint32_t const> words)
    -> Histogram256 {
    Histogram256 h;
    for (auto const word : words) {
        for (auto const px : unpack_word(word)) {
            ++h.counts[px];
        }
    }
    return h;
}

auto reference_histogram(PackedChunk const &chunk) -> Histogram256 {
    return reference_histogram(chunk.words());
}

namespace {

template <class Counter>
auto reduce_slots(std::span<Counter const> slots, BinningPattern const &p)
    -> Histogram256 {
    Histogram256 h;
    for (std::size_t b = 0; b < kBins; ++b) {
        std::uint64_t sum = 0;
        auto const first = slots.begin() + p.offset[b];
        for (auto it = first; it != first + p.count[b]; ++it) {
            sum += *it;
        }
        h.counts[b] = sum;
    }
    return h;
}

enum class Stage { CopyOnly, CopyInit, PatternLoad, SubHist, Full };

constexpr auto stage_of(KernelKind kind) -> Stage {
    switch (kind) {
    case KernelKind::CopyOnly:
        return Stage::CopyOnly;
    case KernelKind::CopyInit:
        return Stage::CopyInit;
    case KernelKind::PatternLoad:
        return Stage::PatternLoad;
    case KernelKind::SubHistNoReduce:
        return Stage::SubHist;
    default:
        return Stage::Full;
    }
}

struct GroupOutput {
    Histogram256 hist;
    std::uint64_t checksum = 0;
    bool overflow = false;
};

struct Range {
    std::size_t begin;
    std::size_t end;
};

// Contiguous equal word ranges, remainder to the last group.
auto group_range(std::size_t words, std::size_t group, std::size_t groups)
    -> Range {
    auto const per = words / groups;
    auto const begin = group * per;
    return {begin, group + 1 == groups ? words : begin + per};
}

// Runs fn(lane_begin, lane_step) on `threads` concurrent OS threads.
template <class Fn> void drive_lanes(std::size_t threads, Fn const &fn) {
    if (threads <= 1) {
        fn(std::size_t{0}, std::size_t{1});
        return;
    }
    std::vector<std::jthread> extra;
    extra.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) {
        extra.emplace_back([&fn, t, threads] { fn(t, threads); });
    }
    fn(std::size_t{0}, threads);
}

template <class Fn> void parallel_tasks(std::size_t tasks, Fn const &fn) {
    auto const hw =
        std::max<std::size_t>(1, std::thread::hardware_concurrency());
    auto const workers = std::min(tasks, hw);
    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (auto i = next.fetch_add(1); i < tasks;
                     i = next.fetch_add(1)) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mu);
                        if (!failure) {
                            failure = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

// Copy-stage read loop. Kept out of line so every copy-type stage runs the
// same code and differs only in its setup work.
[[gnu::noinline]] auto fold_words(std::span<std::uint32_t const> words,
                                  std::size_t lanes, std::size_t lane_begin,
                                  std::size_t lane_step) -> std::uint32_t {
    auto const n = words.size();
    std::uint32_t acc = 0;
    for (std::size_t base = 0; base < n; base += lanes) {
        auto const active = std::min(lanes, n - base);
        for (auto lane = lane_begin; lane < active; lane += lane_step) {
            acc ^= words[base + lane];
        }
    }
    return acc;
}

template <class Counter, bool Atomic>
inline auto bump(Counter &c) -> bool {
    constexpr bool narrow = sizeof(Counter) < sizeof(std::uint64_t);
    if constexpr (Atomic) {
        auto const old =
            std::atomic_ref<Counter>(c).fetch_add(1, std::memory_order_relaxed);
        if constexpr (narrow) {
            return old == std::numeric_limits<Counter>::max();
        } else {
            return false;
        }
    } else {
        ++c;
        if constexpr (narrow) {
            return c == 0;
        } else {
            return false;
        }
    }
}

template <Stage St, class Counter, bool Atomic, bool UseTable, bool Trace>
auto run_group(std::span<std::uint32_t const> words,
               WorkerGroupConfig const &cfg, BinningPattern const &pattern,
               std::uint64_t *trace_rows) -> GroupOutput {
    auto const lanes = cfg.group_size;
    auto const slot_count = pattern.total_slots;
    GroupOutput out;

    std::unique_ptr<Counter[]> slots;
    if constexpr (St >= Stage::CopyInit) {
        slots.reset(new Counter[slot_count]);
        std::fill_n(slots.get(), slot_count, Counter{0});
    }

    // Per-lane slot lookup: table[L * 256 + b] = offset[b] + L mod count[b].
    std::vector<std::uint16_t> table;
    if constexpr (St >= Stage::PatternLoad && UseTable) {
        table.resize(lanes * kBins);
        for (std::size_t b = 0; b < kBins; ++b) {
            auto const off = pattern.offset[b];
            auto const cnt = pattern.count[b];
            std::uint32_t r = 0;
            for (std::size_t lane = 0; lane < lanes; ++lane) {
                table[lane * kBins + b] = static_cast<std::uint16_t>(off + r);
                r = r + 1 == cnt ? 0 : r + 1;
            }
        }
    }

    auto const n = words.size();
    std::atomic<std::uint32_t> folded{0};
    std::atomic<bool> overflow{false};

    drive_lanes(cfg.threads_per_group, [&](std::size_t lane_begin,
                                           std::size_t lane_step) {
        if constexpr (St < Stage::SubHist) {
            folded.fetch_xor(fold_words(words, lanes, lane_begin, lane_step),
                             std::memory_order_relaxed);
        } else {
            bool wrapped = false;
            Counter *const s = slots.get();
            std::uint16_t const *const t = table.data();
            for (std::size_t base = 0; base < n; base += lanes) {
                auto const active = std::min(lanes, n - base);
                // One byte plane at a time across all lanes, as a SIMT
                // group would issue it.
                for (unsigned shift = 0; shift < 32; shift += 8) {
                    for (auto lane = lane_begin; lane < active;
                         lane += lane_step) {
                        auto const px = (words[base + lane] >> shift) & 0xFFu;
                        std::size_t slot;
                        if constexpr (UseTable) {
                            slot = t[lane * kBins + px];
                        } else {
                            slot = px;
                        }
                        wrapped |= bump<Counter, Atomic>(s[slot]);
                        if constexpr (Trace) {
                            ++trace_rows[lane * slot_count + slot];
                        }
                    }
                }
            }
            if (wrapped) {
                overflow.store(true, std::memory_order_relaxed);
            }
        }
    });
    out.overflow = overflow.load();

    // Write out 256 words for the group and fold them into the checksum.
    std::array<std::uint32_t, kBins> sink{};
    auto const acc = folded.load();
    if constexpr (St == Stage::Full) {
        out.hist = reduce_slots<Counter>({slots.get(), slot_count}, pattern);
        for (std::size_t b = 0; b < kBins; ++b) {
            sink[b] = static_cast<std::uint32_t>(out.hist.counts[b]);
        }
    } else if constexpr (St == Stage::SubHist) {
        for (std::size_t j = 0; j < kBins; ++j) {
            sink[j] = static_cast<std::uint32_t>(slots[j % slot_count]);
        }
    } else {
        for (std::size_t j = 0; j < kBins; ++j) {
            sink[j] = acc ^ static_cast<std::uint32_t>(j);
        }
        if constexpr (St >= Stage::CopyInit) {
            sink[0] ^= static_cast<std::uint32_t>(slots[acc % slot_count]);
        }
        if constexpr (St >= Stage::PatternLoad && UseTable) {
            sink[1] ^= table[acc % table.size()];
        }
    }
    for (auto const w : sink) {
        out.checksum = (out.checksum * 0x100000001B3ull) ^ w;
    }
    return out;
}

struct LaunchResult {
    std::vector<Histogram256> histograms;
    std::uint64_t checksum = 0;
};

template <Stage St, bool UseTable, bool Trace>
auto launch(std::span<PackedChunk const> slices, BinningPattern const &pattern,
            WorkerGroupConfig const &cfg, SlotTrace *trace) -> LaunchResult {
    validate_config(cfg);
    if (pattern.total_slots > std::numeric_limits<std::uint16_t>::max() + 1ull) {
        throw error(errc::invalid_pattern, "total_slots exceeds 65536");
    }
    auto const groups = cfg.group_count;
    auto const tasks = slices.size() * groups;
    std::vector<GroupOutput> outputs(tasks);

    auto const trace_size = cfg.group_size * pattern.total_slots;
    std::vector<std::vector<std::uint64_t>> traces;
    if constexpr (Trace) {
        traces.assign(tasks, std::vector<std::uint64_t>(trace_size, 0));
    }

    auto body = [&](auto counter_tag, auto atomic_tag) {
        using Counter = typename decltype(counter_tag)::type;
        constexpr bool Atomic = decltype(atomic_tag)::value;
        parallel_tasks(tasks, [&](std::size_t i) {
            auto const &chunk = slices[i / groups];
            auto const r = group_range(chunk.word_count(), i % groups, groups);
            auto const words = chunk.words().subspan(r.begin, r.end - r.begin);
            std::uint64_t *rows = nullptr;
            if constexpr (Trace) {
                rows = traces[i].data();
            }
            outputs[i] = run_group<St, Counter, Atomic, UseTable, Trace>(
                words, cfg, pattern, rows);
        });
    };
    using wide = std::type_identity<std::uint64_t>;
    using narrow = std::type_identity<std::uint16_t>;
    bool const atomic = cfg.threads_per_group > 1;
    if (cfg.narrow_counters) {
        atomic ? body(narrow{}, std::true_type{})
               : body(narrow{}, std::false_type{});
    } else {
        atomic ? body(wide{}, std::true_type{})
               : body(wide{}, std::false_type{});
    }

    LaunchResult result;
    result.histograms.resize(slices.size());
    for (std::size_t i = 0; i < tasks; ++i) {
        if (outputs[i].overflow) {
            throw error(errc::sub_counter_overflow,
                        "16-bit sub-counter wrapped in group " +
                            std::to_string(i % groups));
        }
        result.checksum ^= outputs[i].checksum + i;
        if constexpr (St == Stage::Full) {
            merge_into(result.histograms[i / groups], outputs[i].hist);
        }
    }
    if constexpr (Trace) {
        trace->group_size = cfg.group_size;
        trace->total_slots = pattern.total_slots;
        trace->increments.assign(trace_size, 0);
        for (auto const &t : traces) {
            for (std::size_t j = 0; j < trace_size; ++j) {
                trace->increments[j] += t[j];
            }
        }
    }
    return result;
}

auto const &naive_layout() {
    static auto const p = uniform_pattern(kBins, 1);
    return p;
}

} // namespace

auto reduce_subbins(std::span<std::uint64_t const> slots,
                    BinningPattern const &pattern) -> Histogram256 {
    validate_pattern(pattern);
    if (slots.size() != pattern.total_slots) {
        throw error(errc::invalid_pattern,
                    "slot array length " + std::to_string(slots.size()) +
                        " != total_slots " +
                        std::to_string(pattern.total_slots));
    }
    return reduce_slots<std::uint64_t>(slots, pattern);
}

auto naive_histogram_batch(std::span<PackedChunk const> slices,
                           WorkerGroupConfig const &cfg)
    -> std::vector<Histogram256> {
    return launch<Stage::Full, false, false>(slices, naive_layout(), cfg,
                                             nullptr)
        .histograms;
}

auto adaptive_histogram_batch(std::span<PackedChunk const> slices,
                              BinningPattern const &pattern,
                              WorkerGroupConfig const &cfg)
    -> std::vector<Histogram256> {
    validate_pattern(pattern);
    return launch<Stage::Full, true, false>(slices, pattern, cfg, nullptr)
        .histograms;
}

auto naive_histogram(PackedChunk const &chunk, WorkerGroupConfig const &cfg)
    -> Histogram256 {
    return naive_histogram_batch({&chunk, 1}, cfg).front();
}

auto adaptive_histogram(PackedChunk const &chunk,
                        BinningPattern const &pattern,
                        WorkerGroupConfig const &cfg) -> Histogram256 {
    return adaptive_histogram_batch({&chunk, 1}, pattern, cfg).front();
}

auto adaptive_histogram_traced(PackedChunk const &chunk,
                               BinningPattern const &pattern,
                               WorkerGroupConfig const &cfg, SlotTrace &trace)
    -> Histogram256 {
    validate_pattern(pattern);
    return launch<Stage::Full, true, true>({&chunk, 1}, pattern, cfg, &trace)
        .histograms.front();
}

auto run_ablation(PackedChunk const &chunk, KernelKind variant,
                  BinningPattern const &pattern, WorkerGroupConfig const &cfg)
    -> AblationTiming {
    if (variant == KernelKind::Naive || variant == KernelKind::Adaptive) {
        throw error(errc::invalid_config,
                    "run_ablation takes a genealogy stage, not " +
                        std::string(to_string(variant)));
    }
    validate_pattern(pattern);
    AblationTiming timing;
    timing.variant = variant;
    timing.bytes = chunk.byte_size();

    auto const slices = std::span<PackedChunk const>(&chunk, 1);
    auto const start = std::chrono::steady_clock::now();
    LaunchResult result;
    switch (stage_of(variant)) {
    case Stage::CopyOnly:
        result = launch<Stage::CopyOnly, true, false>(slices, pattern, cfg,
                                                      nullptr);
        break;
    case Stage::CopyInit:
        result = launch<Stage::CopyInit, true, false>(slices, pattern, cfg,
                                                      nullptr);
        break;
    case Stage::PatternLoad:
        result = launch<Stage::PatternLoad, true, false>(slices, pattern, cfg,
                                                         nullptr);
        break;
    case Stage::SubHist:
        result = launch<Stage::SubHist, true, false>(slices, pattern, cfg,
                                                     nullptr);
        break;
    case Stage::Full:
        result =
            launch<Stage::Full, true, false>(slices, pattern, cfg, nullptr);
        break;
    }
    timing.elapsed = std::chrono::steady_clock::now() - start;
    timing.checksum = result.checksum;
    if (variant == KernelKind::Full) {
        timing.histogram = result.histograms.front();
    }
    return timing;
}

} // namespace streamhist
