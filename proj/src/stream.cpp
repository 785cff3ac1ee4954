#include "streamhist/stream.hpp"

#include "streamhist/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <semaphore>
#include <string>
#include <thread>

namespace streamhist {

using clock = std::chrono::steady_clock;
using std::chrono::nanoseconds;

auto accumulator_push(AccumulatorState state, Histogram256 const &h)
    -> AccumulatorState {
    merge_into(state.running, h);
    ++state.chunks_seen;
    return state;
}

WindowState::WindowState(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ < 1) {
        throw error(errc::invalid_config, "window capacity must be >= 1");
    }
}

void WindowState::push(Histogram256 const &h) {
    merge_into(windowed_, h);
    ring_.push_back(h);
    if (ring_.size() > capacity_) {
        subtract_from(windowed_, ring_.front());
        ring_.pop_front();
    }
}

auto WindowState::recompute() const -> Histogram256 {
    Histogram256 sum;
    for (auto const &h : ring_) {
        merge_into(sum, h);
    }
    return sum;
}

auto window_push(WindowState state, Histogram256 const &h) -> WindowState {
    state.push(h);
    return state;
}

auto batch_histograms(std::span<PackedChunk const> slices, KernelKind kernel,
                      BinningPattern const &pattern,
                      WorkerGroupConfig const &cfg)
    -> std::vector<Histogram256> {
    if (slices.empty()) {
        throw error(errc::invalid_config, "batch needs at least one slice");
    }
    switch (kernel) {
    case KernelKind::Naive:
        return naive_histogram_batch(slices, cfg);
    case KernelKind::Adaptive:
    case KernelKind::Full:
        return adaptive_histogram_batch(slices, pattern, cfg);
    default:
        throw error(errc::invalid_config,
                    "kernel " + std::string(to_string(kernel)) +
                        " does not produce histograms");
    }
}

auto to_string(PipelineStage stage) -> std::string_view {
    switch (stage) {
    case PipelineStage::CpuPre:
        return "cpu_pre";
    case PipelineStage::TransferIn:
        return "transfer_in";
    case PipelineStage::Compute:
        return "compute";
    case PipelineStage::TransferOut:
        return "transfer_out";
    case PipelineStage::CpuPost:
        return "cpu_post";
    }
    return "unknown";
}

void validate_pipeline(PipelineConfig const &cfg) {
    if (cfg.num_iterations < 1 || cfg.batch_size < 1 || cfg.window < 1 ||
        cfg.recompute_pattern_every < 1) {
        throw error(errc::invalid_config,
                    "num_iterations, batch_size, window and "
                    "recompute_pattern_every must be >= 1");
    }
    if (cfg.bandwidth_in < 0.0 || cfg.bandwidth_out < 0.0) {
        throw error(errc::invalid_config, "bandwidth must be >= 0");
    }
    if (cfg.initial_kernel != KernelKind::Naive &&
        cfg.initial_kernel != KernelKind::Adaptive) {
        throw error(errc::invalid_config,
                    "initial kernel must be naive or adaptive");
    }
    validate_config(cfg.kernel);
    // Surfaces slot_count_out_of_range before any thread starts.
    (void)uniform_pattern(cfg.total_slots, cfg.cap);
}

auto PipelineReport::stage_total(PipelineStage s) const -> nanoseconds {
    nanoseconds sum{};
    for (auto const &it : iterations) {
        sum += it[s];
    }
    return sum;
}

auto PipelineReport::stage_percent(PipelineStage s) const -> double {
    auto const total = static_cast<double>(total_sequential.count());
    return total > 0 ? 100.0 * static_cast<double>(stage_total(s).count()) / total
                     : 0.0;
}

auto PipelineReport::pipelined_fraction() const -> double {
    auto const total = static_cast<double>(total_sequential.count());
    return total > 0 ? static_cast<double>(total_pipelined.count()) / total
                     : 0.0;
}

namespace {

auto to_us(nanoseconds d) -> double {
    return std::chrono::duration<double, std::micro>(d).count();
}

} // namespace

void PipelineReport::write_csv(std::ostream &out,
                               std::optional<nanoseconds> sequential_baseline)
    const {
    out << "iteration,cpu_pre_us,transfer_in_us,compute_us,transfer_out_us,"
           "cpu_post_us,kernel_kind\n";
    for (std::size_t i = 0; i < iterations.size(); ++i) {
        auto const &it = iterations[i];
        out << i;
        for (auto const d : it.stage) {
            out << ',' << to_us(d);
        }
        out << ',' << to_string(it.kernel) << '\n';
    }
    auto const seq = sequential_baseline.value_or(total_sequential);
    auto const pct = seq.count() > 0 ? 100.0 *
                                           static_cast<double>(
                                               total_pipelined.count()) /
                                           static_cast<double>(seq.count())
                                     : 0.0;
    out << "total_sequential_us,total_pipelined_us,pipelined_pct\n";
    out << to_us(seq) << ',' << to_us(total_pipelined) << ',' << pct << '\n';
}

auto make_source(SourceSpec const &spec, std::size_t batch_size,
                 std::optional<std::size_t> iterations) -> ChunkSource {
    validate_source(spec);
    return [spec, batch_size,
            iterations](std::size_t i) -> std::optional<std::vector<PackedChunk>> {
        if (iterations && i >= *iterations) {
            return std::nullopt;
        }
        std::vector<PackedChunk> batch;
        batch.reserve(batch_size);
        for (std::size_t k = 0; k < batch_size; ++k) {
            batch.push_back(generate_chunk(spec, i * batch_size + k));
        }
        return batch;
    };
}

auto make_schedule_source(std::vector<ScheduleSegment> segments,
                          std::size_t batch_size) -> ChunkSource {
    for (auto const &seg : segments) {
        validate_source(seg.source);
    }
    return [segments = std::move(segments),
            batch_size](std::size_t i) -> std::optional<std::vector<PackedChunk>> {
        std::size_t start = 0;
        for (auto const &seg : segments) {
            if (i < start + seg.iterations) {
                std::vector<PackedChunk> batch;
                batch.reserve(batch_size);
                for (std::size_t k = 0; k < batch_size; ++k) {
                    batch.push_back(
                        generate_chunk(seg.source, i * batch_size + k));
                }
                return batch;
            }
            start += seg.iterations;
        }
        return std::nullopt;
    };
}

namespace {

// Sleep most of the way, then yield until the deadline; plain sleeps
// overshoot by the timer slack.
void hold_until(clock::time_point deadline) {
    constexpr auto spin = std::chrono::microseconds(200);
    if (auto const now = clock::now(); deadline - now > spin) {
        std::this_thread::sleep_until(deadline - spin);
    }
    while (clock::now() < deadline) {
        std::this_thread::yield();
    }
}

auto transfer_floor(std::size_t bytes, double bandwidth) -> nanoseconds {
    if (bandwidth <= 0.0) {
        return nanoseconds{0};
    }
    return nanoseconds(
        static_cast<std::int64_t>(1e9 * static_cast<double>(bytes) / bandwidth));
}

class Engine {
  public:
    Engine(ChunkSource const &source, PipelineConfig const &cfg,
           SwitchPolicy const &policy)
        : source_(source), cfg_(cfg), policy_(policy), window_(cfg.window),
          next_kernel_(cfg.initial_kernel) {
        validate_pipeline(cfg_);
        validate_policy(policy_);
        records_.resize(cfg_.num_iterations);
    }

    auto run(bool overlap) -> StreamResult {
        if (overlap) {
            run_overlapped();
        } else {
            for (std::size_t i = 0; i < cfg_.num_iterations; ++i) {
                host_side(i);
                device_side(i);
            }
        }
        // From the first stage's start to the last stage's end, so thread
        // start-up is not billed to the pipeline.
        auto const wall = last_end_ - first_start_;

        StreamResult result{acc_, window_, {}, std::move(log_),
                            std::move(slices_)};
        result.report.iterations = std::move(records_);
        result.report.total_pipelined = wall;
        for (auto const &it : result.report.iterations) {
            for (auto const d : it.stage) {
                result.report.total_sequential += d;
            }
        }
        result.report.buffer_violations = violations_.load();
        return result;
    }

  private:
    struct BufferSet {
        std::vector<PackedChunk> host;
        std::vector<PackedChunk> device;
        std::vector<Histogram256> device_out;
        std::vector<Histogram256> host_out;
        BinningPattern pattern;
        // Window snapshot left by the iteration that last used this set.
        Histogram256 prior;
        std::atomic<bool> held{false};
        std::uint64_t generation = 0;
    };

    template <class Fn>
    void timed(std::size_t i, PipelineStage s, nanoseconds floor, Fn &&fn) {
        if (cfg_.profile) {
            floor = std::max(floor, (*cfg_.profile)[s]);
        }
        auto const start = clock::now();
        if (i == 0 && s == PipelineStage::CpuPre) {
            first_start_ = start;
        }
        fn();
        if (floor.count() > 0) {
            hold_until(start + floor);
        }
        auto const end = clock::now();
        records_[i].stage[static_cast<std::size_t>(s)] = end - start;
        if (i + 1 == cfg_.num_iterations && s == PipelineStage::CpuPost) {
            last_end_ = end;
        }
    }

    auto set_for(std::size_t i) -> BufferSet & { return sets_[i % 2]; }

    void host_side(std::size_t i) {
        auto &set = set_for(i);
        if (set.held.exchange(true)) {
            violations_.fetch_add(1);
        }
        ++set.generation;

        timed(i, PipelineStage::CpuPre, nanoseconds{0}, [&] {
            auto batch = source_(i);
            if (!batch || batch->empty()) {
                throw error(errc::source_exhausted,
                            "no slices for iteration " + std::to_string(i));
            }
            set.host = std::move(*batch);
            bool const refresh =
                i == 0 || (i - 1) % cfg_.recompute_pattern_every == 0;
            if (refresh) {
                // Iterations 0 and 1 see an all-zero prior, i.e. uniform.
                pattern_ = compute_binning_pattern(
                    i >= 2 ? set.prior : Histogram256{}, cfg_.total_slots,
                    cfg_.cap);
            }
            set.pattern = pattern_;
        });

        std::size_t bytes = 0;
        for (auto const &c : set.host) {
            bytes += c.byte_size();
        }
        timed(i, PipelineStage::TransferIn,
              transfer_floor(bytes, cfg_.bandwidth_in),
              [&] { set.device = set.host; });
    }

    void device_side(std::size_t i) {
        auto &set = set_for(i);
        auto const kernel = next_kernel_;
        log_.push_back(kernel);
        records_[i].kernel = kernel;

        timed(i, PipelineStage::Compute, nanoseconds{0}, [&] {
            set.device_out =
                batch_histograms(set.device, kernel, set.pattern, cfg_.kernel);
        });

        timed(i, PipelineStage::TransferOut,
              transfer_floor(set.device_out.size() * sizeof(Histogram256),
                             cfg_.bandwidth_out),
              [&] { set.host_out = set.device_out; });

        timed(i, PipelineStage::CpuPost, nanoseconds{0}, [&] {
            for (auto const &h : set.host_out) {
                acc_ = accumulator_push(std::move(acc_), h);
                window_.push(h);
                slices_.push_back(h);
            }
            auto const report = degeneracy(window_.windowed());
            records_[i].degeneracy = report.max_bin_fraction;
            if (acc_.running.total() > 0 && report.total > 0) {
                records_[i].divergence =
                    divergence(acc_.running, window_.windowed());
            }
            if (i % cfg_.recompute_pattern_every == 0) {
                next_kernel_ = select_kernel(report, policy_);
            }
            set.prior = window_.windowed();
        });
        set.held.store(false);
    }

    void run_overlapped() {
        std::counting_semaphore<> free_sets(2);
        std::array<std::binary_semaphore, 2> ready{std::binary_semaphore(0),
                                                   std::binary_semaphore(0)};
        std::atomic<bool> abort{false};
        std::exception_ptr host_failure;
        std::exception_ptr device_failure;
        auto const n = cfg_.num_iterations;

        // Iteration 0's preparation has nothing to overlap with, so it runs
        // here and the host thread only exists from iteration 1 on.
        free_sets.acquire();
        host_side(0);
        ready[0].release();

        std::jthread host;
        if (n > 1) {
            host = std::jthread([&] {
            for (std::size_t i = 1; i < n; ++i) {
                free_sets.acquire();
                if (abort.load()) {
                    return;
                }
                try {
                    host_side(i);
                } catch (...) {
                    host_failure = std::current_exception();
                    abort.store(true);
                    ready[i % 2].release();
                    return;
                }
                ready[i % 2].release();
            }
            });
        }

        for (std::size_t i = 0; i < n; ++i) {
            ready[i % 2].acquire();
            if (abort.load()) {
                break;
            }
            try {
                device_side(i);
            } catch (...) {
                device_failure = std::current_exception();
                abort.store(true);
                free_sets.release(2);
                break;
            }
            free_sets.release();
        }
        if (host.joinable()) {
            host.join();
        }
        if (host_failure) {
            std::rethrow_exception(host_failure);
        }
        if (device_failure) {
            std::rethrow_exception(device_failure);
        }
    }

    ChunkSource const &source_;
    PipelineConfig cfg_;
    SwitchPolicy policy_;
    std::array<BufferSet, 2> sets_;
    std::vector<IterationRecord> records_;
    std::atomic<std::size_t> violations_{0};
    clock::time_point first_start_{};
    clock::time_point last_end_{};

    // Host side only.
    BinningPattern pattern_;

    // Device side only.
    AccumulatorState acc_;
    WindowState window_;
    KernelKind next_kernel_;
    std::vector<KernelKind> log_;
    std::vector<Histogram256> slices_;
};

} // namespace

auto run_pipeline(ChunkSource const &source, PipelineConfig const &cfg,
                  SwitchPolicy const &policy) -> StreamResult {
    return Engine(source, cfg, policy).run(true);
}

auto run_sequential(ChunkSource const &source, PipelineConfig const &cfg,
                    SwitchPolicy const &policy) -> StreamResult {
    return Engine(source, cfg, policy).run(false);
}

} // namespace streamhist
