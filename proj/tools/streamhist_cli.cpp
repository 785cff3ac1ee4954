// Benchmark and experiment driver.
//
//   streamhist --mode genealogy|compare|sweep|pipeline|stream [options]
//
// Precedence: command-line flags, then --config JSON, then built-in defaults.

#include "streamhist/cli.hpp"
#include "streamhist/error.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <string_view>

namespace {

auto load_config_file(std::string const &path) -> nlohmann::json {
    std::ifstream in(path);
    if (!in) {
        throw streamhist::error(streamhist::errc::file_unreadable, path);
    }
    try {
        return nlohmann::json::parse(in);
    } catch (nlohmann::json::exception const &e) {
        throw streamhist::error(streamhist::errc::invalid_config,
                                path + ": " + e.what());
    }
}

// --config has to land before the flags that override it.
auto find_config_path(int argc, char **argv) -> std::string {
    for (int i = 1; i < argc; ++i) {
        std::string_view const arg = argv[i];
        if (arg == "--config" && i + 1 < argc) {
            return argv[i + 1];
        }
        if (arg.starts_with("--config=")) {
            return std::string(arg.substr(9));
        }
    }
    return {};
}

} // namespace

int main(int argc, char **argv) {
    using namespace streamhist;
    cli::RunConfig cfg;

    try {
        if (auto const path = find_config_path(argc, argv); !path.empty()) {
            cli::apply_config_json(cfg, load_config_file(path));
        }
    } catch (error const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    CLI::App app{"Sub-binned 256-bin histogram benchmarks"};
    std::string config_path;
    std::string source_text;
    std::string schedule_text;
    std::string profile_path;
    std::size_t pixels = 0;

    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--mode", cfg.mode, "genealogy, compare, sweep, pipeline or stream")
        ->check(CLI::IsMember({"genealogy", "compare", "sweep", "pipeline", "stream"}));
    app.add_option("--source", source_text,
                   "uniform | sequential | constant:V | normal[:MEAN,SIGMA] | "
                   "mixture:P,V | file:PATH");
    app.add_option("--seed", cfg.seed, "Base seed");
    auto *pixels_opt = app.add_option("--pixels", pixels, "Pixels per chunk (multiple of 4)");
    app.add_option("--group-size", cfg.kernel.group_size, "Lanes per worker group");
    app.add_option("--group-count", cfg.kernel.group_count, "Worker groups per chunk");
    app.add_option("--threads-per-group", cfg.kernel.threads_per_group,
                   "OS threads driving the lanes of one group");
    app.add_flag("--narrow", cfg.kernel.narrow_counters,
                 "16-bit sub-counters with overflow detection");
    app.add_option("--slots", cfg.total_slots, "Sub-counter slots per group");
    app.add_option("--cap", cfg.cap, "Maximum sub-bins per bin");
    app.add_option("--threshold", cfg.threshold, "Degeneracy switch threshold");
    app.add_option("--window", cfg.window, "Moving-window length in slices");
    app.add_option("--iterations", cfg.iterations, "Pipeline iterations");
    app.add_option("--batch", cfg.batch, "Slices per kernel launch");
    app.add_option("--bandwidth-in", cfg.bandwidth_in, "Synthetic input bus rate, bytes/s (0 = off)");
    app.add_option("--bandwidth-out", cfg.bandwidth_out, "Synthetic output bus rate, bytes/s (0 = off)");
    app.add_option("--recompute-every", cfg.recompute_every,
                   "Iterations between pattern and kernel refreshes");
    app.add_option("--profile", profile_path, "JSON synthetic stage durations");
    app.add_option("--schedule", schedule_text,
                   "Stream mode: SOURCE@ITERATIONS;SOURCE@ITERATIONS;...");
    app.add_option("--out", cfg.out, "CSV output path (default stdout)");
    app.add_flag("--pattern-dump", cfg.pattern_dump, "Print binning patterns to stderr");
    app.add_option("--repetitions", cfg.repetitions, "Timed repetitions (median reported)");
    app.add_option("--noise-guard", cfg.noise_guard, "Relative gap below which orderings are inconclusive");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pixels_opt->count() > 0) {
            cfg.pixels = pixels;
        }
        if (!source_text.empty()) {
            cfg.source = parse_source(source_text);
        }
        if (!profile_path.empty()) {
            cfg.profile = cli::load_profile(profile_path);
        }
        if (!schedule_text.empty()) {
            cfg.schedule = cli::parse_schedule(
                schedule_text, cfg.seed,
                cli::pixels_or(cfg, cli::kStreamSlicePixels));
        }

        if (cfg.out.empty()) {
            return cli::run(cfg, std::cout, std::cerr);
        }
        std::ofstream csv(cfg.out);
        if (!csv) {
            throw error(errc::file_unreadable, "cannot write " + cfg.out);
        }
        return cli::run(cfg, csv, std::cerr);
    } catch (error const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
