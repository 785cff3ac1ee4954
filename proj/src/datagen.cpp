#include "streamhist/datagen.hpp"

#include "streamhist/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <vector>

namespace streamhist {

void validate_source(SourceSpec const &spec) {
    if (spec.pixels % kPixelsPerWord != 0) {
        throw error(errc::spec_invalid,
                    "pixel count " + std::to_string(spec.pixels) +
                        " is not a multiple of 4");
    }
    switch (spec.kind) {
    case SourceKind::Normal:
        if (!(spec.sigma > 0.0) || !std::isfinite(spec.mean)) {
            throw error(errc::spec_invalid, "normal needs sigma > 0");
        }
        break;
    case SourceKind::Mixture:
        if (!(spec.degeneracy >= 0.0 && spec.degeneracy <= 1.0)) {
            throw error(errc::spec_invalid, "degeneracy must lie in [0, 1]");
        }
        break;
    case SourceKind::File:
        if (spec.path.empty()) {
            throw error(errc::spec_invalid, "file source needs a path");
        }
        break;
    default:
        break;
    }
}

namespace {

auto draw_normal_pixel(SplitMix64 &rng, double mean, double sigma) -> Pixel {
    // 1 - [0,1) keeps the log argument in (0, 1].
    auto const u1 = 1.0 - rng.next_unit();
    auto const u2 = rng.next_unit();
    auto const z = std::sqrt(-2.0 * std::log(u1)) *
                   std::cos(2.0 * std::numbers::pi * u2);
    auto const v = std::round(mean + sigma * z);
    return static_cast<Pixel>(std::clamp(v, 0.0, 255.0));
}

auto generate_pixels(SourceSpec const &spec) -> std::vector<Pixel> {
    std::vector<Pixel> px(spec.pixels);
    SplitMix64 rng(spec.seed);
    switch (spec.kind) {
    case SourceKind::UniformRandom:
        for (std::size_t i = 0; i < px.size(); i += 8) {
            auto r = rng.next();
            for (std::size_t k = 0; k < 8 && i + k < px.size(); ++k) {
                px[i + k] = static_cast<Pixel>(r & 0xFFu);
                r >>= 8;
            }
        }
        break;
    case SourceKind::Sequential:
        for (std::size_t i = 0; i < px.size(); ++i) {
            px[i] = static_cast<Pixel>(i & 0xFFu);
        }
        break;
    case SourceKind::Constant:
        std::fill(px.begin(), px.end(), spec.value);
        break;
    case SourceKind::Normal:
        for (auto &p : px) {
            p = draw_normal_pixel(rng, spec.mean, spec.sigma);
        }
        break;
    case SourceKind::Mixture:
        for (auto &p : px) {
            if (rng.next_unit() < spec.degeneracy) {
                p = spec.value;
            } else {
                p = static_cast<Pixel>(rng.next() >> 56);
            }
        }
        break;
    case SourceKind::File:
        break;
    }
    return px;
}

auto parse_double(std::string_view s) -> double {
    // from_chars for double is not available on every toolchain we build on.
    std::istringstream in{std::string(s)};
    double v = 0.0;
    if (!(in >> v) || !in.eof()) {
        throw error(errc::spec_invalid, "bad number '" + std::string(s) + "'");
    }
    return v;
}

auto parse_pixel_value(std::string_view s) -> std::uint8_t {
    unsigned v = 0;
    auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v > 255) {
        throw error(errc::spec_invalid,
                    "bad pixel value '" + std::string(s) + "'");
    }
    return static_cast<std::uint8_t>(v);
}

} // namespace

auto read_raw_file(std::string const &path, std::size_t max_pixels)
    -> PackedChunk {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw error(errc::file_unreadable, path);
    }
    std::vector<Pixel> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw error(errc::file_unreadable, path);
    }
    if (max_pixels > 0 && bytes.size() > max_pixels) {
        bytes.resize(max_pixels);
    }
    if (auto const extra = bytes.size() % kPixelsPerWord; extra != 0) {
        std::cerr << "warning: " << path << ": dropping " << extra
                  << " trailing byte(s) to reach a multiple of 4\n";
        bytes.resize(bytes.size() - extra);
    }
    return pack_pixels(bytes);
}

auto generate(SourceSpec const &spec) -> PackedChunk {
    validate_source(spec);
    if (spec.kind == SourceKind::File) {
        return read_raw_file(spec.path, spec.pixels);
    }
    return pack_pixels(generate_pixels(spec));
}

auto generate_chunk(SourceSpec const &spec, std::uint64_t chunk_index)
    -> PackedChunk {
    auto s = spec;
    s.seed = spec.seed ^ chunk_index;
    return generate(s);
}

auto parse_source(std::string_view text) -> SourceSpec {
    SourceSpec spec;
    auto const colon = text.find(':');
    auto const head = text.substr(0, colon);
    auto const args =
        colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    auto split2 = [&](std::string_view s) {
        auto const comma = s.find(',');
        if (comma == std::string_view::npos) {
            throw error(errc::spec_invalid,
                        "expected two comma-separated values in '" +
                            std::string(text) + "'");
        }
        return std::pair{s.substr(0, comma), s.substr(comma + 1)};
    };

    if (head == "uniform" || head == "random") {
        spec.kind = SourceKind::UniformRandom;
    } else if (head == "sequential") {
        spec.kind = SourceKind::Sequential;
    } else if (head == "constant") {
        spec.kind = SourceKind::Constant;
        spec.value = parse_pixel_value(args);
    } else if (head == "normal" || head == "xray") {
        spec.kind = SourceKind::Normal;
        if (!args.empty()) {
            auto const [m, s] = split2(args);
            spec.mean = parse_double(m);
            spec.sigma = parse_double(s);
        }
    } else if (head == "mixture") {
        spec.kind = SourceKind::Mixture;
        auto const [p, v] = split2(args);
        spec.degeneracy = parse_double(p);
        spec.value = parse_pixel_value(v);
    } else if (head == "file") {
        spec.kind = SourceKind::File;
        spec.path = std::string(args);
        spec.pixels = 0;
    } else {
        throw error(errc::spec_invalid,
                    "unknown source '" + std::string(text) + "'");
    }
    validate_source(spec);
    return spec;
}

auto describe(SourceSpec const &spec) -> std::string {
    std::ostringstream out;
    switch (spec.kind) {
    case SourceKind::UniformRandom:
        out << "random";
        break;
    case SourceKind::Sequential:
        out << "sequential";
        break;
    case SourceKind::Constant:
        out << "constant_" << unsigned{spec.value};
        break;
    case SourceKind::Normal:
        out << "normal_" << spec.mean << "_" << spec.sigma;
        if (spec.mean == kXRayStandInMean && spec.sigma == kXRayStandInSigma) {
            out << "_xray_standin";
        }
        break;
    case SourceKind::Mixture:
        out << "mixture_" << spec.degeneracy << "_" << unsigned{spec.value};
        break;
    case SourceKind::File:
        out << "file";
        break;
    }
    return out.str();
}

} // namespace streamhist
