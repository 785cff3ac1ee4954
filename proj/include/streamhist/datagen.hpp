#pragma once

#include "streamhist/core_types.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace streamhist {

// SplitMix64 (Steele, Lea and Flood; public domain reference by Vigna).
// Every generator below draws from it, so a given SourceSpec yields the same bytes
// on every platform.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    auto next() noexcept -> std::uint64_t {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1) with 53 random bits.
    auto next_unit() noexcept -> double {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

  private:
    std::uint64_t state_;
};

enum class SourceKind { UniformRandom, Sequential, Constant, Normal, Mixture, File };

inline constexpr double kXRayStandInMean = 127.0;
inline constexpr double kXRayStandInSigma = 24.0;

struct SourceSpec {
    SourceKind kind = SourceKind::UniformRandom;
    // Constant value, or the degenerate value of a mixture.
    std::uint8_t value = 127;
    double mean = kXRayStandInMean;
    double sigma = kXRayStandInSigma;
    // Mixture: probability that a pixel is the degenerate value.
    double degeneracy = 0.0;
    std::string path;
    std::uint64_t seed = 1;
    // Must be a multiple of 4. For File sources 0 means "whole file".
    std::size_t pixels = 1u << 20;
};

// Throws error{spec_invalid}.
void validate_source(SourceSpec const &spec);

// Pixel streams:
//   UniformRandom  one 64-bit draw yields 8 pixels, least significant byte
//                  first;
//   Sequential     pixel i = i mod 256;
//   Constant       every pixel = value;
//   Normal         Box-Muller (cosine branch, two draws per pixel), rounded
//                  half away from zero and clamped to [0, 255];
//   Mixture        one draw for the Bernoulli(degeneracy) test; only if it
//                  fails, a second draw whose top byte is the pixel;
//   File           raw bytes, truncated to a multiple of 4.
// Throws error{spec_invalid} or error{file_unreadable}.
auto generate(SourceSpec const &spec) -> PackedChunk;

// Same SourceSpec re-seeded with seed XOR chunk_index.
auto generate_chunk(SourceSpec const &spec, std::uint64_t chunk_index)
    -> PackedChunk;

// Headerless raw bytes; at most max_pixels (0 = no limit). Trailing bytes
// beyond a multiple of 4 are dropped with a warning on stderr.
auto read_raw_file(std::string const &path, std::size_t max_pixels = 0)
    -> PackedChunk;

// "uniform", "sequential", "constant:V", "normal[:MEAN,SIGMA]",
// "mixture:P,V", "file:PATH". Seed and pixel count are left at defaults.
auto parse_source(std::string_view text) -> SourceSpec;
auto describe(SourceSpec const &spec) -> std::string;

} // namespace streamhist
