#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace streamhist {

inline constexpr std::size_t kBins = 256;
inline constexpr std::size_t kPixelsPerWord = 4;

using Pixel = std::uint8_t;

// Pixels packed four to a 32-bit word. Byte k of word i (k = 0 is the least
// significant byte) holds pixel 4i + k.
class PackedChunk {
  public:
    PackedChunk() = default;
    explicit PackedChunk(std::vector<std::uint32_t> words)
        : words_(std::move(words)) {}

    [[nodiscard]] auto words() const noexcept -> std::span<std::uint32_t const> {
        return words_;
    }
    [[nodiscard]] auto word_count() const noexcept -> std::size_t {
        return words_.size();
    }
    [[nodiscard]] auto pixel_count() const noexcept -> std::size_t {
        return words_.size() * kPixelsPerWord;
    }
    // One byte per pixel.
    [[nodiscard]] auto byte_size() const noexcept -> std::size_t {
        return pixel_count();
    }
    [[nodiscard]] auto empty() const noexcept -> bool { return words_.empty(); }

    friend auto operator==(PackedChunk const &, PackedChunk const &)
        -> bool = default;

  private:
    std::vector<std::uint32_t> words_;
};

struct Histogram256 {
    std::array<std::uint64_t, kBins> counts{};

    [[nodiscard]] auto operator[](std::size_t bin) const -> std::uint64_t {
        return counts[bin];
    }
    [[nodiscard]] auto operator[](std::size_t bin) -> std::uint64_t & {
        return counts[bin];
    }
    [[nodiscard]] auto total() const -> std::uint64_t;

    friend auto operator==(Histogram256 const &, Histogram256 const &)
        -> bool = default;
};

// Throws error{length_not_multiple_of_four}.
auto pack_pixels(std::span<Pixel const> pixels) -> PackedChunk;

constexpr auto unpack_word(std::uint32_t word) noexcept -> std::array<Pixel, 4> {
    return {static_cast<Pixel>(word & 0xFFu),
            static_cast<Pixel>((word >> 8) & 0xFFu),
            static_cast<Pixel>((word >> 16) & 0xFFu),
            static_cast<Pixel>((word >> 24) & 0xFFu)};
}

auto unpack(PackedChunk const &chunk) -> std::vector<Pixel>;

// Componentwise sum; throws error{count_overflow} if any bin would wrap.
auto merge(Histogram256 const &a, Histogram256 const &b) -> Histogram256;
void merge_into(Histogram256 &acc, Histogram256 const &h);

// acc -= h; throws error{negative_count} if any bin would go below zero.
void subtract_from(Histogram256 &acc, Histogram256 const &h);

} // namespace streamhist
