#include "streamhist/core_types.hpp"

#include "streamhist/error.hpp"

#include <limits>
#include <numeric>
#include <string>

namespace streamhist {

auto to_string(errc code) -> std::string_view {
    switch (code) {
    case errc::length_not_multiple_of_four:
        return "LengthNotMultipleOfFour";
    case errc::count_overflow:
        return "CountOverflow";
    case errc::sub_counter_overflow:
        return "SubCounterOverflow";
    case errc::invalid_pattern:
        return "InvalidPattern";
    case errc::slot_count_out_of_range:
        return "SlotCountOutOfRange";
    case errc::empty_histogram:
        return "EmptyHistogram";
    case errc::negative_count:
        return "NegativeCount";
    case errc::source_exhausted:
        return "SourceExhausted";
    case errc::file_unreadable:
        return "FileUnreadable";
    case errc::spec_invalid:
        return "SpecInvalid";
    case errc::invalid_config:
        return "InvalidConfig";
    }
    return "Unknown";
}

auto Histogram256::total() const -> std::uint64_t {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

auto pack_pixels(std::span<Pixel const> pixels) -> PackedChunk {
    if (pixels.size() % kPixelsPerWord != 0) {
        throw error(errc::length_not_multiple_of_four,
                    std::to_string(pixels.size()) + " pixels");
    }
    std::vector<std::uint32_t> words(pixels.size() / kPixelsPerWord);
    for (std::size_t i = 0; i < words.size(); ++i) {
        auto const *p = &pixels[i * kPixelsPerWord];
        words[i] = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                   (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
    }
    return PackedChunk(std::move(words));
}

auto unpack(PackedChunk const &chunk) -> std::vector<Pixel> {
    std::vector<Pixel> pixels;
    pixels.reserve(chunk.pixel_count());
    for (auto const word : chunk.words()) {
        auto const px = unpack_word(word);
        pixels.insert(pixels.end(), px.begin(), px.end());
    }
    return pixels;
}

void merge_into(Histogram256 &acc, Histogram256 const &h) {
    constexpr auto max = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t b = 0; b < kBins; ++b) {
        if (h.counts[b] > max - acc.counts[b]) {
            throw error(errc::count_overflow, "bin " + std::to_string(b));
        }
    }
    for (std::size_t b = 0; b < kBins; ++b) {
        acc.counts[b] += h.counts[b];
    }
}

auto merge(Histogram256 const &a, Histogram256 const &b) -> Histogram256 {
    Histogram256 out = a;
    merge_into(out, b);
    return out;
}

void subtract_from(Histogram256 &acc, Histogram256 const &h) {
    for (std::size_t b = 0; b < kBins; ++b) {
        if (h.counts[b] > acc.counts[b]) {
            throw error(errc::negative_count, "bin " + std::to_string(b));
        }
    }
    for (std::size_t b = 0; b < kBins; ++b) {
        acc.counts[b] -= h.counts[b];
    }
}

} // namespace streamhist
