#pragma once

#include "streamhist/core_types.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace streamhist {

inline constexpr std::size_t kDefaultSlots = 960;
inline constexpr std::size_t kDefaultCap = 8;

// Layout of the 256 bins onto a flat sub-counter array. Bin b owns the
// contiguous slots [offset[b], offset[b] + count[b]).
struct BinningPattern {
    std::array<std::uint32_t, kBins> offset{};
    std::array<std::uint32_t, kBins> count{};
    std::size_t total_slots = 0;
    std::size_t cap = kDefaultCap;

    friend auto operator==(BinningPattern const &, BinningPattern const &)
        -> bool = default;
};

// Equal shares, leftover slots to the lowest bins first.
// Throws error{slot_count_out_of_range} unless 256 <= S <= 256 * cap.
auto uniform_pattern(std::size_t total_slots = kDefaultSlots,
                     std::size_t cap = kDefaultCap) -> BinningPattern;

// Largest-remainder apportionment of the S - 256 extra slots in proportion
// to the prior's bin masses:
//   1. every bin gets one slot;
//   2. bin b's ideal share of the R = S - 256 extras is prior[b] / total * R
//      (R / 256 for an all-zero prior);
//   3. bin b gets min(floor(ideal), cap - 1) extras up front;
//   4. what is left goes out one slot at a time, walking bins in descending
//      fractional remainder (ties by ascending bin index) and skipping capped
//      bins, cycling until nothing is left.
// All arithmetic is exact integer arithmetic.
auto compute_binning_pattern(Histogram256 const &prior,
                             std::size_t total_slots = kDefaultSlots,
                             std::size_t cap = kDefaultCap) -> BinningPattern;

// Throws error{invalid_pattern} naming the first violated invariant:
// "count below 1", "count above cap", "slot total mismatch",
// "offsets not contiguous".
void validate_pattern(BinningPattern const &p);

// 256 lines of "bin offset count".
auto dump_pattern(BinningPattern const &p) -> std::string;

} // namespace streamhist
