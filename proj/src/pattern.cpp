#include "streamhist/pattern.hpp"

#include "streamhist/error.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace streamhist {

namespace {

using u128 = unsigned __int128;

void check_slot_range(std::size_t total_slots, std::size_t cap) {
    if (cap < 1 || total_slots < kBins || total_slots > kBins * cap) {
        throw error(errc::slot_count_out_of_range,
                    "S=" + std::to_string(total_slots) +
                        " cap=" + std::to_string(cap) +
                        " (need 256 <= S <= 256*cap)");
    }
}

void fill_offsets(BinningPattern &p) {
    std::uint32_t next = 0;
    for (std::size_t b = 0; b < kBins; ++b) {
        p.offset[b] = next;
        next += p.count[b];
    }
}

} // namespace

auto uniform_pattern(std::size_t total_slots, std::size_t cap)
    -> BinningPattern {
    check_slot_range(total_slots, cap);
    BinningPattern p;
    p.total_slots = total_slots;
    p.cap = cap;
    auto const base = total_slots / kBins;
    auto const leftover = total_slots % kBins;
    for (std::size_t b = 0; b < kBins; ++b) {
        p.count[b] = static_cast<std::uint32_t>(base + (b < leftover ? 1 : 0));
    }
    fill_offsets(p);
    return p;
}

auto compute_binning_pattern(Histogram256 const &prior,
                             std::size_t total_slots, std::size_t cap)
    -> BinningPattern {
    check_slot_range(total_slots, cap);

    u128 total = 0;
    for (auto const c : prior.counts) {
        total += c;
    }
    u128 const extras = total_slots - kBins;

    // ideal_b = numer_b / denom, kept as an exact rational.
    std::array<u128, kBins> numer{};
    u128 const denom = total == 0 ? u128{kBins} : total;
    for (std::size_t b = 0; b < kBins; ++b) {
        numer[b] = (total == 0 ? u128{1} : u128{prior.counts[b]}) * extras;
    }

    BinningPattern p;
    p.total_slots = total_slots;
    p.cap = cap;
    std::array<u128, kBins> remainder{};
    std::size_t left = total_slots - kBins;
    for (std::size_t b = 0; b < kBins; ++b) {
        auto const whole = numer[b] / denom;
        remainder[b] = numer[b] % denom;
        auto const extra = static_cast<std::size_t>(
            std::min<u128>(whole, u128{cap - 1}));
        p.count[b] = static_cast<std::uint32_t>(1 + extra);
        left -= extra;
    }

    std::array<std::size_t, kBins> order{};
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return remainder[a] > remainder[b];
                     });

    // S <= 256 * cap guarantees a non-capped bin exists while left > 0.
    while (left > 0) {
        for (auto const b : order) {
            if (left == 0) {
                break;
            }
            if (p.count[b] < cap) {
                ++p.count[b];
                --left;
            }
        }
    }

    fill_offsets(p);
    return p;
}

void validate_pattern(BinningPattern const &p) {
    for (std::size_t b = 0; b < kBins; ++b) {
        if (p.count[b] < 1) {
            throw error(errc::invalid_pattern,
                        "count below 1 (bin " + std::to_string(b) + ")");
        }
    }
    for (std::size_t b = 0; b < kBins; ++b) {
        if (p.count[b] > p.cap) {
            throw error(errc::invalid_pattern,
                        "count above cap (bin " + std::to_string(b) + ")");
        }
    }
    std::size_t sum = 0;
    for (auto const c : p.count) {
        sum += c;
    }
    if (sum != p.total_slots) {
        throw error(errc::invalid_pattern,
                    "slot total mismatch (" + std::to_string(sum) +
                        " != " + std::to_string(p.total_slots) + ")");
    }
    std::size_t expected = 0;
    for (std::size_t b = 0; b < kBins; ++b) {
        if (p.offset[b] != expected) {
            throw error(errc::invalid_pattern,
                        "offsets not contiguous (bin " + std::to_string(b) +
                            ")");
        }
        expected += p.count[b];
    }
}

auto dump_pattern(BinningPattern const &p) -> std::string {
    std::ostringstream out;
    for (std::size_t b = 0; b < kBins; ++b) {
        out << b << ' ' << p.offset[b] << ' ' << p.count[b] << '\n';
    }
    return out.str();
}

} // namespace streamhist
