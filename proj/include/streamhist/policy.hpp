#pragma once

#include "streamhist/core_types.hpp"
#include "streamhist/kernels.hpp"

#include <cstddef>
#include <cstdint>

namespace streamhist {

struct DegeneracyReport {
    // max(counts) / total, or 0 for an empty histogram.
    double max_bin_fraction = 0.0;
    // Lowest bin index among the maxima.
    std::size_t argmax_bin = 0;
    std::uint64_t total = 0;
};

inline constexpr double kDefaultThreshold = 0.45;

struct SwitchPolicy {
    double threshold = kDefaultThreshold;
};

// Throws error{invalid_config} unless 0 < threshold < 1.
void validate_policy(SwitchPolicy const &policy);

auto degeneracy(Histogram256 const &h) -> DegeneracyReport;

// Adaptive iff max_bin_fraction >= threshold.
auto select_kernel(DegeneracyReport const &report, SwitchPolicy const &policy)
    -> KernelKind;

// Total-variation distance between the normalized histograms, in [0, 1].
// Throws error{empty_histogram} if either total is zero.
auto divergence(Histogram256 const &a, Histogram256 const &b) -> double;

} // namespace streamhist
