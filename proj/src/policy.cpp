#include "streamhist/policy.hpp"

#include "streamhist/error.hpp"

#include <string>

namespace streamhist {

void validate_policy(SwitchPolicy const &policy) {
    if (!(policy.threshold > 0.0 && policy.threshold < 1.0)) {
        throw error(errc::invalid_config,
                    "threshold must lie strictly between 0 and 1, got " +
                        std::to_string(policy.threshold));
    }
}

auto degeneracy(Histogram256 const &h) -> DegeneracyReport {
    DegeneracyReport r;
    r.total = h.total();
    std::uint64_t best = 0;
    for (std::size_t b = 0; b < kBins; ++b) {
        if (h.counts[b] > best) {
            best = h.counts[b];
            r.argmax_bin = b;
        }
    }
    if (r.total > 0) {
        r.max_bin_fraction =
            static_cast<double>(best) / static_cast<double>(r.total);
    }
    return r;
}

auto select_kernel(DegeneracyReport const &report, SwitchPolicy const &policy)
    -> KernelKind {
    return report.max_bin_fraction >= policy.threshold ? KernelKind::Adaptive
                                                       : KernelKind::Naive;
}

auto divergence(Histogram256 const &a, Histogram256 const &b) -> double {
    auto const ta = a.total();
    auto const tb = b.total();
    if (ta == 0 || tb == 0) {
        throw error(errc::empty_histogram, "divergence needs non-empty inputs");
    }
    // Cross-multiplied so proportional histograms give exactly zero.
    using u128 = unsigned __int128;
    long double sum = 0.0L;
    for (std::size_t i = 0; i < kBins; ++i) {
        auto const x = u128{a.counts[i]} * tb;
        auto const y = u128{b.counts[i]} * ta;
        sum += static_cast<long double>(x > y ? x - y : y - x);
    }
    sum /= static_cast<long double>(ta) * static_cast<long double>(tb);
    auto const tv = static_cast<double>(sum / 2.0L);
    return tv > 1.0 ? 1.0 : tv;
}

} // namespace streamhist
