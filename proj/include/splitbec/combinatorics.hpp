#pragma once

#include <cmath>
#include <cstdint>

namespace splitbec {

// Exact while the result fits in 64 bits; every intermediate r * (n - k + i) stays
// below 2^64 for n <= 60.
inline constexpr int kExactBinomialLimit = 60;

inline double binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) return 0.0;
    if (k > n - k) k = n - k;
    if (n <= kExactBinomialLimit) {
        std::uint64_t r = 1;
        for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
        return static_cast<double>(r);
    }
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

inline double log_factorial(int n) { return std::lgamma(n + 1.0); }

} // namespace splitbec
