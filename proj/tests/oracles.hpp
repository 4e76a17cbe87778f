#pragma once

// Brute-force reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracles {

/// U of the first sample, counting pairs directly (ties count one half).
inline double pairwise_u(const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0;
    for (double a : x)
        for (double b : y) u += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    return u;
}

inline double two_sided(std::int64_t le, std::int64_t ge, std::int64_t total) {
    return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

/// Exact two-sided p for U by walking every labeling of ranks 1..n1+n2.
inline double mann_whitney_enumerated_p(int n1, int n2, double u_obs) {
    const int n = n1 + n2;
    std::int64_t le = 0, ge = 0, total = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != n1) continue;
        double r1 = 0;
        for (int i = 0; i < n; ++i)
            if (mask >> i & 1u) r1 += i + 1;
        const double u = r1 - n1 * (n1 + 1) / 2.0;
        ++total;
        le += u <= u_obs;
        ge += u >= u_obs;
    }
    return two_sided(le, ge, total);
}

/// Exact two-sided p for V by walking all 2^n sign patterns of ranks 1..n.
inline double wilcoxon_enumerated_p(int n, double v_obs) {
    std::int64_t le = 0, ge = 0, total = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double v = 0;
        for (int i = 0; i < n; ++i)
            if (mask >> i & 1u) v += i + 1;
        ++total;
        le += v <= v_obs;
        ge += v >= v_obs;
    }
    return two_sided(le, ge, total);
}

/// N (ad - bc)^2 / (r1 r2 c1 c2), optionally with the continuity correction.
inline double chi_square_hand(double a, double b, double c, double d, bool yates) {
    const double n = a + b + c + d;
    double diff = std::abs(a * d - b * c);
    if (yates) diff = std::max(0.0, diff - n / 2.0);
    return n * diff * diff / ((a + b) * (c + d) * (a + c) * (b + d));
}

}  // namespace oracles
