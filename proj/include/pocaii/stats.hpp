#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace pocaii {

inline constexpr double kInvSqrt2Pi = 0.3989422804014327;

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double mean_of(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean_of: empty input");
    double s = 0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

//! sample variance (n-1 denominator); 0 for a single point
inline double sample_variance(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("sample_variance: empty input");
    if (xs.size() == 1) return 0.0;
    const double m = mean_of(xs);
    double s = 0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

inline double sample_stddev(std::span<const double> xs) { return std::sqrt(sample_variance(xs)); }

//! upper tail P[Bin(n, 1/2) >= wins], exact
inline double binomial_sign_test_p(int wins, int n) {
    if (n <= 0) return 1.0;
    if (wins <= 0) return 1.0;
    double p = 0.0;
    const double loghalf = -std::log(2.0) * n;
    for (int k = wins; k <= n; ++k) {
        const double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        p += std::exp(logc + loghalf);
    }
    return p < 1.0 ? p : 1.0;
}

}  // namespace pocaii
