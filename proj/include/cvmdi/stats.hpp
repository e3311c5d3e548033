#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>

#include <boost/math/special_functions/erf.hpp>

#include "cvmdi/error.hpp"

namespace cvmdi::stats {

/// Running count/mean/M2; merge() combines partial accumulators (Chan et al.).
class Moments {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }

    void merge(const Moments& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
        const double d = o.mean_ - mean_;
        const double n = na + nb;
        mean_ += d * nb / n;
        m2_ += o.m2_ + d * d * na * nb / n;
        n_ += o.n_;
    }

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    /// Unbiased sample variance; 0 for fewer than two samples.
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Population covariance (1/n normalization).
inline double covariance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw DomainError("covariance: lengths must match and be non-zero");
    const double ma = mean(a), mb = mean(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size());
}

inline double variance(std::span<const double> a) { return covariance(a, a); }

inline double correlation(std::span<const double> a, std::span<const double> b) {
    const double va = variance(a), vb = variance(b);
    if (!(va > 0.0 && vb > 0.0)) throw DomainError("correlation: zero variance");
    return covariance(a, b) / std::sqrt(va * vb);
}

/// Upper-tail standard-normal quantile: P(Z > z) = eps.
inline double normal_upper_quantile(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("normal_upper_quantile: eps must be in (0, 1)");
    return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * eps);
}

}  // namespace cvmdi::stats
