#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace degdiff {

/// Welford accumulator; merge() combines partial results in a fixed order.
class RunningStats {
public:
    void add(double x) noexcept;
    void merge(const RunningStats& other) noexcept;
    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept;  // unbiased
    double std_error() const noexcept;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Linearly interpolated sample quantile (Hyndman-Fan type 7), q in [0, 1].
double quantile(std::span<const double> values, double q);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_distance(std::span<const double> a, std::span<const double> b);

/// Least-squares slope of y against x.
double fit_slope(std::span<const double> x, std::span<const double> y);

}  // namespace degdiff
