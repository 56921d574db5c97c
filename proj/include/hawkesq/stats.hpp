#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "hawkesq/errors.hpp"

namespace hawkesq {

/// A point estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;

  /// (value - target) / se; +-inf when se == 0 and the values differ.
  double z(double target) const {
    const double diff = value - target;
    if (se > 0.0) return diff / se;
    return diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff);
  }
};

inline Estimate sample_mean(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw ArgumentError("sample_mean: need at least two observations");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1) / n)};
}

/// Unbiased sample covariance. The standard error is the standard deviation of
/// the centred cross products divided by sqrt(n) (delta method, iid samples).
inline Estimate sample_covariance(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ArgumentError("sample_covariance: need two equal-length samples of size >= 2");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += (x[i] - mx) * (y[i] - my);
  const double cov = acc / (n - 1);
  const double mean_prod = acc / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (x[i] - mx) * (y[i] - my) - mean_prod;
    ss += d * d;
  }
  return {cov, std::sqrt(ss / (n - 1) / n)};
}

inline Estimate sample_variance(std::span<const double> x) { return sample_covariance(x, x); }

}  // namespace hawkesq
