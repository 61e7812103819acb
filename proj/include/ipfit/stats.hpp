#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

// Small statistical helpers shared by the bootstrap and diagnostics layers.

namespace ipfit::stats {

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

// Inverse standard normal CDF by bisection on normal_cdf; absolute error in z
// is below 1e-12 on (0,1), far inside the 1e-8 contract.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile: p must be in (0,1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -normal_quantile(1.0 - p);
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Interpolated quantile of a sample (linear interpolation between order
// statistics at position 1 + (m-1)q, 1-based). Input need not be sorted.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("quantile: q must be in [0,1]");
  std::sort(v.begin(), v.end());
  const double pos = 1.0 + (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(pos) - 1;
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - std::floor(pos);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population standard deviation (divisor n).
inline double sd_population(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Pearson correlation; defined as 0 when either side has (numerically) zero
// variance. The guard is relative to the sample scale: rounding in the mean of
// a constant sample leaves a sum of squares near eps^2 * scale^2, not zero.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("pearson: size mismatch or empty");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  double scale_x = 0.0, scale_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    scale_x = std::max(scale_x, std::abs(x[i]));
    scale_y = std::max(scale_y, std::abs(y[i]));
  }
  const double n = static_cast<double>(x.size());
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor_x = n * (4.0 * eps * scale_x) * (4.0 * eps * scale_x);
  const double floor_y = n * (4.0 * eps * scale_y) * (4.0 * eps * scale_y);
  if (sxx <= floor_x || syy <= floor_y) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ipfit::stats
