#pragma once

// Shared fixtures for the test suites: the canonical 13-run rotatable CCD in
// natural units and synthetic datasets generated from known parameters.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "ipfit/doe.hpp"
#include "ipfit/ipm.hpp"
#include "ipfit/rng.hpp"

namespace support {

// Mean linear in theta: a single Gauss-Newton step solves the problem exactly,
// which makes this model a convenient closed-form oracle.
struct LinearModel {
  int param_count() const { return 2; }
  double mean(const Eigen::VectorXd& th, double x1, double x2, long = -1) const {
    return th(0) * x1 + th(1) * x2;
  }
  Eigen::VectorXd jacobian_row(const Eigen::VectorXd&, double x1, double x2,
                               long = -1) const {
    Eigen::VectorXd g(2);
    g << x1, x2;
    return g;
  }
};

inline ipfit::ipm::Dataset linear_data(unsigned seed, int n = 30) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> ux(1.0, 5.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  ipfit::ipm::Dataset d;
  d.y.resize(n);
  d.x1.resize(n);
  d.x2.resize(n);
  for (int i = 0; i < n; ++i) {
    d.x1(i) = ux(gen);
    d.x2(i) = ux(gen);
    d.y(i) = 2.0 * d.x1(i) - 3.0 * d.x2(i) + noise(gen);
  }
  return d;
}

// Ordinary least squares for LinearModel via the 2x2 normal equations, written
// out longhand so it shares no code path with the solver.
inline Eigen::VectorXd ols_2x2(const ipfit::ipm::Dataset& d) {
  long double a = 0, b = 0, c = 0, u = 0, v = 0;
  for (int i = 0; i < d.n(); ++i) {
    a += static_cast<long double>(d.x1(i)) * d.x1(i);
    b += static_cast<long double>(d.x1(i)) * d.x2(i);
    c += static_cast<long double>(d.x2(i)) * d.x2(i);
    u += static_cast<long double>(d.x1(i)) * d.y(i);
    v += static_cast<long double>(d.x2(i)) * d.y(i);
  }
  const long double det = a * c - b * b;
  Eigen::VectorXd th(2);
  th(0) = static_cast<double>((c * u - b * v) / det);
  th(1) = static_cast<double>((a * v - b * u) / det);
  return th;
}

// Same closed form for an arbitrary response vector on the fixed regressors.
inline Eigen::VectorXd ols_2x2(const ipfit::ipm::Dataset& d, const Eigen::VectorXd& y) {
  ipfit::ipm::Dataset tmp = d;
  tmp.y = y;
  return ols_2x2(tmp);
}

// Natural bounds chosen so the rotatable axial points land exactly on 1 and 10
// (every decoded level stays strictly positive).
inline std::pair<double, double> natural_range() {
  const double half = 4.5 / std::sqrt(2.0);
  return {5.5 - half, 5.5 + half};
}

// Decoded runs of the rotatable k=2 CCD with n0 center points.
inline std::vector<std::pair<double, double>> ccd_points(int n0 = 5) {
  auto d = ipfit::doe::augment_ccd(ipfit::doe::generate_factorial(2), n0,
                                   ipfit::doe::rotatable_rule);
  d.factor_ranges = {{natural_range(), natural_range()}};
  const auto nat = ipfit::doe::decode(d);
  std::vector<std::pair<double, double>> pts;
  pts.reserve(nat.size());
  for (const auto& row : nat) pts.emplace_back(row[0], row[1]);
  return pts;
}

// The reference second-order parameter vector used across the suites.
inline Eigen::VectorXd theta_star_full() {
  Eigen::VectorXd t(6);
  t << 0.35, -0.01, -0.22, 0.20, 0.05, 0.01;
  return t;
}

// Dataset with y = mean(theta) + sigma * z, z drawn from stream 0 of the seed.
inline ipfit::ipm::Dataset synth_dataset(const ipfit::ipm::ModelSpec& spec,
                                         const Eigen::VectorXd& theta, double sigma,
                                         std::uint64_t seed, int n0 = 5) {
  const auto pts = ccd_points(n0);
  const int n = static_cast<int>(pts.size());
  ipfit::ipm::Dataset d;
  d.y.resize(n);
  d.x1.resize(n);
  d.x2.resize(n);
  ipfit::rng::Stream noise(seed, 0);
  for (int i = 0; i < n; ++i) {
    d.x1(i) = pts[static_cast<std::size_t>(i)].first;
    d.x2(i) = pts[static_cast<std::size_t>(i)].second;
    d.y(i) = spec.mean(theta, d.x1(i), d.x2(i)) + sigma * noise.next_normal();
  }
  return d;
}

inline ipfit::ipm::Dataset noiseless_dataset(const ipfit::ipm::ModelSpec& spec,
                                             const Eigen::VectorXd& theta, int n0 = 5) {
  return synth_dataset(spec, theta, 0.0, 0, n0);
}

}  // namespace support
