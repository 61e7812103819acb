#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ipfit/errors.hpp"

// Two-level factorial / central composite designs in coded units, plus the
// classical property audits (orthogonality, rotatability, uniform precision)
// driven by the scaled prediction variance.

namespace ipfit::doe {

enum class RunType { factorial, axial, center };

inline const char* run_type_name(RunType t) {
  switch (t) {
    case RunType::factorial: return "factorial";
    case RunType::axial: return "axial";
    default: return "center";
  }
}

struct Run {
  std::vector<double> x;  // coded levels
  RunType type;
};

struct Design {
  int k = 0;
  std::vector<Run> runs;
  int n_f = 0, n_a = 0, n0 = 0;
  double alpha = 0.0;  // axial distance; 0 when the design has no axial points
  std::optional<std::vector<std::pair<double, double>>> factor_ranges;

  int total_runs() const { return static_cast<int>(runs.size()); }
};

enum class Order { first, second };

struct ModelMatrix {
  Eigen::MatrixXd X;
  std::vector<std::string> columns;
  Order order = Order::first;
  int k = 0;
};

// Sentinel selecting alpha = n_f^(1/4) in augment_ccd.
struct RotatableRule {};
inline constexpr RotatableRule rotatable_rule{};

inline Design generate_factorial(int k) {
  if (k < 1 || k > 12)
    throw std::invalid_argument("generate_factorial: k must be in [1,12], got " +
                                std::to_string(k));
  Design d;
  d.k = k;
  const int n = 1 << k;
  d.runs.reserve(n);
  for (int i = 0; i < n; ++i) {
    Run r;
    r.type = RunType::factorial;
    r.x.resize(k);
    // Factor 1 varies slowest: bit (k-1-j) of the run index drives factor j.
    for (int j = 0; j < k; ++j)
      r.x[j] = ((i >> (k - 1 - j)) & 1) ? 1.0 : -1.0;
    d.runs.push_back(std::move(r));
  }
  d.n_f = n;
  return d;
}

namespace detail {
inline bool is_pure_factorial(const Design& d) {
  if (d.n_a != 0 || d.n0 != 0) return false;
  for (const auto& r : d.runs) {
    if (r.type != RunType::factorial) return false;
    for (double v : r.x)
      if (v != 1.0 && v != -1.0) return false;
  }
  return d.n_f == d.total_runs();
}
}  // namespace detail

inline Design augment_ccd(const Design& base, int n0, double alpha) {
  if (!detail::is_pure_factorial(base))
    throw std::invalid_argument("augment_ccd: base must be a pure two-level factorial");
  if (n0 < 1) throw std::invalid_argument("augment_ccd: n0 must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("augment_ccd: alpha must be > 0");
  Design d = base;
  d.alpha = alpha;
  for (int j = 0; j < d.k; ++j) {
    for (double sign : {-1.0, 1.0}) {
      Run r;
      r.type = RunType::axial;
      r.x.assign(d.k, 0.0);
      r.x[j] = sign * alpha;
      d.runs.push_back(std::move(r));
    }
  }
  d.n_a = 2 * d.k;
  for (int i = 0; i < n0; ++i) {
    Run r;
    r.type = RunType::center;
    r.x.assign(d.k, 0.0);
    d.runs.push_back(std::move(r));
  }
  d.n0 = n0;
  return d;
}

inline double rotatable_alpha(int n_f) { return std::pow(static_cast<double>(n_f), 0.25); }

inline Design augment_ccd(const Design& base, int n0, RotatableRule) {
  return augment_ccd(base, n0, rotatable_alpha(base.n_f));
}

// Basis vector of the audit surface at a coded point, canonical column order:
// intercept, linear by factor, then squares by factor, then pairwise products
// in lexicographic pair order.
inline Eigen::VectorXd basis_vector(Order order, int k, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != k)
    throw std::invalid_argument("basis_vector: point dimension mismatch");
  const int p = (order == Order::first) ? k + 1 : 1 + 2 * k + k * (k - 1) / 2;
  Eigen::VectorXd f(p);
  int c = 0;
  f(c++) = 1.0;
  for (int j = 0; j < k; ++j) f(c++) = x[j];
  if (order == Order::second) {
    for (int j = 0; j < k; ++j) f(c++) = x[j] * x[j];
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) f(c++) = x[i] * x[j];
  }
  return f;
}

inline std::vector<std::string> basis_names(Order order, int k) {
  std::vector<std::string> names{"1"};
  for (int j = 1; j <= k; ++j) names.push_back("x" + std::to_string(j));
  if (order == Order::second) {
    for (int j = 1; j <= k; ++j) names.push_back("x" + std::to_string(j) + "^2");
    for (int i = 1; i <= k; ++i)
      for (int j = i + 1; j <= k; ++j)
        names.push_back("x" + std::to_string(i) + "*x" + std::to_string(j));
  }
  return names;
}

inline ModelMatrix model_matrix(const Design& d, Order order) {
  if (d.runs.empty()) throw std::invalid_argument("model_matrix: empty design");
  ModelMatrix m;
  m.order = order;
  m.k = d.k;
  m.columns = basis_names(order, d.k);
  const int p = static_cast<int>(m.columns.size());
  m.X.resize(d.total_runs(), p);
  for (int i = 0; i < d.total_runs(); ++i)
    m.X.row(i) = basis_vector(order, d.k, d.runs[i].x).transpose();
  return m;
}

struct OrthogonalityReport {
  bool orthogonal = false;
  double max_offdiag = 0.0;
};

inline OrthogonalityReport check_orthogonality(const ModelMatrix& m, double tol) {
  if (tol < 0.0) throw std::invalid_argument("check_orthogonality: tol must be >= 0");
  const Eigen::MatrixXd xtx = m.X.transpose() * m.X;
  double worst = 0.0;
  for (int i = 0; i < xtx.rows(); ++i)
    for (int j = 0; j < xtx.cols(); ++j)
      if (i != j) worst = std::max(worst, std::abs(xtx(i, j)));
  return {worst <= tol, worst};
}

namespace detail {
// Column-pivoted factorization of X'X with the 1e12 condition guard; returns
// the QR object ready for solves.
inline Eigen::ColPivHouseholderQR<Eigen::MatrixXd> factor_xtx(const ModelMatrix& m) {
  const Eigen::MatrixXd xtx = m.X.transpose() * m.X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtx);
  const Eigen::VectorXd rdiag = qr.matrixR().diagonal().cwiseAbs();
  const double top = rdiag.maxCoeff();
  const double bottom = rdiag.minCoeff();
  if (!(bottom > 0.0) || top / bottom > 1e12) {
    std::string cols;
    const auto perm = qr.colsPermutation().indices();
    for (int i = 0; i < rdiag.size(); ++i) {
      if (rdiag(i) <= top / 1e12) {
        if (!cols.empty()) cols += ", ";
        cols += m.columns[static_cast<std::size_t>(perm(i))];
      }
    }
    throw SingularDesignError("singular model matrix cross-product; dependent columns: " +
                              (cols.empty() ? std::string("(unresolved)") : cols));
  }
  return qr;
}
}  // namespace detail

// N * f(x)' (X'X)^-1 f(x) at a coded point.
inline double scaled_prediction_variance(const ModelMatrix& m, const std::vector<double>& x) {
  const auto qr = detail::factor_xtx(m);
  const Eigen::VectorXd f = basis_vector(m.order, m.k, x);
  return static_cast<double>(m.X.rows()) * f.dot(qr.solve(f));
}

namespace detail {
// Deterministic equidistant probes: angular grid for k=2, Fibonacci sphere for k=3.
inline std::vector<std::vector<double>> sphere_probes(int k, double radius, int n_probe) {
  std::vector<std::vector<double>> pts;
  pts.reserve(static_cast<std::size_t>(n_probe));
  constexpr double two_pi = 6.283185307179586476925286766559;
  if (k == 2) {
    for (int i = 0; i < n_probe; ++i) {
      const double t = two_pi * i / n_probe;
      pts.push_back({radius * std::cos(t), radius * std::sin(t)});
    }
  } else {
    constexpr double golden_angle = 2.3999632297286533222;
    for (int i = 0; i < n_probe; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / n_probe;
      const double r_xy = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double t = golden_angle * i;
      pts.push_back({radius * r_xy * std::cos(t), radius * r_xy * std::sin(t), radius * z});
    }
  }
  return pts;
}
}  // namespace detail

struct RotatabilityReport {
  bool rotatable = false;
  double spread = 0.0;
};

inline RotatabilityReport check_rotatability(const ModelMatrix& m, double radius,
                                             int n_probe, double tol) {
  if (m.k != 2 && m.k != 3)
    throw std::invalid_argument("check_rotatability: probe generation supports k=2 or 3");
  if (n_probe < 8) throw std::invalid_argument("check_rotatability: n_probe must be >= 8");
  if (radius < 0.0) throw std::invalid_argument("check_rotatability: radius must be >= 0");
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& x : detail::sphere_probes(m.k, radius, n_probe)) {
    const double v = scaled_prediction_variance(m, x);
    if (first) {
      lo = hi = v;
      first = false;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double spread = hi - lo;
  return {spread <= tol, spread};
}

struct UniformPrecisionReport {
  bool uniform = false;
  double v_origin = 0.0;
  double v_unit = 0.0;
  // Set when the design is not rotatable at radius 1, in which case v_unit is
  // the axis-point value and direction-dependent.
  bool warning = false;
};

inline UniformPrecisionReport check_uniform_precision(const ModelMatrix& m, double tol) {
  UniformPrecisionReport rep;
  const auto rot = check_rotatability(m, 1.0, 64, 1e-8);
  rep.warning = !rot.rotatable;
  std::vector<double> origin(static_cast<std::size_t>(m.k), 0.0);
  std::vector<double> axis(static_cast<std::size_t>(m.k), 0.0);
  axis[0] = 1.0;
  rep.v_origin = scaled_prediction_variance(m, origin);
  rep.v_unit = scaled_prediction_variance(m, axis);
  rep.uniform = std::abs(rep.v_origin - rep.v_unit) <= tol;
  return rep;
}

// Coded -> natural units: center + coded * half-range, per factor.
inline std::vector<std::vector<double>> decode(const Design& d) {
  if (!d.factor_ranges)
    throw std::invalid_argument("decode: design has no factor_ranges");
  const auto& ranges = *d.factor_ranges;
  if (static_cast<int>(ranges.size()) != d.k)
    throw std::invalid_argument("decode: factor_ranges size mismatch");
  for (const auto& [lo, hi] : ranges)
    if (!(lo < hi)) throw std::invalid_argument("decode: each range needs low < high");
  std::vector<std::vector<double>> out;
  out.reserve(d.runs.size());
  for (const auto& r : d.runs) {
    std::vector<double> row(static_cast<std::size_t>(d.k));
    for (int j = 0; j < d.k; ++j) {
      const double mid = 0.5 * (ranges[j].first + ranges[j].second);
      const double half = 0.5 * (ranges[j].second - ranges[j].first);
      row[static_cast<std::size_t>(j)] = mid + r.x[static_cast<std::size_t>(j)] * half;
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace ipfit::doe
