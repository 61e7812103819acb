#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipfit/csv.hpp"
#include "ipfit/errors.hpp"

// Two-factor inverse-polynomial response models: reciprocal-basis linear
// predictor phi, mean 1/phi, analytic jacobian, and starting-value helpers.

namespace ipfit::ipm {

// Mean is treated as undefined when |phi| falls at or below this floor.
inline constexpr double kPhiMin = 1e-10;

enum class Variant { first_order_2f, second_order_2f_full, second_order_2f_reduced };

inline Variant variant_from_name(const std::string& name) {
  if (name == "ipm2-first") return Variant::first_order_2f;
  if (name == "ipm2-second") return Variant::second_order_2f_full;
  if (name == "ipm2-second-reduced") return Variant::second_order_2f_reduced;
  throw std::invalid_argument("unknown model '" + name +
                              "' (expected ipm2-first, ipm2-second, ipm2-second-reduced)");
}

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::first_order_2f: return "ipm2-first";
    case Variant::second_order_2f_full: return "ipm2-second";
    default: return "ipm2-second-reduced";
  }
}

struct Dataset {
  Eigen::VectorXd y, x1, x2;

  int n() const { return static_cast<int>(y.size()); }

  void validate() const {
    if (y.size() != x1.size() || y.size() != x2.size())
      throw std::invalid_argument("dataset: y, x1, x2 must share length");
    if (y.size() == 0) throw std::invalid_argument("dataset: empty");
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (!(x1(i) > 0.0) || !(x2(i) > 0.0))
        throw std::invalid_argument("dataset: row " + std::to_string(i + 1) +
                                    " has nonpositive regressor");
      if (!std::isfinite(y(i)) || !std::isfinite(x1(i)) || !std::isfinite(x2(i)))
        throw std::invalid_argument("dataset: row " + std::to_string(i + 1) +
                                    " has a non-finite value");
    }
  }
};

class ModelSpec {
 public:
  explicit ModelSpec(Variant v) : variant_(v) {
    switch (v) {
      case Variant::first_order_2f:
        names_ = {"beta11", "beta01", "beta10", "beta00"};
        break;
      case Variant::second_order_2f_full:
        names_ = {"beta11", "beta01", "beta10", "beta20", "beta02", "beta00"};
        break;
      case Variant::second_order_2f_reduced:
        names_ = {"beta11", "beta01", "beta10", "beta20", "beta00"};
        break;
    }
  }

  Variant variant() const { return variant_; }
  int param_count() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& param_names() const { return names_; }

  // Reciprocal-basis terms g_k(x1,x2), one per parameter in canonical order.
  Eigen::VectorXd basis(double x1, double x2) const {
    check_x(x1, x2);
    switch (variant_) {
      case Variant::first_order_2f: {
        Eigen::VectorXd g(4);
        g << 1.0, 1.0 / x1, 1.0 / x2, 1.0 / (x1 * x2);
        return g;
      }
      case Variant::second_order_2f_full: {
        Eigen::VectorXd g(6);
        g << 1.0, 1.0 / x1, 1.0 / x2, x1 / x2, x2 / x1, 1.0 / (x1 * x2);
        return g;
      }
      default: {
        Eigen::VectorXd g(5);
        g << 1.0, 1.0 / x1, 1.0 / x2, x1 / x2, 1.0 / (x1 * x2);
        return g;
      }
    }
  }

  // Linear predictor phi = theta' g(x).
  double phi(const Eigen::VectorXd& theta, double x1, double x2) const {
    check_theta(theta);
    return basis(x1, x2).dot(theta);
  }

  // Mean response 1/phi; point_index (when supplied) tags the error.
  double mean(const Eigen::VectorXd& theta, double x1, double x2,
              long point_index = -1) const {
    const double ph = phi(theta, x1, x2);
    if (!(std::abs(ph) > kPhiMin))
      throw NearSingularMeanError(
          "mean undefined: |phi| <= " + std::to_string(kPhiMin) +
              (point_index >= 0 ? " at data point " + std::to_string(point_index) : ""),
          point_index);
    return 1.0 / ph;
  }

  // d mean / d theta_k = -phi^-2 * g_k, including the intercept entry.
  Eigen::VectorXd jacobian_row(const Eigen::VectorXd& theta, double x1, double x2,
                               long point_index = -1) const {
    check_theta(theta);
    const Eigen::VectorXd g = basis(x1, x2);
    const double ph = g.dot(theta);
    if (!(std::abs(ph) > kPhiMin))
      throw NearSingularMeanError(
          "jacobian undefined: |phi| <= " + std::to_string(kPhiMin) +
              (point_index >= 0 ? " at data point " + std::to_string(point_index) : ""),
          point_index);
    return (-1.0 / (ph * ph)) * g;
  }

  // Transformed regression column values for the linearized start: the basis of
  // x1*x2*phi in theta order (x1*x2*g_k per term).
  Eigen::VectorXd transformed_basis(double x1, double x2) const {
    return (x1 * x2) * basis(x1, x2);
  }

 private:
  static void check_x(double x1, double x2) {
    if (!(x1 > 0.0) || !(x2 > 0.0))
      throw std::invalid_argument("model evaluation requires x1 > 0 and x2 > 0");
  }
  void check_theta(const Eigen::VectorXd& theta) const {
    if (theta.size() != param_count())
      throw std::invalid_argument("theta has " + std::to_string(theta.size()) +
                                  " entries, model needs " + std::to_string(param_count()));
  }

  Variant variant_;
  std::vector<std::string> names_;
};

// OLS of x1*x2/y on the transformed basis; exact on noiseless data because the
// transformed model is linear in theta.
inline Eigen::VectorXd linearized_start(const ModelSpec& spec, const Dataset& data) {
  data.validate();
  const int n = data.n();
  const int p = spec.param_count();
  if (n < p)
    throw std::invalid_argument("linearized_start: n=" + std::to_string(n) +
                                " < p=" + std::to_string(p));
  Eigen::VectorXd z(n);
  Eigen::MatrixXd T(n, p);
  for (int i = 0; i < n; ++i) {
    if (data.y(i) == 0.0)
      throw std::invalid_argument("linearized_start: y is zero at row " +
                                  std::to_string(i + 1));
    z(i) = data.x1(i) * data.x2(i) / data.y(i);
    T.row(i) = spec.transformed_basis(data.x1(i), data.x2(i)).transpose();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(T);
  if (qr.rank() < p)
    throw SingularStartError("linearized_start: transformed regressor matrix is rank " +
                             std::to_string(qr.rank()) + " < " + std::to_string(p));
  return qr.solve(z);
}

// Exhaustive SSE search over a Cartesian parameter grid. Ties go to the
// lexicographically smallest theta (the grid is walked in that order with
// strict improvement).
inline Eigen::VectorXd grid_start(const ModelSpec& spec, const Dataset& data,
                                  const std::vector<std::pair<double, double>>& bounds,
                                  int steps) {
  data.validate();
  const int p = spec.param_count();
  if (static_cast<int>(bounds.size()) != p)
    throw std::invalid_argument("grid_start: need one (lo,hi) bound per parameter");
  if (steps < 2) throw std::invalid_argument("grid_start: steps must be >= 2");
  for (const auto& [lo, hi] : bounds)
    if (!(lo < hi)) throw std::invalid_argument("grid_start: each bound needs lo < hi");

  std::vector<int> idx(static_cast<std::size_t>(p), 0);
  Eigen::VectorXd theta(p), best(p);
  double best_sse = std::numeric_limits<double>::infinity();
  bool any_feasible = false;
  bool done = false;
  while (!done) {
    for (int j = 0; j < p; ++j) {
      const auto& [lo, hi] = bounds[static_cast<std::size_t>(j)];
      theta(j) = lo + idx[static_cast<std::size_t>(j)] * (hi - lo) / (steps - 1);
    }
    double s = 0.0;
    bool feasible = true;
    for (int i = 0; i < data.n() && feasible; ++i) {
      try {
        const double r = data.y(i) - spec.mean(theta, data.x1(i), data.x2(i), i);
        s += r * r;
      } catch (const NearSingularMeanError&) {
        feasible = false;
      }
    }
    if (feasible && std::isfinite(s)) {
      any_feasible = true;
      if (s < best_sse) {
        best_sse = s;
        best = theta;
      }
    }
    // Odometer increment, last parameter fastest, so visitation order is
    // lexicographic ascending in theta.
    int j = p - 1;
    while (j >= 0 && ++idx[static_cast<std::size_t>(j)] == steps) {
      idx[static_cast<std::size_t>(j)] = 0;
      --j;
    }
    done = (j < 0);
  }
  if (!any_feasible)
    throw NoFeasibleStartError("grid_start: every grid point has a near-singular mean");
  return best;
}

// Dataset CSV reader; header must be exactly (y, x1, x2).
inline Dataset load_dataset(const std::string& path) {
  const csv::Table t = csv::read_table(path);
  if (t.header != std::vector<std::string>{"y", "x1", "x2"})
    throw std::invalid_argument("'" + path + "': header must be y,x1,x2");
  Dataset d;
  const int n = static_cast<int>(t.rows.size());
  if (n == 0) throw std::invalid_argument("'" + path + "': no data rows");
  d.y.resize(n);
  d.x1.resize(n);
  d.x2.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    const std::string ctx = "'" + path + "' line " + std::to_string(i + 2);
    if (row.size() != 3)
      throw std::invalid_argument(ctx + ": expected 3 fields, got " +
                                  std::to_string(row.size()));
    d.y(i) = csv::parse_double(row[0], ctx + " column y");
    d.x1(i) = csv::parse_double(row[1], ctx + " column x1");
    d.x2(i) = csv::parse_double(row[2], ctx + " column x2");
    if (!(d.x1(i) > 0.0) || !(d.x2(i) > 0.0))
      throw std::invalid_argument(ctx + ": x1 and x2 must be strictly positive");
  }
  return d;
}

}  // namespace ipfit::ipm
