#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ipfit/errors.hpp"
#include "ipfit/gauss_newton.hpp"
#include "ipfit/rng.hpp"
#include "ipfit/stats.hpp"

// Residual bootstrap on fixed regressors: resample residuals per replicate on
// a dedicated counter-based RNG stream, rebuild responses, refit, summarize.

namespace ipfit::bootstrap {

enum class CenterRule { bootstrap_mean, original_estimate };

inline CenterRule center_from_name(const std::string& name) {
  if (name == "bootstrap_mean") return CenterRule::bootstrap_mean;
  if (name == "original_estimate") return CenterRule::original_estimate;
  throw std::invalid_argument("unknown center rule '" + name + "'");
}

struct BootstrapConfig {
  int B = 1000;
  std::uint64_t seed = 0;
  double alpha_level = 0.05;
  CenterRule center = CenterRule::bootstrap_mean;
  double max_drop_frac = 0.05;

  void validate() const {
    if (B < 1) throw std::invalid_argument("bootstrap: B must be >= 1");
    if (!(alpha_level > 0.0 && alpha_level < 1.0))
      throw std::invalid_argument("bootstrap: alpha_level must be in (0,1)");
    if (!(max_drop_frac >= 0.0 && max_drop_frac <= 1.0))
      throw std::invalid_argument("bootstrap: max_drop_frac must be in [0,1]");
  }
};

struct BootstrapResult {
  Eigen::MatrixXd theta_star;          // B' x p, rows ordered by replicate index
  std::vector<int> replicate_index;    // 1-based b for each retained row
  int B = 0;
  int dropped = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd se;
  Eigen::MatrixXd ci_normal;      // p x 2
  Eigen::MatrixXd ci_percentile;  // p x 2
  Eigen::VectorXd theta_hat;        // original fit estimate
  Eigen::VectorXd theta_star_mean;  // replicate mean, reported alongside
  std::vector<std::string> param_names;
};

// n draws with replacement from the empirical residual set.
inline Eigen::VectorXd resample_residuals(const Eigen::VectorXd& residuals,
                                          rng::Stream& stream) {
  const auto n = residuals.size();
  if (n < 1) throw std::invalid_argument("resample_residuals: empty residual vector");
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out(i) = residuals(static_cast<Eigen::Index>(
        stream.next_index(static_cast<std::uint64_t>(n))));
  return out;
}

// Y* = fitted + e*; regressors stay fixed (designed data).
inline Eigen::VectorXd make_replicate(const gauss_newton::FitResult& fitted,
                                      const Eigen::VectorXd& e_star) {
  if (fitted.fitted.size() != e_star.size())
    throw std::invalid_argument("make_replicate: length mismatch");
  return fitted.fitted + e_star;
}

// Per parameter sqrt((1/B') sum (theta*_b - c)^2), c per the center rule.
inline Eigen::VectorXd standard_error(const Eigen::MatrixXd& theta_star, CenterRule center,
                                      const Eigen::VectorXd& theta_hat) {
  const auto bprime = theta_star.rows();
  if (bprime < 1) throw std::invalid_argument("standard_error: no replicates");
  Eigen::VectorXd out(theta_star.cols());
  for (Eigen::Index j = 0; j < theta_star.cols(); ++j) {
    const double c = center == CenterRule::bootstrap_mean ? theta_star.col(j).mean()
                                                          : theta_hat(j);
    double s = 0.0;
    for (Eigen::Index b = 0; b < bprime; ++b) {
      const double d = theta_star(b, j) - c;
      s += d * d;
    }
    out(j) = std::sqrt(s / static_cast<double>(bprime));
  }
  return out;
}

inline Eigen::MatrixXd ci_normal(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& se,
                                 double alpha_level) {
  if (!(alpha_level > 0.0 && alpha_level < 1.0))
    throw std::invalid_argument("ci_normal: alpha_level must be in (0,1)");
  if (se.minCoeff() < 0.0) throw std::invalid_argument("ci_normal: negative se");
  const double z = stats::normal_quantile(1.0 - alpha_level / 2.0);
  Eigen::MatrixXd ci(theta_hat.size(), 2);
  for (Eigen::Index j = 0; j < theta_hat.size(); ++j) {
    ci(j, 0) = theta_hat(j) - z * se(j);
    ci(j, 1) = theta_hat(j) + z * se(j);
  }
  return ci;
}

// Interpolated order-statistic quantiles at alpha/2 and 1-alpha/2 per column.
inline Eigen::MatrixXd ci_percentile(const Eigen::MatrixXd& theta_star, double alpha_level) {
  if (!(alpha_level > 0.0 && alpha_level < 1.0))
    throw std::invalid_argument("ci_percentile: alpha_level must be in (0,1)");
  if (theta_star.rows() < 1) throw std::invalid_argument("ci_percentile: no replicates");
  Eigen::MatrixXd ci(theta_star.cols(), 2);
  for (Eigen::Index j = 0; j < theta_star.cols(); ++j) {
    std::vector<double> col(theta_star.col(j).data(),
                            theta_star.col(j).data() + theta_star.rows());
    ci(j, 0) = stats::quantile(col, alpha_level / 2.0);
    ci(j, 1) = stats::quantile(std::move(col), 1.0 - alpha_level / 2.0);
  }
  return ci;
}

template <gauss_newton::ResponseModel M>
BootstrapResult run(const M& model, const ipm::Dataset& data,
                    const gauss_newton::FitResult& fitted,
                    const gauss_newton::SolverConfig& scfg, const BootstrapConfig& bcfg,
                    int threads = 1) {
  bcfg.validate();
  scfg.validate();
  if (!fitted.converged)
    throw std::invalid_argument("bootstrap: base fit did not converge");
  const int n = data.n();
  const int p = model.param_count();
  if (fitted.residuals.size() != n || fitted.fitted.size() != n)
    throw std::invalid_argument("bootstrap: fit does not match dataset");
  if (threads < 1) threads = 1;

  // Variance-corrected residual pool (factor sqrt(n/(n-p))).
  const double pool_scale = n > p ? std::sqrt(static_cast<double>(n) / (n - p)) : 1.0;
  const Eigen::VectorXd pool = pool_scale * fitted.residuals;

  std::vector<Eigen::VectorXd> slot(static_cast<std::size_t>(bcfg.B));
  std::vector<char> ok(static_cast<std::size_t>(bcfg.B), 0);
  std::vector<std::string> why(static_cast<std::size_t>(bcfg.B));

  std::atomic<int> cursor{0};
  const auto worker = [&]() {
    for (;;) {
      const int idx = cursor.fetch_add(1);
      if (idx >= bcfg.B) return;
      const int b = idx + 1;  // stream 0 is reserved for simulation noise
      rng::Stream stream(bcfg.seed, static_cast<std::uint64_t>(b));
      ipm::Dataset replicate{make_replicate(fitted, resample_residuals(pool, stream)),
                             data.x1, data.x2};
      try {
        gauss_newton::FitResult r =
            gauss_newton::fit(model, replicate, fitted.theta_hat, scfg);
        if (r.converged) {
          slot[static_cast<std::size_t>(idx)] = std::move(r.theta_hat);
          ok[static_cast<std::size_t>(idx)] = 1;
        } else {
          why[static_cast<std::size_t>(idx)] =
              r.diagnostic.empty() ? "did not converge" : r.diagnostic;
        }
      } catch (const std::exception& e) {
        why[static_cast<std::size_t>(idx)] = e.what();
      }
    }
  };

  if (threads == 1 || bcfg.B == 1) {
    worker();
  } else {
    std::vector<std::thread> team;
    const int nt = std::min(threads, bcfg.B);
    team.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) team.emplace_back(worker);
    for (auto& t : team) t.join();
  }

  BootstrapResult out;
  out.B = bcfg.B;
  out.seed = bcfg.seed;
  out.theta_hat = fitted.theta_hat;
  out.param_names = fitted.param_names;
  std::string first_why;
  int kept = 0;
  for (int idx = 0; idx < bcfg.B; ++idx)
    if (ok[static_cast<std::size_t>(idx)]) ++kept;
  out.theta_star.resize(kept, p);
  for (int idx = 0; idx < bcfg.B; ++idx) {
    if (ok[static_cast<std::size_t>(idx)]) {
      out.theta_star.row(out.replicate_index.size()) =
          slot[static_cast<std::size_t>(idx)].transpose();
      out.replicate_index.push_back(idx + 1);
    } else {
      ++out.dropped;
      if (first_why.empty()) first_why = why[static_cast<std::size_t>(idx)];
    }
  }
  if (kept == 0 ||
      static_cast<double>(out.dropped) / bcfg.B > bcfg.max_drop_frac)
    throw ExcessDropError("bootstrap: " + std::to_string(out.dropped) + " of " +
                              std::to_string(bcfg.B) +
                              " replicates failed to converge; first failure: " +
                              (first_why.empty() ? "(none recorded)" : first_why),
                          out.dropped, first_why);

  out.se = standard_error(out.theta_star, bcfg.center, fitted.theta_hat);
  out.ci_normal = ci_normal(fitted.theta_hat, out.se, bcfg.alpha_level);
  out.ci_percentile = ci_percentile(out.theta_star, bcfg.alpha_level);
  out.theta_star_mean = out.theta_star.colwise().mean();
  return out;
}

}  // namespace ipfit::bootstrap
