#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipfit/errors.hpp"
#include "ipfit/ipm.hpp"

// Damped Gauss-Newton least squares: linearize the mean, solve the normal
// equations through an orthogonal decomposition of the jacobian, halve
// rejected steps, and re-verify the optimum by refit + multistart.

namespace ipfit::gauss_newton {

// Any mean-function model with an analytic jacobian row per observation.
template <typename M>
concept ResponseModel = requires(const M& m, const Eigen::VectorXd& th, double a, double b,
                                 long i) {
  { m.param_count() } -> std::convertible_to<int>;
  { m.mean(th, a, b, i) } -> std::convertible_to<double>;
  { m.jacobian_row(th, a, b, i) } -> std::convertible_to<Eigen::VectorXd>;
};

struct SolverConfig {
  double delta = 1e-8;         // relative parameter-change tolerance
  double sse_rel_tol = 1e-12;  // relative SSE-change tolerance
  int max_iter = 100;
  int max_halvings = 30;
  bool restart_on_stall = false;

  void validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("solver: delta must be > 0");
    if (sse_rel_tol < 0.0) throw std::invalid_argument("solver: sse_rel_tol must be >= 0");
    if (max_iter < 1) throw std::invalid_argument("solver: max_iter must be >= 1");
    if (max_halvings < 0) throw std::invalid_argument("solver: max_halvings must be >= 0");
  }
};

struct FitResult {
  Eigen::VectorXd theta_hat;
  double sse = 0.0;
  std::vector<double> sse_trace;  // initial SSE then one entry per accepted step
  int iterations = 0;
  bool converged = false;
  std::string criterion = "none";  // "param", "sse", or "none"
  std::string diagnostic;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd residuals, fitted;
  std::vector<std::string> param_names;

  int accepted_steps() const { return static_cast<int>(sse_trace.size()) - 1; }
};

struct GnStep {
  Eigen::VectorXd beta_hat;
  double predicted_sse = 0.0;
};

// Denominator floor for relative parameter changes.
inline constexpr double kThetaFloor = 1e-8;

inline double max_relative_change(const Eigen::VectorXd& theta, const Eigen::VectorXd& beta) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k)
    worst = std::max(worst, std::abs(beta(k)) / std::max(std::abs(theta(k)), kThetaFloor));
  return worst;
}

template <ResponseModel M>
double sse(const M& model, const Eigen::VectorXd& theta, const ipm::Dataset& data) {
  double s = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const double r = data.y(i) - model.mean(theta, data.x1(i), data.x2(i), i);
    s += r * r;
  }
  return s;
}

namespace detail {

template <ResponseModel M>
void fill_linearization(const M& model, const Eigen::VectorXd& theta,
                        const ipm::Dataset& data, Eigen::MatrixXd& psi,
                        Eigen::VectorXd& resid) {
  const int n = data.n();
  const int p = model.param_count();
  psi.resize(n, p);
  resid.resize(n);
  for (int i = 0; i < n; ++i) {
    psi.row(i) = Eigen::VectorXd(model.jacobian_row(theta, data.x1(i), data.x2(i), i))
                     .transpose();
    resid(i) = data.y(i) - model.mean(theta, data.x1(i), data.x2(i), i);
  }
}

inline std::vector<std::string> default_names(int p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (int k = 1; k <= p; ++k) names.push_back("theta" + std::to_string(k));
  return names;
}

template <typename M>
std::vector<std::string> model_param_names(const M& model) {
  if constexpr (requires { model.param_names(); }) {
    return model.param_names();
  } else {
    return default_names(model.param_count());
  }
}

}  // namespace detail

// One linearized least-squares step: solve min ||psi*beta - (y - f)|| by
// column-pivoted QR of psi. Conditioning is estimated from the extreme |R|
// diagonal ratio; > 1e6 on psi means > 1e12 on psi'psi.
template <ResponseModel M>
GnStep gn_step(const M& model, const Eigen::VectorXd& theta, const ipm::Dataset& data) {
  Eigen::MatrixXd psi;
  Eigen::VectorXd resid;
  detail::fill_linearization(model, theta, data, psi, resid);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(psi);
  const Eigen::VectorXd rdiag = qr.matrixR()
                                    .topRows(std::min(psi.rows(), psi.cols()))
                                    .diagonal()
                                    .cwiseAbs();
  const double top = rdiag.maxCoeff();
  const double bottom = psi.rows() < psi.cols() ? 0.0 : rdiag.minCoeff();
  if (!(bottom > 0.0) || top / bottom > 1e6)
    throw SingularJacobianError(
        "jacobian too ill-conditioned for a step (condition estimate " +
        std::string(bottom > 0.0 ? std::to_string(top / bottom) : "inf") + ")");
  GnStep step;
  step.beta_hat = qr.solve(resid);
  step.predicted_sse = (resid - psi * step.beta_hat).squaredNorm();
  return step;
}

template <ResponseModel M>
FitResult fit(const M& model, const ipm::Dataset& data, Eigen::VectorXd start,
              const SolverConfig& cfg) {
  cfg.validate();
  data.validate();
  const int p = model.param_count();
  if (data.n() < p)
    throw std::invalid_argument("fit: n=" + std::to_string(data.n()) +
                                " observations < p=" + std::to_string(p) + " parameters");
  if (start.size() != p) throw std::invalid_argument("fit: start has wrong dimension");

  FitResult out;
  out.param_names = detail::model_param_names(model);

  Eigen::VectorXd theta = std::move(start);
  double s = sse(model, theta, data);  // start must be evaluable
  out.sse_trace.push_back(s);

  const auto try_sse = [&](const Eigen::VectorXd& th) -> std::optional<double> {
    try {
      const double v = sse(model, th, data);
      if (!std::isfinite(v)) return std::nullopt;
      return v;
    } catch (const NearSingularMeanError&) {
      return std::nullopt;
    }
  };

  bool restarted = false;
  int iter = 0;
  while (iter < cfg.max_iter) {
    ++iter;
    GnStep step;
    bool have_step = true;
    std::string stall_reason;
    try {
      step = gn_step(model, theta, data);
    } catch (const SingularJacobianError& e) {
      have_step = false;
      stall_reason = e.what();
    }

    if (have_step) {
      if (max_relative_change(theta, step.beta_hat) < cfg.delta) {
        out.converged = true;
        out.criterion = "param";
        break;
      }
      double scale = 1.0;
      bool accepted = false;
      for (int h = 0; h <= cfg.max_halvings && !accepted; ++h) {
        const Eigen::VectorXd cand = theta + scale * step.beta_hat;
        if (const auto sc = try_sse(cand); sc && *sc <= s) {
          const double rel = (s - *sc) / std::max(s, std::numeric_limits<double>::min());
          theta = cand;
          s = *sc;
          out.sse_trace.push_back(s);
          accepted = true;
          if (rel < cfg.sse_rel_tol) {
            out.converged = true;
            out.criterion = "sse";
          }
        }
        scale *= 0.5;
      }
      if (accepted) {
        if (out.converged) break;
        continue;
      }
      stall_reason = "damping exhausted after " + std::to_string(cfg.max_halvings) +
                     " halvings at iteration " + std::to_string(iter);
    }

    // Stalled: optionally restart once from a coarse grid around theta, but
    // only onto a strictly better point so the trace stays nonincreasing.
    if (cfg.restart_on_stall && !restarted) {
      restarted = true;
      if constexpr (std::is_same_v<M, ipm::ModelSpec>) {
        std::vector<std::pair<double, double>> bounds;
        bounds.reserve(static_cast<std::size_t>(p));
        for (int k = 0; k < p; ++k) {
          const double w = std::max(1.0, 2.0 * std::abs(theta(k)));
          bounds.emplace_back(theta(k) - w, theta(k) + w);
        }
        try {
          const Eigen::VectorXd cand = ipm::grid_start(model, data, bounds, 3);
          if (const auto sc = try_sse(cand); sc && *sc < s) {
            theta = cand;
            s = *sc;
            out.sse_trace.push_back(s);
            continue;
          }
        } catch (const NoFeasibleStartError&) {
        }
      }
    }
    out.diagnostic = stall_reason;
    break;
  }

  out.iterations = iter;
  if (!out.converged && out.diagnostic.empty() && iter == cfg.max_iter)
    out.diagnostic = "iteration cap reached";
  out.theta_hat = theta;
  out.sse = s;
  detail::fill_linearization(model, theta, data, out.jacobian, out.residuals);
  out.fitted = data.y - out.residuals;
  return out;
}

struct GlobalCheck {
  bool stable = false;
  bool refit_agrees = false;
  FitResult refit;
  FitResult multistart_best;
};

// Refit from theta_hat (agreement within 10*delta) and multistart from a base
// start with +/-20% single-parameter perturbations (2p+1 starts, in order).
template <ResponseModel M>
GlobalCheck verify_global(const M& model, const ipm::Dataset& data, const FitResult& fitted,
                          const SolverConfig& cfg, const Eigen::VectorXd& base_start) {
  GlobalCheck chk;
  chk.refit = fit(model, data, fitted.theta_hat, cfg);
  double agree = 0.0;
  for (Eigen::Index k = 0; k < fitted.theta_hat.size(); ++k)
    agree = std::max(agree, std::abs(chk.refit.theta_hat(k) - fitted.theta_hat(k)) /
                                std::max(std::abs(fitted.theta_hat(k)), kThetaFloor));
  chk.refit_agrees = agree <= 10.0 * cfg.delta;

  const int p = model.param_count();
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(base_start);
  for (int k = 0; k < p; ++k) {
    for (double f : {1.2, 0.8}) {
      Eigen::VectorXd s = base_start;
      s(k) *= f;
      starts.push_back(std::move(s));
    }
  }
  bool have_best = false;
  for (const auto& s : starts) {
    try {
      FitResult r = fit(model, data, s, cfg);
      if (!have_best || r.sse < chk.multistart_best.sse) {
        chk.multistart_best = std::move(r);
        have_best = true;
      }
    } catch (const NearSingularMeanError&) {
      // infeasible start, skip
    }
  }
  if (!have_best) chk.multistart_best = chk.refit;

  // "Beaten" needs both a relative margin and an absolute one scaled to the
  // data (eps * sum y^2, the natural SSE unit); otherwise two fits that both
  // reach machine-zero SSE would compare as meaningfully different.
  const double gain = fitted.sse - chk.multistart_best.sse;
  const bool beaten =
      gain > cfg.sse_rel_tol * std::max(fitted.sse, std::numeric_limits<double>::min()) &&
      gain > std::numeric_limits<double>::epsilon() * data.y.squaredNorm();
  chk.stable = chk.refit_agrees && !beaten;
  return chk;
}

inline GlobalCheck verify_global(const ipm::ModelSpec& model, const ipm::Dataset& data,
                                 const FitResult& fitted, const SolverConfig& cfg) {
  Eigen::VectorXd base;
  try {
    base = ipm::linearized_start(model, data);
  } catch (const std::exception&) {
    base = fitted.theta_hat;
  }
  return verify_global(model, data, fitted, cfg, base);
}

}  // namespace ipfit::gauss_newton
