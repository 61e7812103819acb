// ipfit: generate response-surface designs, fit two-factor inverse-polynomial
// models by damped Gauss-Newton, bootstrap the fit, and emit diagnostics.
//
// Exit codes: 0 ok, 2 validation, 3 unstable fit, 4 non-convergence,
// 5 excess bootstrap drops.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ipfit/bootstrap.hpp"
#include "ipfit/diagnostics.hpp"
#include "ipfit/doe.hpp"
#include "ipfit/errors.hpp"
#include "ipfit/gauss_newton.hpp"
#include "ipfit/io.hpp"
#include "ipfit/ipm.hpp"
#include "ipfit/rng.hpp"

namespace {

using ipfit::io::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitUnstable = 3;
constexpr int kExitNoConvergence = 4;
constexpr int kExitExcessDrops = 5;

int threads_from_env() {
  const char* v = std::getenv("IPFIT_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1)
    throw std::invalid_argument("IPFIT_THREADS must be a positive integer, got '" +
                                std::string(v) + "'");
  return static_cast<int>(n);
}

std::vector<std::pair<double, double>> parse_ranges(const std::string& text, int k) {
  std::vector<std::pair<double, double>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("--ranges items must look like lo:hi, got '" + item + "'");
    out.emplace_back(ipfit::csv::parse_double(item.substr(0, colon), "--ranges low"),
                     ipfit::csv::parse_double(item.substr(colon + 1), "--ranges high"));
  }
  if (static_cast<int>(out.size()) != k)
    throw std::invalid_argument("--ranges needs exactly " + std::to_string(k) +
                                " lo:hi pairs");
  return out;
}

std::vector<double> parse_theta(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(ipfit::csv::parse_double(item, "--theta"));
  if (out.empty()) throw std::invalid_argument("--theta must list parameter values");
  return out;
}

ipfit::doe::Design build_design(int k, int n0, const std::string& alpha_text,
                                const std::optional<std::string>& ranges_text) {
  auto base = ipfit::doe::generate_factorial(k);
  ipfit::doe::Design d =
      alpha_text == "rotatable"
          ? ipfit::doe::augment_ccd(base, n0, ipfit::doe::rotatable_rule)
          : ipfit::doe::augment_ccd(
                base, n0, ipfit::csv::parse_double(alpha_text, "--alpha"));
  if (ranges_text) d.factor_ranges = parse_ranges(*ranges_text, k);
  return d;
}

// ---- run configuration (JSON file overridden by flags) ----

struct RunConfig {
  std::string model = "ipm2-second";
  std::string data;
  std::string output_dir = ".";
  bool emit_plots = false;
  ipfit::gauss_newton::SolverConfig solver;
  ipfit::bootstrap::BootstrapConfig bootstrap;
};

struct RunFlags {
  std::optional<std::string> config_path, model, data, output_dir, center;
  std::optional<double> delta, sse_rel_tol, alpha_level, max_drop_frac;
  std::optional<int> max_iter, max_halvings, B;
  std::optional<std::uint64_t> seed;
  std::optional<bool> restart_on_stall, emit_plots;
};

void expect_keys(const json& obj, const std::vector<std::string>& allowed,
                 const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const auto& a : allowed) known = known || key == a;
    if (!known)
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
  }
}

RunConfig load_config(const RunFlags& f) {
  RunConfig cfg;
  if (f.config_path) {
    const json doc = ipfit::io::read_json(*f.config_path);
    expect_keys(doc, {"model", "data", "output_dir", "emit_plots", "solver", "bootstrap"},
                "top level");
    if (doc.contains("model")) cfg.model = doc.at("model").get<std::string>();
    if (doc.contains("data")) cfg.data = doc.at("data").get<std::string>();
    if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
    if (doc.contains("emit_plots")) cfg.emit_plots = doc.at("emit_plots").get<bool>();
    if (doc.contains("solver")) {
      const json& s = doc.at("solver");
      expect_keys(s, {"delta", "sse_rel_tol", "max_iter", "max_halvings", "restart_on_stall"},
                  "solver");
      if (s.contains("delta")) cfg.solver.delta = s.at("delta").get<double>();
      if (s.contains("sse_rel_tol")) cfg.solver.sse_rel_tol = s.at("sse_rel_tol").get<double>();
      if (s.contains("max_iter")) cfg.solver.max_iter = s.at("max_iter").get<int>();
      if (s.contains("max_halvings")) cfg.solver.max_halvings = s.at("max_halvings").get<int>();
      if (s.contains("restart_on_stall"))
        cfg.solver.restart_on_stall = s.at("restart_on_stall").get<bool>();
    }
    if (doc.contains("bootstrap")) {
      const json& b = doc.at("bootstrap");
      expect_keys(b, {"B", "seed", "alpha_level", "center", "max_drop_frac"}, "bootstrap");
      if (b.contains("B")) cfg.bootstrap.B = b.at("B").get<int>();
      if (b.contains("seed")) cfg.bootstrap.seed = b.at("seed").get<std::uint64_t>();
      if (b.contains("alpha_level"))
        cfg.bootstrap.alpha_level = b.at("alpha_level").get<double>();
      if (b.contains("center"))
        cfg.bootstrap.center =
            ipfit::bootstrap::center_from_name(b.at("center").get<std::string>());
      if (b.contains("max_drop_frac"))
        cfg.bootstrap.max_drop_frac = b.at("max_drop_frac").get<double>();
    }
  }
  if (f.model) cfg.model = *f.model;
  if (f.data) cfg.data = *f.data;
  if (f.output_dir) cfg.output_dir = *f.output_dir;
  if (f.emit_plots) cfg.emit_plots = *f.emit_plots;
  if (f.delta) cfg.solver.delta = *f.delta;
  if (f.sse_rel_tol) cfg.solver.sse_rel_tol = *f.sse_rel_tol;
  if (f.max_iter) cfg.solver.max_iter = *f.max_iter;
  if (f.max_halvings) cfg.solver.max_halvings = *f.max_halvings;
  if (f.restart_on_stall) cfg.solver.restart_on_stall = *f.restart_on_stall;
  if (f.B) cfg.bootstrap.B = *f.B;
  if (f.seed) cfg.bootstrap.seed = *f.seed;
  if (f.alpha_level) cfg.bootstrap.alpha_level = *f.alpha_level;
  if (f.center) cfg.bootstrap.center = ipfit::bootstrap::center_from_name(*f.center);
  if (f.max_drop_frac) cfg.bootstrap.max_drop_frac = *f.max_drop_frac;
  if (cfg.data.empty())
    throw std::invalid_argument("no dataset given (use --data or the config file)");
  cfg.solver.validate();
  cfg.bootstrap.validate();
  return cfg;
}

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_bootstrap) {
  cmd->add_option("--config", f.config_path, "JSON config file (flags override it)");
  cmd->add_option("--model", f.model,
                  "model variant: ipm2-first, ipm2-second, ipm2-second-reduced");
  cmd->add_option("--data", f.data, "dataset CSV with header y,x1,x2");
  cmd->add_option("--out", f.output_dir, "output directory (created if missing)");
  cmd->add_option("--delta", f.delta, "relative parameter-change tolerance");
  cmd->add_option("--sse-rel-tol", f.sse_rel_tol, "relative SSE-change tolerance");
  cmd->add_option("--max-iter", f.max_iter, "iteration cap");
  cmd->add_option("--max-halvings", f.max_halvings, "step-halving cap per iteration");
  cmd->add_option("--restart-on-stall", f.restart_on_stall,
                  "retry once from a coarse grid when damping stalls");
  if (with_bootstrap) {
    cmd->add_option("--B", f.B, "bootstrap replicate count");
    cmd->add_option("--seed", f.seed, "bootstrap RNG seed");
    cmd->add_option("--alpha-level", f.alpha_level, "interval tail probability");
    cmd->add_option("--center", f.center,
                    "SE centering: bootstrap_mean or original_estimate");
    cmd->add_option("--max-drop-frac", f.max_drop_frac,
                    "tolerated non-convergent replicate fraction");
    cmd->add_option("--emit-plots", f.emit_plots, "write diagnostic CSV/SVG plots");
  }
}

struct Pipeline {
  ipfit::ipm::ModelSpec spec;
  ipfit::ipm::Dataset data;
  ipfit::gauss_newton::FitResult fit;
  ipfit::gauss_newton::GlobalCheck check;
};

int cmd_design(int k, int n0, const std::string& alpha_text,
               const std::optional<std::string>& ranges_text, const std::string& out) {
  const ipfit::doe::Design d = build_design(k, n0, alpha_text, ranges_text);
  ipfit::io::design_to_csv(out + ".csv", d);
  ipfit::io::write_json(out + ".json", ipfit::io::design_to_json(d));
  ipfit::io::write_json(out + ".audit.json", ipfit::io::audit_to_json(d));
  std::cout << "wrote " << out << ".csv, " << out << ".json, " << out << ".audit.json\n";
  return kExitOk;
}

Pipeline fit_stage(const RunConfig& cfg) {
  ipfit::ipm::ModelSpec spec(ipfit::ipm::variant_from_name(cfg.model));
  ipfit::ipm::Dataset data = ipfit::ipm::load_dataset(cfg.data);
  data.validate();

  Eigen::VectorXd start;
  try {
    start = ipfit::ipm::linearized_start(spec, data);
  } catch (const ipfit::SingularStartError&) {
    std::vector<std::pair<double, double>> bounds(
        static_cast<std::size_t>(spec.param_count()), {-2.0, 2.0});
    start = ipfit::ipm::grid_start(spec, data, bounds, 5);
  }

  auto fit = ipfit::gauss_newton::fit(spec, data, start, cfg.solver);
  std::filesystem::create_directories(cfg.output_dir);
  const std::string dir = cfg.output_dir + "/";
  ipfit::io::write_json(dir + "fit.json", ipfit::io::fit_to_json(fit));
  ipfit::io::sse_trace_to_csv(dir + "sse_trace.csv", fit.sse_trace);

  ipfit::gauss_newton::GlobalCheck check;
  if (fit.converged) check = ipfit::gauss_newton::verify_global(spec, data, fit, cfg.solver);
  return Pipeline{std::move(spec), std::move(data), std::move(fit), std::move(check)};
}

int cmd_fit(const RunFlags& flags) {
  const RunConfig cfg = load_config(flags);
  const Pipeline p = fit_stage(cfg);
  if (!p.fit.converged) {
    std::cerr << "fit did not converge: " << p.fit.diagnostic << "\n";
    return kExitNoConvergence;
  }
  std::cout << "converged in " << p.fit.iterations << " iterations, sse "
            << ipfit::csv::format_double(p.fit.sse) << "\n";
  if (!p.check.stable) {
    std::cerr << "global check failed: refit "
              << (p.check.refit_agrees ? "agrees" : "disagrees") << ", best multistart sse "
              << ipfit::csv::format_double(p.check.multistart_best.sse) << "\n";
    return kExitUnstable;
  }
  return kExitOk;
}

void emit_plots(const RunConfig& cfg, const Pipeline& p) {
  const std::string dir = cfg.output_dir + "/";
  const std::vector<double> resid(p.fit.residuals.data(),
                                  p.fit.residuals.data() + p.fit.residuals.size());

  const auto qq = ipfit::diagnostics::qq_normal(resid);
  ipfit::diagnostics::write_plot_csv(dir + "qq.csv", {qq.points, qq.reference});
  ipfit::diagnostics::render_svg({qq.points, qq.reference}, dir + "qq.svg");

  const auto rvp = ipfit::diagnostics::residual_vs_predictor(p.data, resid);
  ipfit::diagnostics::write_plot_csv(dir + "residuals.csv",
                                     {rvp[0].series, rvp[1].series});
  ipfit::diagnostics::render_svg({rvp[0].series}, dir + "residuals_x1.svg");
  ipfit::diagnostics::render_svg({rvp[1].series}, dir + "residuals_x2.svg");

  // Reference design diagnostic: the rotatable 13-run CCD variance profile.
  const auto design =
      ipfit::doe::augment_ccd(ipfit::doe::generate_factorial(2), 5,
                              ipfit::doe::rotatable_rule);
  const auto mm = ipfit::doe::model_matrix(design, ipfit::doe::Order::second);
  std::vector<double> radii;
  for (int i = 0; i <= 15; ++i) radii.push_back(0.1 * i);
  const double inv_sqrt2 = 0.70710678118654752440;
  const auto profiles = ipfit::diagnostics::varfcn_profile(
      mm, {{1.0, 0.0}, {inv_sqrt2, inv_sqrt2}}, radii);
  ipfit::diagnostics::write_plot_csv(dir + "varfcn.csv", profiles);
  ipfit::diagnostics::render_svg(profiles, dir + "varfcn.svg");
  ipfit::diagnostics::write_contour_csv(
      dir + "varfcn_contour.csv",
      ipfit::diagnostics::varfcn_contour(mm, design.alpha, 41));
}

int cmd_bootstrap(const RunFlags& flags) {
  const RunConfig cfg = load_config(flags);
  const Pipeline p = fit_stage(cfg);
  if (!p.fit.converged) {
    std::cerr << "fit did not converge: " << p.fit.diagnostic << "\n";
    return kExitNoConvergence;
  }
  const auto result = ipfit::bootstrap::run(p.spec, p.data, p.fit, cfg.solver,
                                            cfg.bootstrap, threads_from_env());
  const std::string dir = cfg.output_dir + "/";
  ipfit::io::write_json(dir + "bootstrap.json", ipfit::io::bootstrap_to_json(result));
  ipfit::io::theta_star_to_csv(dir + "theta_star.csv", result);
  if (cfg.emit_plots) emit_plots(cfg, p);
  std::cout << "bootstrap: " << result.theta_star.rows() << " replicates kept, "
            << result.dropped << " dropped\n";
  if (!p.check.stable) {
    std::cerr << "global check failed on the base fit\n";
    return kExitUnstable;
  }
  return kExitOk;
}

int cmd_simulate(const std::string& model, const std::string& theta_text, int n0,
                 const std::string& alpha_text, const std::string& ranges_text,
                 double sigma, std::uint64_t seed, const std::string& out) {
  if (sigma < 0.0) throw std::invalid_argument("--sigma must be >= 0");
  ipfit::ipm::ModelSpec spec(ipfit::ipm::variant_from_name(model));
  const auto theta_v = parse_theta(theta_text);
  if (static_cast<int>(theta_v.size()) != spec.param_count())
    throw std::invalid_argument("--theta needs " + std::to_string(spec.param_count()) +
                                " values for " + model);
  Eigen::VectorXd theta(spec.param_count());
  for (int i = 0; i < spec.param_count(); ++i) theta(i) = theta_v[static_cast<std::size_t>(i)];

  ipfit::doe::Design d = build_design(2, n0, alpha_text, ranges_text);
  const auto natural = ipfit::doe::decode(d);
  for (std::size_t i = 0; i < natural.size(); ++i)
    if (!(natural[i][0] > 0.0) || !(natural[i][1] > 0.0))
      throw std::invalid_argument("design point " + std::to_string(i + 1) +
                                  " decodes to nonpositive units; adjust --ranges");

  ipfit::rng::Stream noise(seed, 0);  // stream 0: simulation; streams >=1: bootstrap
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < natural.size(); ++i) {
    const double ph = spec.phi(theta, natural[i][0], natural[i][1]);
    if (!(ph > ipfit::ipm::kPhiMin))
      throw std::invalid_argument("phi <= 0 at design point " + std::to_string(i + 1) +
                                  "; this theta has no positive mean there");
    const double y = 1.0 / ph + sigma * noise.next_normal();
    rows.push_back({ipfit::csv::format_double(y),
                    ipfit::csv::format_double(natural[i][0]),
                    ipfit::csv::format_double(natural[i][1])});
  }
  ipfit::csv::write_table(out, {"y", "x1", "x2"}, rows);

  ipfit::io::Truth truth{model, theta, sigma, seed, ipfit::io::design_to_json(d)};
  std::string sidecar = out;
  if (sidecar.size() > 4 && sidecar.substr(sidecar.size() - 4) == ".csv")
    sidecar.resize(sidecar.size() - 4);
  sidecar += ".truth.json";
  ipfit::io::write_json(sidecar, ipfit::io::truth_to_json(truth, spec.param_names()));
  std::cout << "wrote " << out << " and " << sidecar << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inverse-polynomial response-surface fitting"};
  app.require_subcommand(1);

  // design
  auto* design = app.add_subcommand("design", "generate a CCD and audit its properties");
  int d_k = 2, d_n0 = 1;
  std::string d_alpha = "rotatable", d_out = "design";
  std::optional<std::string> d_ranges;
  design->add_option("--k", d_k, "factor count");
  design->add_option("--n0", d_n0, "center-run count");
  design->add_option("--alpha", d_alpha, "axial distance or 'rotatable'");
  design->add_option("--ranges", d_ranges, "natural bounds lo:hi per factor, comma-separated");
  design->add_option("--out", d_out, "output prefix");

  // fit
  auto* fit = app.add_subcommand("fit", "fit an inverse-polynomial model to CSV data");
  RunFlags fit_flags;
  add_run_flags(fit, fit_flags, false);

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap", "fit, then residual-bootstrap the estimates");
  RunFlags boot_flags;
  add_run_flags(boot, boot_flags, true);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate synthetic data on a CCD with known truth");
  std::string s_model = "ipm2-second", s_theta, s_alpha = "rotatable", s_ranges, s_out = "synth.csv";
  int s_n0 = 5;
  double s_sigma = 0.05;
  std::uint64_t s_seed = 0;
  sim->add_option("--model", s_model, "model variant");
  sim->add_option("--theta", s_theta, "true parameter values, comma-separated")->required();
  sim->add_option("--n0", s_n0, "center-run count");
  sim->add_option("--alpha", s_alpha, "axial distance or 'rotatable'");
  sim->add_option("--ranges", s_ranges, "natural bounds lo:hi per factor")->required();
  sim->add_option("--sigma", s_sigma, "noise standard deviation");
  sim->add_option("--seed", s_seed, "noise RNG seed");
  sim->add_option("--out", s_out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (design->parsed()) return cmd_design(d_k, d_n0, d_alpha, d_ranges, d_out);
    if (fit->parsed()) return cmd_fit(fit_flags);
    if (boot->parsed()) return cmd_bootstrap(boot_flags);
    return cmd_simulate(s_model, s_theta, s_n0, s_alpha, s_ranges, s_sigma, s_seed, s_out);
  } catch (const ipfit::ExcessDropError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitExcessDrops;
  } catch (const ipfit::NoFeasibleStartError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const ipfit::NearSingularMeanError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
