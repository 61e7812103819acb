#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipfit/bootstrap.hpp"
#include "ipfit/csv.hpp"
#include "ipfit/diagnostics.hpp"
#include "ipfit/doe.hpp"
#include "ipfit/errors.hpp"
#include "ipfit/gauss_newton.hpp"
#include "ipfit/ipm.hpp"

// Artifact serialization: designs, audits, fit and bootstrap results, truth
// sidecars. JSON uses insertion-ordered keys so output is byte-stable.

namespace ipfit::io {

using json = nlohmann::ordered_json;

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw FileError("write to '" + path + "' failed");
}

inline void write_json(const std::string& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open '" + path + "' for reading");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw FileError("'" + path + "': " + e.what());
  }
  return doc;
}

inline json named_map(const std::vector<std::string>& names, const Eigen::VectorXd& values) {
  json m = json::object();
  for (Eigen::Index i = 0; i < values.size(); ++i)
    m[names[static_cast<std::size_t>(i)]] = values(i);
  return m;
}

inline json named_intervals(const std::vector<std::string>& names,
                            const Eigen::MatrixXd& bounds) {
  json m = json::object();
  for (Eigen::Index i = 0; i < bounds.rows(); ++i)
    m[names[static_cast<std::size_t>(i)]] = json::array({bounds(i, 0), bounds(i, 1)});
  return m;
}

// ---- designs ----

inline json design_to_json(const doe::Design& d) {
  json doc;
  doc["k"] = d.k;
  doc["n_f"] = d.n_f;
  doc["n_a"] = d.n_a;
  doc["n0"] = d.n0;
  doc["N"] = d.total_runs();
  doc["alpha"] = d.alpha;
  if (d.factor_ranges) {
    json r = json::array();
    for (const auto& [lo, hi] : *d.factor_ranges) r.push_back(json::array({lo, hi}));
    doc["factor_ranges"] = r;
  } else {
    doc["factor_ranges"] = nullptr;
  }
  json runs = json::array();
  for (std::size_t i = 0; i < d.runs.size(); ++i) {
    json run;
    run["run"] = i + 1;
    run["type"] = doe::run_type_name(d.runs[i].type);
    run["x"] = d.runs[i].x;
    runs.push_back(std::move(run));
  }
  doc["runs"] = std::move(runs);
  return doc;
}

inline void design_to_csv(const std::string& path, const doe::Design& d) {
  std::vector<std::string> header{"run", "type"};
  for (int j = 1; j <= d.k; ++j) header.push_back("x" + std::to_string(j));
  std::optional<std::vector<std::vector<double>>> natural;
  if (d.factor_ranges) {
    natural = doe::decode(d);
    for (int j = 1; j <= d.k; ++j) header.push_back("natural_x" + std::to_string(j));
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < d.runs.size(); ++i) {
    std::vector<std::string> row{std::to_string(i + 1),
                                 doe::run_type_name(d.runs[i].type)};
    for (double v : d.runs[i].x) row.push_back(csv::format_double(v));
    if (natural)
      for (double v : (*natural)[i]) row.push_back(csv::format_double(v));
    rows.push_back(std::move(row));
  }
  csv::write_table(path, header, rows);
}

// Audit JSON: first-order orthogonality plus (k=2,3 only) second-order
// rotatability and uniform precision; unavailable checks serialize as null.
inline json audit_to_json(const doe::Design& d) {
  json doc;
  const auto first = doe::model_matrix(d, doe::Order::first);
  const auto orth = doe::check_orthogonality(first, 1e-10);
  doc["orthogonal"] = orth.orthogonal;
  doc["max_offdiag"] = orth.max_offdiag;
  if (d.k == 2 || d.k == 3) {
    const auto second = doe::model_matrix(d, doe::Order::second);
    const auto rot = doe::check_rotatability(second, 1.0, 64, 1e-8);
    const auto uni = doe::check_uniform_precision(second, 1e-2);
    doc["rotatable"] = rot.rotatable;
    doc["spread"] = rot.spread;
    doc["uniform"] = uni.uniform;
    doc["v_origin"] = uni.v_origin;
    doc["v_unit"] = uni.v_unit;
    doc["uniform_warning"] = uni.warning;
  } else {
    doc["rotatable"] = nullptr;
    doc["spread"] = nullptr;
    doc["uniform"] = nullptr;
    doc["v_origin"] = nullptr;
    doc["v_unit"] = nullptr;
    doc["uniform_warning"] = nullptr;
  }
  return doc;
}

// ---- fits ----

inline json fit_to_json(const gauss_newton::FitResult& r) {
  json doc;
  doc["theta"] = named_map(r.param_names, r.theta_hat);
  doc["sse"] = r.sse;
  doc["iterations"] = r.iterations;
  doc["converged"] = r.converged;
  doc["criterion"] = r.criterion;
  doc["sse_trace"] = r.sse_trace;
  if (!r.diagnostic.empty()) doc["diagnostic"] = r.diagnostic;
  return doc;
}

inline void sse_trace_to_csv(const std::string& path, const std::vector<double>& trace) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < trace.size(); ++i)
    rows.push_back({std::to_string(i), csv::format_double(trace[i])});
  csv::write_table(path, {"iter", "sse"}, rows);
}

// ---- bootstrap ----

inline json bootstrap_to_json(const bootstrap::BootstrapResult& r) {
  json doc;
  doc["B"] = r.B;
  doc["dropped"] = r.dropped;
  doc["seed"] = r.seed;
  doc["theta_hat"] = named_map(r.param_names, r.theta_hat);
  doc["theta_star_mean"] = named_map(r.param_names, r.theta_star_mean);
  doc["se"] = named_map(r.param_names, r.se);
  doc["ci_normal"] = named_intervals(r.param_names, r.ci_normal);
  doc["ci_percentile"] = named_intervals(r.param_names, r.ci_percentile);
  return doc;
}

inline void theta_star_to_csv(const std::string& path, const bootstrap::BootstrapResult& r) {
  std::vector<std::string> header{"b"};
  for (const auto& n : r.param_names) header.push_back(n);
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index i = 0; i < r.theta_star.rows(); ++i) {
    std::vector<std::string> row{
        std::to_string(r.replicate_index[static_cast<std::size_t>(i)])};
    for (Eigen::Index j = 0; j < r.theta_star.cols(); ++j)
      row.push_back(csv::format_double(r.theta_star(i, j)));
    rows.push_back(std::move(row));
  }
  csv::write_table(path, header, rows);
}

// ---- simulation truth sidecars ----

struct Truth {
  std::string model;
  Eigen::VectorXd theta;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  json design;  // design_to_json of the generating design
};

inline json truth_to_json(const Truth& t, const std::vector<std::string>& names) {
  json doc;
  doc["model"] = t.model;
  doc["theta"] = named_map(names, t.theta);
  doc["sigma"] = t.sigma;
  doc["seed"] = t.seed;
  doc["design"] = t.design;
  return doc;
}

}  // namespace ipfit::io
