#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "ipfit/bootstrap.hpp"
#include "ipfit/csv.hpp"
#include "ipfit/doe.hpp"
#include "ipfit/errors.hpp"
#include "ipfit/gauss_newton.hpp"
#include "ipfit/io.hpp"
#include "schema_check.hpp"
#include "support.hpp"

namespace doe = ipfit::doe;
namespace gn = ipfit::gauss_newton;
namespace io = ipfit::io;
using Catch::Matchers::ContainsSubstring;
using io::json;

namespace {

const std::string kSchemas = IPFIT_SCHEMA_DIR;

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const char* suffix) {
    path = std::filesystem::temp_directory_path() /
           ("ipfit_io_" + std::to_string(std::rand()) + suffix);
  }
  ~TempFile() { std::filesystem::remove(path); }
};

doe::Design rotatable_design(int n0, bool with_ranges) {
  auto d = doe::augment_ccd(doe::generate_factorial(2), n0, doe::rotatable_rule);
  if (with_ranges) {
    const auto r = support::natural_range();
    d.factor_ranges = {{r, r}};
  }
  return d;
}

gn::FitResult small_fit() {
  const ipfit::ipm::ModelSpec full(ipfit::ipm::Variant::second_order_2f_full);
  const auto data = support::synth_dataset(full, support::theta_star_full(), 0.05, 42);
  return gn::fit(full, data, ipfit::ipm::linearized_start(full, data), gn::SolverConfig{});
}

void expect_valid(const json& doc, const std::string& schema_name) {
  const std::string err = schema_check::validate_file(doc, kSchemas, schema_name);
  INFO("schema " << schema_name << ": " << err);
  CHECK(err.empty());
}

}  // namespace

TEST_CASE("write_json emits a trailing newline and reads back identically") {
  TempFile f(".json");
  json doc;
  doc["b"] = 2;
  doc["a"] = 1;  // ordered_json keeps insertion order, not alphabetical
  io::write_json(f.path.string(), doc);

  std::ifstream in(f.path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text == "{\n  \"b\": 2,\n  \"a\": 1\n}\n");
  CHECK(io::read_json(f.path.string()) == doc);
}

TEST_CASE("read_json failures carry the path") {
  CHECK_THROWS_WITH(io::read_json("/nonexistent/x.json"),
                    ContainsSubstring("/nonexistent/x.json"));
  TempFile f(".json");
  io::write_text(f.path.string(), "{not json");
  CHECK_THROWS_AS(io::read_json(f.path.string()), ipfit::FileError);
  CHECK_THROWS_AS(io::write_text("/nonexistent-dir/y.txt", "hi"), ipfit::FileError);
}

TEST_CASE("named maps preserve parameter order") {
  Eigen::VectorXd v(3);
  v << 1.5, -2.0, 0.25;
  const json m = io::named_map({"zeta", "alpha", "mid"}, v);
  CHECK(m.dump() == "{\"zeta\":1.5,\"alpha\":-2.0,\"mid\":0.25}");

  Eigen::MatrixXd ci(2, 2);
  ci << -1.0, 1.0, -2.0, 2.0;
  const json i = io::named_intervals({"b", "a"}, ci);
  CHECK(i.dump() == "{\"b\":[-1.0,1.0],\"a\":[-2.0,2.0]}");
}

TEST_CASE("design JSON matches the documented shape and schema") {
  const doe::Design d = rotatable_design(3, true);
  const json doc = io::design_to_json(d);

  CHECK(doc["k"] == 2);
  CHECK(doc["n_f"] == 4);
  CHECK(doc["n_a"] == 4);
  CHECK(doc["n0"] == 3);
  CHECK(doc["N"] == 11);
  CHECK(doc["alpha"].get<double>() == d.alpha);
  REQUIRE(doc["factor_ranges"].is_array());
  CHECK(doc["factor_ranges"].size() == 2);
  CHECK(doc["factor_ranges"][0][0].get<double>() == support::natural_range().first);
  REQUIRE(doc["runs"].size() == 11);
  CHECK(doc["runs"][0]["run"] == 1);
  CHECK(doc["runs"][0]["type"] == "factorial");
  CHECK(doc["runs"][0]["x"] == json::array({-1.0, -1.0}));
  CHECK(doc["runs"][4]["type"] == "axial");
  CHECK(doc["runs"][10]["type"] == "center");
  expect_valid(doc, "design.schema.json");

  const doe::Design bare = rotatable_design(1, false);
  const json doc2 = io::design_to_json(bare);
  CHECK(doc2["factor_ranges"].is_null());
  expect_valid(doc2, "design.schema.json");
}

TEST_CASE("design CSV lists coded and natural levels") {
  const doe::Design d = rotatable_design(2, true);
  TempFile f(".csv");
  io::design_to_csv(f.path.string(), d);
  const ipfit::csv::Table t = ipfit::csv::read_table(f.path.string());
  CHECK(t.header == std::vector<std::string>{"run", "type", "x1", "x2", "natural_x1",
                                             "natural_x2"});
  REQUIRE(t.rows.size() == 10);
  CHECK(t.rows[0][0] == "1");
  CHECK(t.rows[0][1] == "factorial");
  CHECK(ipfit::csv::parse_double(t.rows[0][2], "x1") == -1.0);
  const auto natural = doe::decode(d);
  for (std::size_t i : {0u, 4u, 9u}) {
    CHECK(ipfit::csv::parse_double(t.rows[i][4], "n1") == natural[i][0]);
    CHECK(ipfit::csv::parse_double(t.rows[i][5], "n2") == natural[i][1]);
  }

  const doe::Design bare = rotatable_design(2, false);
  TempFile f2(".csv");
  io::design_to_csv(f2.path.string(), bare);
  CHECK(ipfit::csv::read_table(f2.path.string()).header ==
        std::vector<std::string>{"run", "type", "x1", "x2"});
}

TEST_CASE("audit JSON covers both the k=2 and the null branches") {
  const json full = io::audit_to_json(rotatable_design(5, false));
  CHECK(full["orthogonal"] == true);
  CHECK(full["rotatable"] == true);
  CHECK(full["uniform_warning"] == false);
  CHECK(full["v_origin"].get<double>() > 0.0);
  expect_valid(full, "design_audit.schema.json");

  auto k1 = doe::augment_ccd(doe::generate_factorial(1), 2, 1.0);
  const json partial = io::audit_to_json(k1);
  CHECK(partial["orthogonal"].is_boolean());
  CHECK(partial["rotatable"].is_null());
  CHECK(partial["v_unit"].is_null());
  expect_valid(partial, "design_audit.schema.json");
}

TEST_CASE("fit JSON round-trips through its schema") {
  const gn::FitResult r = small_fit();
  REQUIRE(r.converged);
  const json doc = io::fit_to_json(r);
  CHECK(doc["theta"].size() == 6);
  CHECK(doc["theta"].begin().key() == "beta11");
  CHECK(doc["sse"].get<double>() == r.sse);
  CHECK(doc["converged"] == true);
  CHECK_FALSE(doc.contains("diagnostic"));
  CHECK(doc["sse_trace"].size() == r.sse_trace.size());
  expect_valid(doc, "fit_result.schema.json");

  // Key order is fixed by construction.
  const std::string dump = doc.dump();
  CHECK(dump.find("\"theta\"") < dump.find("\"sse\""));
  CHECK(dump.find("\"sse\"") < dump.find("\"iterations\""));
  CHECK(dump.find("\"iterations\"") < dump.find("\"converged\""));
  CHECK(dump.find("\"converged\"") < dump.find("\"criterion\""));
  CHECK(dump.find("\"criterion\"") < dump.find("\"sse_trace\""));

  gn::FitResult bad = r;
  bad.converged = false;
  bad.criterion = "none";
  bad.diagnostic = "iteration cap reached";
  const json doc2 = io::fit_to_json(bad);
  CHECK(doc2["diagnostic"] == "iteration cap reached");
  expect_valid(doc2, "fit_result.schema.json");
}

TEST_CASE("sse trace CSV numbers iterations from zero") {
  TempFile f(".csv");
  io::sse_trace_to_csv(f.path.string(), {4.0, 2.5, 2.5e-10});
  const ipfit::csv::Table t = ipfit::csv::read_table(f.path.string());
  CHECK(t.header == std::vector<std::string>{"iter", "sse"});
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0][0] == "0");
  CHECK(t.rows[2][0] == "2");
  CHECK(ipfit::csv::parse_double(t.rows[2][1], "sse") == 2.5e-10);
}

TEST_CASE("bootstrap JSON and replicate CSV mirror the result") {
  const ipfit::ipm::ModelSpec full(ipfit::ipm::Variant::second_order_2f_full);
  const auto data = support::synth_dataset(full, support::theta_star_full(), 0.05, 42);
  const gn::FitResult fit0 = small_fit();
  ipfit::bootstrap::BootstrapConfig bcfg;
  bcfg.B = 30;
  bcfg.seed = 5;
  const auto out = ipfit::bootstrap::run(full, data, fit0, gn::SolverConfig{}, bcfg);

  const json doc = io::bootstrap_to_json(out);
  CHECK(doc["B"] == 30);
  CHECK(doc["seed"] == 5);
  CHECK(doc["theta_hat"]["beta11"].get<double>() == out.theta_hat(0));
  CHECK(doc["se"].size() == 6);
  CHECK(doc["ci_normal"]["beta00"].size() == 2);
  CHECK(doc["ci_percentile"]["beta20"][0].get<double>() == out.ci_percentile(3, 0));
  expect_valid(doc, "bootstrap_result.schema.json");

  TempFile f(".csv");
  io::theta_star_to_csv(f.path.string(), out);
  const ipfit::csv::Table t = ipfit::csv::read_table(f.path.string());
  CHECK(t.header == std::vector<std::string>{"b", "beta11", "beta01", "beta10", "beta20",
                                             "beta02", "beta00"});
  REQUIRE(t.rows.size() == static_cast<std::size_t>(out.theta_star.rows()));
  for (Eigen::Index i = 0; i < out.theta_star.rows(); ++i) {
    CHECK(t.rows[static_cast<std::size_t>(i)][0] ==
          std::to_string(out.replicate_index[static_cast<std::size_t>(i)]));
    for (Eigen::Index j = 0; j < 6; ++j)
      CHECK(ipfit::csv::parse_double(t.rows[static_cast<std::size_t>(i)]
                                           [static_cast<std::size_t>(j + 1)],
                                     "theta") == out.theta_star(i, j));
  }
}

TEST_CASE("truth sidecar validates including the nested design reference") {
  io::Truth truth;
  truth.model = "ipm2-second";
  truth.theta = support::theta_star_full();
  truth.sigma = 0.05;
  truth.seed = 42;
  truth.design = io::design_to_json(rotatable_design(5, true));
  const json doc = io::truth_to_json(
      truth, ipfit::ipm::ModelSpec(ipfit::ipm::Variant::second_order_2f_full).param_names());
  CHECK(doc["model"] == "ipm2-second");
  CHECK(doc["theta"]["beta00"].get<double>() == 0.01);
  CHECK(doc["sigma"].get<double>() == 0.05);
  expect_valid(doc, "truth.schema.json");
}

TEST_CASE("run configuration examples validate against their schema") {
  json cfg;
  cfg["model"] = "ipm2-second";
  cfg["data"] = "data/synth13.csv";
  cfg["output_dir"] = "out";
  cfg["emit_plots"] = true;
  cfg["solver"] = {{"delta", 1e-8}, {"max_iter", 100}};
  cfg["bootstrap"] = {{"B", 1000}, {"seed", 42}, {"center", "bootstrap_mean"}};
  expect_valid(cfg, "run_config.schema.json");

  json bad = cfg;
  bad["bootstrap"]["B"] = 0;
  CHECK_FALSE(schema_check::validate_file(bad, kSchemas, "run_config.schema.json").empty());
  bad = cfg;
  bad["typo_key"] = 1;
  CHECK_FALSE(schema_check::validate_file(bad, kSchemas, "run_config.schema.json").empty());
  bad = cfg;
  bad["bootstrap"]["alpha_level"] = 1.0;
  CHECK_FALSE(schema_check::validate_file(bad, kSchemas, "run_config.schema.json").empty());
}

TEST_CASE("the schema checker itself flags shape violations") {
  const doe::Design d = rotatable_design(2, false);
  json doc = io::design_to_json(d);
  doc.erase("alpha");
  CHECK_THAT(schema_check::validate_file(doc, kSchemas, "design.schema.json"),
             ContainsSubstring("missing required 'alpha'"));
  doc = io::design_to_json(d);
  doc["runs"][0]["type"] = "corner";
  CHECK_THAT(schema_check::validate_file(doc, kSchemas, "design.schema.json"),
             ContainsSubstring("not in enum"));
  doc = io::design_to_json(d);
  doc["k"] = 2.5;
  CHECK_THAT(schema_check::validate_file(doc, kSchemas, "design.schema.json"),
             ContainsSubstring("type mismatch"));
  doc = io::design_to_json(d);
  doc["stray"] = true;
  CHECK_THAT(schema_check::validate_file(doc, kSchemas, "design.schema.json"),
             ContainsSubstring("unexpected property"));
}
