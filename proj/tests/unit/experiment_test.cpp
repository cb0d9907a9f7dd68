#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pdsm/errors.hpp"
#include "pdsm/experiment.hpp"

using namespace pdsm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json small_dual_config() {
  json doc = scenario_to_json(ap_example_scenario());
  doc["name"] = "small";
  doc["pipeline"] = "dual";
  doc["regime"] = "deterministic";
  doc["perturbation"] = {{{"constant", "0.25"}}, {{"constant", "0.5"}}, {{"constant", "-1"}},
                         {{"constant", "-1"}}};
  doc["epsilon"] = {{"kind", "none"}};
  doc["alphas"] = {"0.01"};
  doc["iters"] = 300;
  doc["seeds"] = {1};
  doc["checkpoints"] = json::array();
  doc["record_every"] = 1;
  doc["workers"] = 1;
  return doc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pdsm_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string config_error(const json& doc) {
  try {
    (void)parse_scenario(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("the access-point scenario") {
  const ScenarioConfig c = ap_example_scenario();
  CHECK(c.scale == doctest::Approx(7.0 / 9.0).epsilon(1e-15));
  CHECK(c.objective_diagonal == Vector{1.0, 3.0});
  CHECK(c.actions.size() == 3);
  CHECK(c.policy.kind == PolicyConfig::Kind::block);
  CHECK(c.policy.block_multiplier * c.actions.size() == 9);
  REQUIRE(c.policy.rule.has_value());
  CHECK_FALSE(c.policy.rule->allows(1, 2));
  CHECK_FALSE(c.policy.rule->allows(2, 1));
  CHECK(c.policy.rule->allows(1, 1));
  CHECK(c.alphas == std::vector<double>{0.01, 0.001});
  CHECK(c.seeds.size() == 20);
  CHECK(c.iters == 50000);
  CHECK(std::find(c.checkpoints.begin(), c.checkpoints.end(), 20000u) != c.checkpoints.end());
}

TEST_CASE("the shipped scenario file matches the built-in scenario") {
  const ScenarioConfig file = load_scenario(fs::path(PDSM_SOURCE_DIR) / "scenarios/ap_example.json");
  CHECK(scenario_to_json(file) == scenario_to_json(ap_example_scenario()));
}

TEST_CASE("configs round-trip through their canonical form") {
  const ScenarioConfig c = ap_example_scenario();
  CHECK(scenario_to_json(parse_scenario(scenario_to_json(c))) == scenario_to_json(c));
}

TEST_CASE("config validation names the field") {
  json doc = small_dual_config();
  CHECK(config_error(doc).empty());

  json empty = doc;
  empty["seeds"] = json::array();
  CHECK(config_error(empty).rfind("seeds", 0) == 0);

  json noisy = doc;
  noisy["perturbation"][0] = {{"bernoulli", "0.25"}};
  CHECK(config_error(noisy).rfind("regime", 0) == 0);

  json bad_number = doc;
  bad_number["problem"]["scale"] = "7/0";
  CHECK(config_error(bad_number).rfind("problem.scale", 0) == 0);

  json bad_alpha = doc;
  bad_alpha["alphas"] = {"fast"};
  CHECK(config_error(bad_alpha).rfind("alphas[0]", 0) == 0);

  json bad_slater = doc;
  bad_slater["problem"]["slater_point"] = {"0.25", "0.5"};
  CHECK(config_error(bad_slater).rfind("problem.slater_point", 0) == 0);

  json queue_eps = doc;
  queue_eps["regime"] = "stochastic-both";
  queue_eps["perturbation"][0] = {{"bernoulli", "0.25"}};
  queue_eps["epsilon"] = {{"kind", "queue"}};
  CHECK(config_error(queue_eps).rfind("epsilon.kind", 0) == 0);

  json heavy = doc;
  heavy["regime"] = "heavy-eps";
  heavy["epsilon"] = {{"kind", "pareto"}, {"scale", "0.01"}, {"tail", "3"}};
  CHECK(config_error(heavy).rfind("epsilon.tail", 0) == 0);

  json missing = doc;
  missing.erase("iters");
  CHECK(config_error(missing).rfind("iters", 0) == 0);
}

TEST_CASE("runs are reproducible and re-validate offline") {
  const ScenarioConfig c = parse_scenario(small_dual_config());
  const fs::path a = scratch("repro_a"), b = scratch("repro_b");
  const ScenarioResult ra = run_scenario(c, a);
  (void)run_scenario(c, b);
  CHECK(ra.certificate_failures == 0);
  CHECK(slurp(a / "alpha_0.01/seed_1/trajectory.csv") == slurp(b / "alpha_0.01/seed_1/trajectory.csv"));
  CHECK(slurp(a / "alpha_0.01/seed_1/ledger.csv") == slurp(b / "alpha_0.01/seed_1/ledger.csv"));
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  CHECK_FALSE(fs::exists(fs::path(a.string() + ".partial")));

  const CheckReport ok = check_artifacts(a);
  CHECK(ok.ok());
  CHECK(ok.checks > 0);

  // Single deterministic seed: every std column is zero.
  const SummaryTable t = emit_summary(a);
  REQUIRE_FALSE(t.rows.empty());
  for (const auto& row : t.rows) CHECK(row.abs_gap_std == 0.0);

  {
    std::ofstream tamper(a / "alpha_0.01/seed_1/ledger.csv", std::ios::app);
    tamper << "\n";
  }
  CHECK_FALSE(check_artifacts(a).ok());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("summary aggregation ignores seed order") {
  json doc = small_dual_config();
  doc["regime"] = "stochastic-delta";
  doc["perturbation"][0] = {{"bernoulli", "0.25"}};
  doc["perturbation"][1] = {{"bernoulli", "0.5"}};
  doc["seeds"] = {3, 1, 2};
  const fs::path a = scratch("order_a"), b = scratch("order_b");
  (void)run_scenario(parse_scenario(doc), a);
  doc["seeds"] = {2, 3, 1};
  (void)run_scenario(parse_scenario(doc), b);
  const SummaryTable ta = emit_summary(a), tb = emit_summary(b);
  REQUIRE(ta.rows.size() == tb.rows.size());
  for (std::size_t i = 0; i < ta.rows.size(); ++i) {
    CHECK(ta.rows[i].abs_gap_mean == tb.rows[i].abs_gap_mean);
    CHECK(ta.rows[i].abs_gap_std == tb.rows[i].abs_gap_std);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("summarizing an empty directory warns") {
  const fs::path d = scratch("empty");
  fs::create_directories(d);
  const SummaryTable t = emit_summary(d);
  CHECK(t.rows.empty());
  CHECK_FALSE(t.warnings.empty());
  fs::remove_all(d);
}

TEST_CASE("the oracle recovers the fluid optimum") {
  const OracleRecord o = compute_oracle(ap_example_scenario());
  CHECK(o.x_star[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(o.x_star[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(o.f_star == doctest::Approx(2.3125).epsilon(1e-9));
  CHECK(o.lambda_star[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(o.lambda_star[1] == doctest::Approx(9.0).epsilon(1e-6));
  CHECK(o.h_lambda_star == doctest::Approx(o.f_star).epsilon(1e-6));
  CHECK(o.kkt_residual < 1e-9);
}

TEST_CASE("sha256 of a known string") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
