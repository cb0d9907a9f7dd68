#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdsm/linalg.hpp"
#include "pdsm/perturbation.hpp"
#include "pdsm/problem.hpp"
#include "pdsm/queue_sim.hpp"

namespace pdsm {

inline constexpr const char* kVersion = "0.1.0";

enum class Regime { deterministic, bounded_eps, stochastic_delta, stochastic_both, heavy_eps };
enum class Pipeline { dual, queue };

const char* regime_name(Regime r);
const char* pipeline_name(Pipeline p);

// How eps_k is produced. `queue` identifies mu_k with alpha Q_k; the
// injected kinds draw nonnegative eps_k so mu_k stays nonnegative.
struct EpsilonConfig {
  enum class Kind { none, queue, bounded, gaussian, pareto };
  Kind kind = Kind::none;
  double scale = 0.0;  // bounded: radius; gaussian: std; pareto: scale
  double tail = 2.0;   // pareto tail index in (1, 2]
};

struct ScenarioConfig {
  std::string name;
  Pipeline pipeline = Pipeline::dual;
  Regime regime = Regime::deterministic;

  Vector objective_diagonal;
  std::vector<Vector> constraint_rows;
  std::vector<Vector> actions;
  double scale = 1.0;
  Vector slater_point;
  std::vector<CoordinateLaw> perturbation;

  EpsilonConfig epsilon;
  PolicyConfig policy;

  std::vector<double> alphas;
  std::size_t iters = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> checkpoints;  // merged with powers of ten
  std::size_t record_every = 1;          // trajectory CSV decimation
  double stability_tolerance = 1e-2;
  std::size_t workers = 0;               // 0: hardware concurrency

  // The document the config was parsed from, kept for hashing/archiving.
  nlohmann::json source;
};

// Numbers are decimal strings, optionally a fraction "p/q". Counts and
// seeds are JSON integers. Throws ConfigError naming the offending field.
ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const ScenarioConfig& config);

// The access-point example: two wireless links served by one access point.
ScenarioConfig ap_example_scenario();

ProblemSpec build_problem(const ScenarioConfig& config);
PerturbationStream build_stream(const ScenarioConfig& config, std::uint64_t seed);
std::vector<std::size_t> scenario_checkpoints(const ScenarioConfig& config);

struct OracleRecord {
  Vector x_star;
  double f_star = 0.0;
  Vector lambda_star;
  double h_lambda_star = 0.0;
  double kkt_residual = 0.0;
  double max_violation = 0.0;
  bool polished = false;
};
OracleRecord compute_oracle(const ScenarioConfig& config);
nlohmann::json oracle_to_json(const OracleRecord& o);
OracleRecord oracle_from_json(const nlohmann::json& doc);

struct RunOutcome {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  bool lemma1_ok = true;
  double lemma3_max_ratio = 0.0;
  bool lemma3_ok = true;
  double stability_slope = 0.0;
  bool stable = true;
  std::size_t rule_violations = 0;
};

struct ScenarioResult {
  std::filesystem::path directory;
  std::vector<RunOutcome> runs;
  std::size_t certificate_passes = 0;
  std::size_t certificate_failures = 0;
};

// Runs every (alpha, seed) job on a worker pool, writing into a temporary
// sibling directory that is renamed to `out_dir` only on success.
ScenarioResult run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir,
                            std::optional<OracleRecord> oracle = std::nullopt);

struct SummaryRow {
  double alpha = 0.0;
  std::size_t k = 0;
  std::size_t runs = 0;
  double abs_gap_mean = 0.0;
  double abs_gap_std = 0.0;
  double stability_slope_mean = 0.0;
  double lemma3_max_ratio = 0.0;
  std::size_t certificate_passes = 0;
  std::size_t certificate_failures = 0;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
  std::vector<std::string> warnings;
};

// Aggregates an artifact directory and writes summary.csv into it.
SummaryTable emit_summary(const std::filesystem::path& dir);

struct CheckReport {
  std::size_t checks = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

// Re-validates the stored trajectories, ledgers and certificates offline.
CheckReport check_artifacts(const std::filesystem::path& dir);

std::string sha256_hex(const std::string& data);

}  // namespace pdsm
