#include "pdsm/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "oracle/fluid_oracle.hpp"
#include "pdsm/dual_ascent.hpp"
#include "pdsm/errors.hpp"
#include "pdsm/scheduler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pdsm {
namespace {

constexpr std::uint64_t kEpsilonSeedMix = 0x9E3779B97F4A7C15ull;

// ---------------------------------------------------------------- parsing

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) field_error(path + key, "missing");
  return obj.at(key);
}

double parse_real(const json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) field_error(field, "expected a decimal string");
  const std::string s = j.get<std::string>();
  auto to_double = [&](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      field_error(field, "'" + s + "' is not a number");
    }
    if (used != t.size() || !std::isfinite(v)) field_error(field, "'" + s + "' is not a number");
    return v;
  };
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    const double den = to_double(s.substr(slash + 1));
    if (den == 0.0) field_error(field, "zero denominator");
    return to_double(s.substr(0, slash)) / den;
  }
  return to_double(s);
}

std::uint64_t parse_count(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0)
    field_error(field, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

Vector parse_vector(const json& j, const std::string& field) {
  if (!j.is_array()) field_error(field, "expected an array");
  Vector out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(parse_real(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<Vector> parse_rows(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) field_error(field, "expected a nonempty array of rows");
  std::vector<Vector> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(parse_vector(j[i], field + "[" + std::to_string(i) + "]"));
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].size() != out[0].size()) field_error(field, "rows differ in length");
  return out;
}

template <typename E>
E parse_enum(const json& j, const std::string& field,
             const std::vector<std::pair<const char*, E>>& names) {
  if (!j.is_string()) field_error(field, "expected a string");
  const std::string s = j.get<std::string>();
  for (const auto& [name, value] : names)
    if (s == name) return value;
  std::string allowed;
  for (const auto& [name, value] : names) allowed += std::string(allowed.empty() ? "" : ", ") + name;
  field_error(field, "'" + s + "' is not one of {" + allowed + "}");
}

const std::vector<std::pair<const char*, Regime>> kRegimes = {
    {"deterministic", Regime::deterministic},
    {"bounded-eps", Regime::bounded_eps},
    {"stochastic-delta", Regime::stochastic_delta},
    {"stochastic-both", Regime::stochastic_both},
    {"heavy-eps", Regime::heavy_eps}};
const std::vector<std::pair<const char*, Pipeline>> kPipelines = {{"dual", Pipeline::dual},
                                                                  {"queue", Pipeline::queue}};
const std::vector<std::pair<const char*, EpsilonConfig::Kind>> kEpsilonKinds = {
    {"none", EpsilonConfig::Kind::none},
    {"queue", EpsilonConfig::Kind::queue},
    {"bounded", EpsilonConfig::Kind::bounded},
    {"gaussian", EpsilonConfig::Kind::gaussian},
    {"pareto", EpsilonConfig::Kind::pareto}};
const std::vector<std::pair<const char*, PolicyConfig::Kind>> kPolicyKinds = {
    {"myopic", PolicyConfig::Kind::myopic},
    {"amortized", PolicyConfig::Kind::amortized},
    {"block", PolicyConfig::Kind::block},
    {"constant", PolicyConfig::Kind::constant}};

template <typename E>
const char* enum_name(E value, const std::vector<std::pair<const char*, E>>& names) {
  for (const auto& [name, v] : names)
    if (v == value) return name;
  return "unknown";
}

std::string decimal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool is_integral(double v) { return std::floor(v) == v; }

double stream_variance(const std::vector<CoordinateLaw>& laws) {
  double var = 0.0;
  for (const auto& law : laws)
    if (const auto* b = std::get_if<BernoulliLaw>(&law)) var += b->p * (1.0 - b->p);
  return var;
}

void validate(const ScenarioConfig& c) {
  if (c.name.empty()) field_error("name", "must not be empty");
  if (c.seeds.empty()) field_error("seeds", "must list at least one seed");
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size())
    field_error("seeds", "must be distinct");
  if (c.alphas.empty()) field_error("alphas", "must list at least one step size");
  for (std::size_t i = 0; i < c.alphas.size(); ++i)
    if (!(c.alphas[i] > 0.0)) field_error("alphas[" + std::to_string(i) + "]", "must be positive");
  if (c.iters == 0) field_error("iters", "must be at least 1");
  if (c.record_every == 0) field_error("record_every", "must be at least 1");
  if (c.perturbation.size() != c.constraint_rows.size())
    field_error("perturbation", "needs one law per constraint row");

  const bool random_delta = stream_variance(c.perturbation) > 0.0;
  using K = EpsilonConfig::Kind;
  const K eps = c.epsilon.kind;
  switch (c.regime) {
    case Regime::deterministic:
      if (random_delta) field_error("regime", "'deterministic' forbids random perturbations");
      if (eps != K::none) field_error("regime", "'deterministic' requires epsilon.kind = none");
      break;
    case Regime::bounded_eps:
      if (random_delta) field_error("regime", "'bounded-eps' forbids random perturbations");
      if (eps != K::bounded) field_error("regime", "'bounded-eps' requires epsilon.kind = bounded");
      break;
    case Regime::stochastic_delta:
      if (!random_delta) field_error("regime", "'stochastic-delta' needs a random perturbation");
      if (eps != K::none && eps != K::bounded)
        field_error("regime", "'stochastic-delta' allows epsilon.kind none or bounded");
      break;
    case Regime::stochastic_both:
      if (!random_delta) field_error("regime", "'stochastic-both' needs a random perturbation");
      if (eps != K::queue && eps != K::gaussian)
        field_error("regime", "'stochastic-both' requires epsilon.kind queue or gaussian");
      break;
    case Regime::heavy_eps:
      if (eps != K::pareto) field_error("regime", "'heavy-eps' requires epsilon.kind = pareto");
      break;
  }
  if (eps == K::bounded || eps == K::gaussian || eps == K::pareto) {
    if (!(c.epsilon.scale > 0.0)) field_error("epsilon.scale", "must be positive");
  }
  if (eps == K::pareto && !(c.epsilon.tail > 1.0 && c.epsilon.tail <= 2.0))
    field_error("epsilon.tail", "must lie in (1, 2] for a heavy tail with finite mean");

  if (c.pipeline == Pipeline::queue) {
    if (eps != K::queue) field_error("epsilon.kind", "the queue pipeline requires 'queue'");
    for (const auto& law : c.perturbation)
      if (const auto* d = std::get_if<DeterministicLaw>(&law); d && !is_integral(d->value))
        field_error("perturbation", "queue arrivals must be integer valued");
    for (const auto& row : c.constraint_rows)
      for (double v : row)
        if (!is_integral(v)) field_error("problem.constraint_matrix", "must be integer valued");
    for (const auto& a : c.actions)
      for (double v : a)
        if (!is_integral(v)) field_error("problem.actions", "must be integer valued");
    if (c.policy.kind == PolicyConfig::Kind::constant && c.policy.constant_action >= c.actions.size())
      field_error("policy.constant_action", "out of range");
  } else if (eps == K::queue) {
    field_error("epsilon.kind", "'queue' is only available in the queue pipeline");
  }
}

// ------------------------------------------------------------------ CSV

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
  CsvWriter& operator<<(double v) {
    sep();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out_ << buf;
    return *this;
  }
  CsvWriter& operator<<(std::int64_t v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& operator<<(std::size_t v) {
    sep();
    out_ << v;
    return *this;
  }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ofstream out_;
  bool first_ = true;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error("column '" + name + "' missing");
  }
  std::vector<std::size_t> cols_with_prefix(const std::string& prefix) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i].rfind(prefix, 0) == 0) out.push_back(i);
    return out;
  }
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(in, line)) return t;
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line)) row.push_back(std::stod(cell));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::string> indexed(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void append(std::vector<std::string>& a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string alpha_dir(double alpha) { return "alpha_" + decimal(alpha); }
std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

// ------------------------------------------------------------- injected eps

InjectedPerturbation::Sequence injected_sequence(const EpsilonConfig& eps, std::size_t m,
                                                 std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed ^ kEpsilonSeedMix);
  const double root_m = std::sqrt(static_cast<double>(m));
  return [eps, m, rng, root_m](std::size_t, const Vector&) {
    Vector out(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double u = uniform01(*rng);
      switch (eps.kind) {
        case EpsilonConfig::Kind::bounded:
          out[j] = eps.scale * u / root_m;
          break;
        case EpsilonConfig::Kind::gaussian: {
          // |N(0, scale^2)| by Box-Muller on portable uniforms.
          const double u2 = uniform01(*rng);
          out[j] = eps.scale * std::abs(std::sqrt(-2.0 * std::log1p(-u)) *
                                        std::cos(2.0 * 3.14159265358979323846 * u2));
          break;
        }
        case EpsilonConfig::Kind::pareto:
          out[j] = eps.scale * (std::pow(1.0 - u, -1.0 / eps.tail) - 1.0);
          break;
        default:
          out[j] = 0.0;
      }
    }
    return out;
  };
}

// --------------------------------------------------------------- one job

struct JobResult {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::vector<DiagnosticLedger> checkpoints;
  RunOutcome outcome;
};

void write_ledger(const fs::path& path, const ProblemSpec& spec, const OracleRecord& oracle,
                  const DualRun& run, const Lemma1Report& l0, const Lemma1Report& ls) {
  std::vector<std::string> header{"k"};
  append(header, indexed("xbar_", spec.dim()));
  append(header, indexed("lambdabar_", spec.num_constraints()));
  append(header, {"f_xbar", "gap", "gamma_a", "gamma_b", "gamma_c", "gamma_d", "gamma_e",
                  "gamma_e_star", "sigma_g", "theta", "omega", "eps_l1_running", "eps_sum",
                  "lemma1_lhs_zero", "lemma1_rhs_zero", "lemma1_tol_zero", "lemma1_lhs_star",
                  "lemma1_rhs_star", "lemma1_tol_star"});
  CsvWriter csv(path, header);
  for (std::size_t i = 0; i < run.checkpoints.size(); ++i) {
    const DiagnosticLedger& l = run.checkpoints[i];
    const Vector xbar = l.xbar();
    const double f = spec.objective().value(xbar);
    csv << l.k();
    for (double v : xbar) csv << v;
    for (double v : l.lambdabar()) csv << v;
    csv << f << f - oracle.f_star << l.gamma_a() << l.gamma_b() << l.gamma_c() << l.gamma_d()
        << l.gamma_e() << l.gamma_e(oracle.lambda_star) << l.sigma_g() << l.theta_constant()
        << l.omega(oracle.lambda_star) << l.eps_l1_running() << l.eps_sum();
    const auto& a = l0.checkpoints[i];
    const auto& b = ls.checkpoints[i];
    csv << a.lhs << a.rhs_lower << a.tolerance << b.lhs << b.rhs_lower << b.tolerance;
    csv.end_row();
  }
}

bool keep_row(std::size_t k, std::size_t iters, std::size_t every) {
  return (k - 1) % every == 0 || k == iters;
}

JobResult run_job(const ScenarioConfig& config, const ProblemSpec& spec, const OracleRecord& oracle,
                  double alpha, std::uint64_t seed, const fs::path& dir) {
  fs::create_directories(dir);
  JobResult res;
  res.alpha = alpha;
  res.seed = seed;
  res.outcome.alpha = alpha;
  res.outcome.seed = seed;
  const std::vector<std::size_t> cps = scenario_checkpoints(config);
  const std::size_t m = spec.num_constraints();
  const Vector zero(m, 0.0);
  json run_info{{"alpha", decimal(alpha)}, {"seed", seed}};

  DualRun dual;
  if (config.pipeline == Pipeline::dual) {
    DualAscentOptions opts;
    opts.checkpoints = cps;
    std::unique_ptr<MultiplierSource> source;
    if (config.epsilon.kind == EpsilonConfig::Kind::none)
      source = std::make_unique<ExactMultipliers>();
    else
      source = std::make_unique<InjectedPerturbation>(injected_sequence(config.epsilon, m, seed));
    dual = run_dual_ascent(spec, build_stream(config, seed), alpha, config.iters, *source, opts);

    std::vector<std::string> header{"k"};
    append(header, indexed("lambda_", m));
    append(header, indexed("mu_", m));
    append(header, indexed("x_", spec.dim()));
    append(header, indexed("delta_", m));
    append(header, {"eps_norm", "inner_gap", "f_xbar", "gamma_a", "gamma_b", "gamma_c",
                    "gamma_d", "gamma_e"});
    CsvWriter csv(dir / "trajectory.csv", header);
    for (const auto& r : dual.rows) {
      if (!keep_row(r.k, config.iters, config.record_every)) continue;
      csv << r.k;
      for (double v : r.lambda) csv << v;
      for (double v : r.mu) csv << v;
      for (double v : r.x) csv << v;
      for (double v : r.delta) csv << v;
      csv << r.eps_norm << r.inner_gap << r.f_xbar << r.gamma_a << r.gamma_b << r.gamma_c
          << r.gamma_d << r.gamma_e;
      csv.end_row();
    }
  } else {
    const ArrivalProcess arrivals = ArrivalProcess::from_laws(config.perturbation, seed);
    NetworkSimOptions opts;
    opts.record_dual_rows = true;
    opts.checkpoints = cps;
    NetworkTrajectory traj =
        run_network_sim(spec, arrivals, alpha, config.iters, config.policy, opts);

    // A constant policy certifies nothing; hold it to the myopic psi so the
    // broken premise shows up.
    PolicyConfig reference = config.policy;
    if (reference.kind == PolicyConfig::Kind::constant) reference.kind = PolicyConfig::Kind::myopic;
    const double psi = certified_psi(spec, reference);
    const ContinuityReport cont = queue_continuity_check(traj, psi);
    const StabilityReport stab = stability_metric(traj, config.stability_tolerance);
    res.outcome.lemma3_max_ratio = cont.max_ratio;
    res.outcome.lemma3_ok = cont.holds();
    res.outcome.stability_slope = stab.slope;
    res.outcome.stable = stab.stable;
    res.outcome.rule_violations = traj.rule_violations;
    run_info["psi"] = psi;
    run_info["a_norm"] = traj.a_norm;
    run_info["lemma3_bound"] = cont.bound;
    run_info["lemma3_max_ratio"] = cont.max_ratio;
    run_info["lemma3_first_violation"] =
        cont.first_violation ? json(*cont.first_violation) : json(nullptr);
    run_info["premise_max_ratio"] = cont.max_premise_ratio;
    run_info["premise_first_violation"] =
        cont.first_premise_violation ? json(*cont.first_premise_violation) : json(nullptr);
    run_info["stability_slope"] = stab.slope;
    run_info["stable"] = stab.stable;
    run_info["rule_violations"] = traj.rule_violations;

    const std::size_t v = spec.num_actions();
    std::vector<std::string> header{"k"};
    append(header, indexed("Q_", m));
    append(header, indexed("lambda_", m));
    header.push_back("action");
    append(header, indexed("s_", v));
    append(header, {"gamma", "f_xbar", "multiplier_gap", "divergence"});
    CsvWriter csv(dir / "trajectory.csv", header);
    for (const auto& r : traj.slots) {
      if (!keep_row(r.k, config.iters, config.record_every)) continue;
      csv << r.k;
      for (auto q : r.q) csv << static_cast<std::int64_t>(q);
      for (double l : r.lambda) csv << l;
      csv << r.action;
      for (double s : r.s) csv << s;
      csv << r.gamma << r.f_xbar << r.multiplier_gap << r.divergence;
      csv.end_row();
    }
    dual = std::move(traj.dual);
  }

  const Lemma1Report l0 = lemma1_ledger_check(spec, dual, zero);
  const Lemma1Report ls = lemma1_ledger_check(spec, dual, oracle.lambda_star);
  res.outcome.lemma1_ok = l0.all_hold() && ls.all_hold();
  run_info["lemma1_ok"] = res.outcome.lemma1_ok;
  write_ledger(dir / "ledger.csv", spec, oracle, dual, l0, ls);
  write_json(dir / "run.json", run_info);
  res.checkpoints = std::move(dual.checkpoints);
  return res;
}

json certificate_to_json(const Theorem2Certificate& c) {
  return json{{"k", c.k},
              {"runs", c.runs},
              {"alpha", c.alpha},
              {"upper_i", c.upper_i},
              {"lower_ii", c.lower_ii},
              {"violation_iii", c.violation_iii},
              {"multiplier_iv", c.multiplier_iv},
              {"multiplier_iv_loose", c.multiplier_iv_loose},
              {"gap_mean", c.gap_mean},
              {"gap_std", c.gap_std},
              {"violation_norm", c.violation_norm},
              {"violation_std", c.violation_std},
              {"lambdabar_norm", c.lambdabar_norm},
              {"lambdabar_std", c.lambdabar_std},
              {"slack_gap", c.slack_gap},
              {"slack_violation", c.slack_violation},
              {"slack_lambdabar", c.slack_lambdabar},
              {"pass_i", c.pass_i},
              {"pass_ii", c.pass_ii},
              {"pass_iii", c.pass_iii},
              {"pass_iv", c.pass_iv}};
}

// Order-independent mean/std: values are sorted before summation.
std::pair<double, double> sorted_mean_std(std::vector<double> v) {
  if (v.empty()) return {0.0, 0.0};
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  const double mean = s / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  std::vector<double> sq;
  for (double x : v) sq.push_back((x - mean) * (x - mean));
  std::sort(sq.begin(), sq.end());
  double ss = 0.0;
  for (double x : sq) ss += x;
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

// ------------------------------------------------------------ public API

const char* regime_name(Regime r) { return enum_name(r, kRegimes); }
const char* pipeline_name(Pipeline p) { return enum_name(p, kPipelines); }

ScenarioConfig parse_scenario(const json& doc) {
  if (!doc.is_object()) throw ConfigError("scenario: expected a JSON object");
  ScenarioConfig c;
  c.source = doc;
  const json& name = require(doc, "name", "");
  if (!name.is_string()) field_error("name", "expected a string");
  c.name = name.get<std::string>();
  c.pipeline = parse_enum(require(doc, "pipeline", ""), "pipeline", kPipelines);
  c.regime = parse_enum(require(doc, "regime", ""), "regime", kRegimes);

  const json& problem = require(doc, "problem", "");
  const json& objective = require(problem, "objective", "problem.");
  if (require(objective, "type", "problem.objective.") != "diagonal_quadratic")
    field_error("problem.objective.type", "only 'diagonal_quadratic' is supported");
  c.objective_diagonal =
      parse_vector(require(objective, "diagonal", "problem.objective."), "problem.objective.diagonal");
  c.constraint_rows =
      parse_rows(require(problem, "constraint_matrix", "problem."), "problem.constraint_matrix");
  c.actions = parse_rows(require(problem, "actions", "problem."), "problem.actions");
  c.scale = parse_real(require(problem, "scale", "problem."), "problem.scale");
  c.slater_point =
      parse_vector(require(problem, "slater_point", "problem."), "problem.slater_point");

  const json& pert = require(doc, "perturbation", "");
  if (!pert.is_array()) field_error("perturbation", "expected an array of laws");
  for (std::size_t i = 0; i < pert.size(); ++i) {
    const std::string f = "perturbation[" + std::to_string(i) + "]";
    if (pert[i].contains("bernoulli")) {
      const double p = parse_real(pert[i]["bernoulli"], f + ".bernoulli");
      if (!(p >= 0.0 && p <= 1.0)) field_error(f + ".bernoulli", "must lie in [0, 1]");
      c.perturbation.emplace_back(BernoulliLaw{p});
    } else if (pert[i].contains("constant")) {
      c.perturbation.emplace_back(DeterministicLaw{parse_real(pert[i]["constant"], f + ".constant")});
    } else {
      field_error(f, "expected {\"bernoulli\": p} or {\"constant\": v}");
    }
  }

  if (doc.contains("epsilon")) {
    const json& e = doc["epsilon"];
    c.epsilon.kind = parse_enum(require(e, "kind", "epsilon."), "epsilon.kind", kEpsilonKinds);
    if (e.contains("scale")) c.epsilon.scale = parse_real(e["scale"], "epsilon.scale");
    if (e.contains("tail")) c.epsilon.tail = parse_real(e["tail"], "epsilon.tail");
  }

  if (doc.contains("policy")) {
    const json& p = doc["policy"];
    c.policy.kind = parse_enum(require(p, "kind", "policy."), "policy.kind", kPolicyKinds);
    if (p.contains("tau_bar")) c.policy.tau_bar = parse_count(p["tau_bar"], "policy.tau_bar");
    if (p.contains("block_multiplier"))
      c.policy.block_multiplier = parse_count(p["block_multiplier"], "policy.block_multiplier");
    if (p.contains("constant_action"))
      c.policy.constant_action = parse_count(p["constant_action"], "policy.constant_action");
    if (c.policy.tau_bar == 0) field_error("policy.tau_bar", "must be at least 1");
    if (c.policy.block_multiplier == 0) field_error("policy.block_multiplier", "must be at least 1");
    if (p.contains("allowed_pairs")) {
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      const json& ap = p["allowed_pairs"];
      if (!ap.is_array()) field_error("policy.allowed_pairs", "expected an array of [from, to]");
      for (std::size_t i = 0; i < ap.size(); ++i) {
        const std::string f = "policy.allowed_pairs[" + std::to_string(i) + "]";
        if (!ap[i].is_array() || ap[i].size() != 2) field_error(f, "expected [from, to]");
        const auto a = parse_count(ap[i][0], f), b = parse_count(ap[i][1], f);
        if (a >= c.actions.size() || b >= c.actions.size()) field_error(f, "action index out of range");
        pairs.emplace_back(a, b);
      }
      c.policy.rule = AdmissibilityRule::from_allowed(c.actions.size(), pairs);
    }
  }

  c.alphas = parse_vector(require(doc, "alphas", ""), "alphas");
  c.iters = parse_count(require(doc, "iters", ""), "iters");
  const json& seeds = require(doc, "seeds", "");
  if (!seeds.is_array()) field_error("seeds", "expected an array of integers");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    c.seeds.push_back(parse_count(seeds[i], "seeds[" + std::to_string(i) + "]"));
  if (doc.contains("checkpoints")) {
    const json& cp = doc["checkpoints"];
    if (!cp.is_array()) field_error("checkpoints", "expected an array of integers");
    for (std::size_t i = 0; i < cp.size(); ++i) {
      const auto k = parse_count(cp[i], "checkpoints[" + std::to_string(i) + "]");
      if (k == 0 || k > c.iters)
        field_error("checkpoints[" + std::to_string(i) + "]", "must lie in [1, iters]");
      c.checkpoints.push_back(k);
    }
  }
  if (doc.contains("record_every")) c.record_every = parse_count(doc["record_every"], "record_every");
  if (doc.contains("stability_tolerance"))
    c.stability_tolerance = parse_real(doc["stability_tolerance"], "stability_tolerance");
  if (doc.contains("workers")) c.workers = parse_count(doc["workers"], "workers");

  validate(c);
  try {
    (void)build_problem(c);
  } catch (const InvalidSlaterPoint& e) {
    field_error("problem.slater_point", e.what());
  } catch (const ContractViolation& e) {
    field_error("problem", e.what());
  }
  return c;
}

ScenarioConfig load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_scenario(doc);
}

json scenario_to_json(const ScenarioConfig& c) {
  auto vec = [](const Vector& v) {
    json out = json::array();
    for (double x : v) out.push_back(decimal(x));
    return out;
  };
  auto rows = [&](const std::vector<Vector>& r) {
    json out = json::array();
    for (const auto& v : r) out.push_back(vec(v));
    return out;
  };
  json pert = json::array();
  for (const auto& law : c.perturbation) {
    if (const auto* b = std::get_if<BernoulliLaw>(&law))
      pert.push_back({{"bernoulli", decimal(b->p)}});
    else
      pert.push_back({{"constant", decimal(std::get<DeterministicLaw>(law).value)}});
  }
  json policy{{"kind", enum_name(c.policy.kind, kPolicyKinds)},
              {"tau_bar", c.policy.tau_bar},
              {"block_multiplier", c.policy.block_multiplier},
              {"constant_action", c.policy.constant_action}};
  if (c.policy.rule) {
    json pairs = json::array();
    for (const auto& [a, b] : c.policy.rule->allowed_pairs()) pairs.push_back({a, b});
    policy["allowed_pairs"] = pairs;
  }
  json alphas = json::array();
  for (double a : c.alphas) alphas.push_back(decimal(a));
  return json{{"name", c.name},
              {"pipeline", pipeline_name(c.pipeline)},
              {"regime", regime_name(c.regime)},
              {"problem",
               {{"objective", {{"type", "diagonal_quadratic"}, {"diagonal", vec(c.objective_diagonal)}}},
                {"constraint_matrix", rows(c.constraint_rows)},
                {"actions", rows(c.actions)},
                {"scale", decimal(c.scale)},
                {"slater_point", vec(c.slater_point)}}},
              {"perturbation", pert},
              {"epsilon",
               {{"kind", enum_name(c.epsilon.kind, kEpsilonKinds)},
                {"scale", decimal(c.epsilon.scale)},
                {"tail", decimal(c.epsilon.tail)}}},
              {"policy", policy},
              {"alphas", alphas},
              {"iters", c.iters},
              {"seeds", c.seeds},
              {"checkpoints", c.checkpoints},
              {"record_every", c.record_every},
              {"stability_tolerance", decimal(c.stability_tolerance)},
              {"workers", c.workers}};
}

ScenarioConfig ap_example_scenario() {
  json doc = json::parse(R"({
    "name": "ap_example",
    "pipeline": "queue",
    "regime": "stochastic-both",
    "problem": {
      "objective": { "type": "diagonal_quadratic", "diagonal": ["1", "3"] },
      "constraint_matrix": [["-1", "0"], ["0", "-1"], ["1", "0"], ["0", "1"]],
      "actions": [["0", "0"], ["1", "0"], ["0", "1"]],
      "scale": "7/9",
      "slater_point": ["0.263", "0.513"]
    },
    "perturbation": [
      { "bernoulli": "0.25" }, { "bernoulli": "0.5" }, { "constant": "-1" }, { "constant": "-1" }
    ],
    "epsilon": { "kind": "queue" },
    "policy": {
      "kind": "block",
      "block_multiplier": 3,
      "allowed_pairs": [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [2, 0], [2, 2]]
    },
    "alphas": ["0.01", "0.001"],
    "iters": 50000,
    "checkpoints": [20000],
    "record_every": 10,
    "stability_tolerance": "0.01"
  })");
  json seeds = json::array();
  for (int s = 1; s <= 20; ++s) seeds.push_back(s);
  doc["seeds"] = seeds;
  return parse_scenario(doc);
}

ProblemSpec build_problem(const ScenarioConfig& c) {
  ProblemSpec spec(std::make_shared<DiagonalQuadratic>(c.objective_diagonal),
                   Matrix::from_rows(c.constraint_rows),
                   PerturbationStream::bernoulli(c.perturbation, 0).mean(),
                   ActionSet::from_points(c.actions), c.scale, c.slater_point);
  (void)slater_margin(spec);
  return spec;
}

PerturbationStream build_stream(const ScenarioConfig& c, std::uint64_t seed) {
  return PerturbationStream::bernoulli(c.perturbation, seed);
}

std::vector<std::size_t> scenario_checkpoints(const ScenarioConfig& c) {
  std::vector<std::size_t> cps = default_checkpoints(c.iters);
  cps.insert(cps.end(), c.checkpoints.begin(), c.checkpoints.end());
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  return cps;
}

OracleRecord compute_oracle(const ScenarioConfig& config) {
  const ProblemSpec spec = build_problem(config);
  const oracle::FluidSolution s = oracle::solve_fluid(spec);
  OracleRecord o;
  o.x_star = s.x_star;
  o.f_star = s.f_star;
  o.lambda_star = s.lambda_star;
  o.h_lambda_star = s.h_lambda_star;
  o.kkt_residual = s.kkt_residual;
  o.max_violation = s.max_violation;
  o.polished = s.polished;
  return o;
}

json oracle_to_json(const OracleRecord& o) {
  return json{{"x_star", o.x_star},       {"f_star", o.f_star},
              {"lambda_star", o.lambda_star}, {"h_lambda_star", o.h_lambda_star},
              {"kkt_residual", o.kkt_residual}, {"max_violation", o.max_violation},
              {"polished", o.polished}};
}

OracleRecord oracle_from_json(const json& doc) {
  OracleRecord o;
  o.x_star = doc.at("x_star").get<Vector>();
  o.f_star = doc.at("f_star").get<double>();
  o.lambda_star = doc.at("lambda_star").get<Vector>();
  o.h_lambda_star = doc.at("h_lambda_star").get<double>();
  o.kkt_residual = doc.value("kkt_residual", 0.0);
  o.max_violation = doc.value("max_violation", 0.0);
  o.polished = doc.value("polished", false);
  return o;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

ScenarioResult run_scenario(const ScenarioConfig& config, const fs::path& out_dir,
                            std::optional<OracleRecord> oracle) {
  const ProblemSpec spec = build_problem(config);
  if (!oracle) oracle = compute_oracle(config);

  fs::path tmp = out_dir;
  tmp += ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  struct Job {
    double alpha;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double a : config.alphas)
    for (auto s : config.seeds) jobs.push_back({a, s});
  std::vector<JobResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());

  std::size_t workers = config.workers ? config.workers : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      try {
        results[i] = run_job(config, spec, *oracle, jobs[i].alpha, jobs[i].seed,
                             tmp / alpha_dir(jobs[i].alpha) / seed_dir(jobs[i].seed));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) {
      fs::remove_all(tmp);
      std::rethrow_exception(e);
    }
  }

  ScenarioResult out;
  out.directory = out_dir;
  const DualOracle dual_oracle{oracle->lambda_star, oracle->f_star, oracle->h_lambda_star};
  const SlaterInfo slater{config.slater_point, slater_margin(spec)};
  for (double a : config.alphas) {
    std::vector<const JobResult*> runs;
    for (const auto& r : results)
      if (r.alpha == a) runs.push_back(&r);
    json certs = json::array();
    for (std::size_t c = 0; c < runs.front()->checkpoints.size(); ++c) {
      std::vector<DiagnosticLedger> ledgers;
      for (const auto* r : runs) ledgers.push_back(r->checkpoints[c]);
      const Theorem2Certificate cert =
          theorem2_bounds(spec, ledgers, dual_oracle, slater, Vector(spec.num_constraints(), 0.0));
      (cert.all_pass() ? out.certificate_passes : out.certificate_failures)++;
      certs.push_back(certificate_to_json(cert));
    }
    write_json(tmp / alpha_dir(a) / "certificate.json", certs);
  }
  for (const auto& r : results) out.runs.push_back(r.outcome);

  const json canonical = scenario_to_json(config);
  write_json(tmp / "config.json", canonical);
  write_json(tmp / "oracle.json", oracle_to_json(*oracle));
  json files = json::object();
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(tmp))
    if (entry.is_regular_file()) paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) files[fs::relative(p, tmp).generic_string()] = sha256_hex(read_file(p));
  write_json(tmp / "manifest.json", json{{"name", config.name},
                                         {"version", kVersion},
                                         {"config_sha256", sha256_hex(canonical.dump())},
                                         {"seeds", config.seeds},
                                         {"alphas", canonical["alphas"]},
                                         {"files", files}});

  fs::remove_all(out_dir);
  fs::rename(tmp, out_dir);
  return out;
}

SummaryTable emit_summary(const fs::path& dir) {
  SummaryTable table;
  if (!fs::is_directory(dir)) {
    table.warnings.push_back("no such directory: " + dir.string());
    return table;
  }
  std::optional<double> f_star;
  if (fs::exists(dir / "oracle.json")) f_star = read_json(dir / "oracle.json").at("f_star").get<double>();

  std::vector<fs::path> alpha_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && e.path().filename().string().rfind("alpha_", 0) == 0)
      alpha_dirs.push_back(e.path());
  std::sort(alpha_dirs.begin(), alpha_dirs.end());
  if (alpha_dirs.empty()) table.warnings.push_back("no trajectories found in " + dir.string());

  for (const auto& adir : alpha_dirs) {
    const double alpha = std::stod(adir.filename().string().substr(6));
    std::map<std::size_t, std::vector<double>> gaps;
    std::vector<double> slopes;
    double lemma3 = 0.0;
    std::vector<fs::path> seeds;
    for (const auto& e : fs::directory_iterator(adir))
      if (e.is_directory()) seeds.push_back(e.path());
    std::sort(seeds.begin(), seeds.end());
    for (const auto& sdir : seeds) {
      if (!fs::exists(sdir / "ledger.csv")) {
        table.warnings.push_back("missing ledger in " + sdir.string());
        continue;
      }
      const CsvTable ledger = read_csv(sdir / "ledger.csv");
      const std::size_t kc = ledger.col("k"), fc = ledger.col("f_xbar"), gc = ledger.col("gap");
      for (const auto& row : ledger.rows) {
        const double gap = f_star ? row[fc] - *f_star : row[gc];
        gaps[static_cast<std::size_t>(row[kc])].push_back(std::abs(gap));
      }
      if (fs::exists(sdir / "run.json")) {
        const json info = read_json(sdir / "run.json");
        if (info.contains("stability_slope")) slopes.push_back(info["stability_slope"].get<double>());
        if (info.contains("lemma3_max_ratio"))
          lemma3 = std::max(lemma3, info["lemma3_max_ratio"].get<double>());
      }
    }
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> cert_counts;
    if (fs::exists(adir / "certificate.json")) {
      for (const auto& c : read_json(adir / "certificate.json")) {
        const bool pass = c["pass_i"].get<bool>() && c["pass_ii"].get<bool>() &&
                          c["pass_iii"].get<bool>() && c["pass_iv"].get<bool>();
        auto& cc = cert_counts[c["k"].get<std::size_t>()];
        (pass ? cc.first : cc.second)++;
      }
    } else {
      table.warnings.push_back("missing certificate in " + adir.string());
    }
    const double slope_mean = sorted_mean_std(slopes).first;
    for (const auto& [k, values] : gaps) {
      SummaryRow row;
      row.alpha = alpha;
      row.k = k;
      row.runs = values.size();
      std::tie(row.abs_gap_mean, row.abs_gap_std) = sorted_mean_std(values);
      row.stability_slope_mean = slope_mean;
      row.lemma3_max_ratio = lemma3;
      row.certificate_passes = cert_counts[k].first;
      row.certificate_failures = cert_counts[k].second;
      table.rows.push_back(row);
    }
  }

  CsvWriter csv(dir / "summary.csv",
                {"alpha", "k", "runs", "abs_gap_mean", "abs_gap_std", "stability_slope_mean",
                 "lemma3_max_ratio", "certificate_passes", "certificate_failures"});
  for (const auto& r : table.rows) {
    csv << r.alpha << r.k << r.runs << r.abs_gap_mean << r.abs_gap_std << r.stability_slope_mean
        << r.lemma3_max_ratio << r.certificate_passes << r.certificate_failures;
    csv.end_row();
  }
  return table;
}

CheckReport check_artifacts(const fs::path& dir) {
  CheckReport rep;
  auto expect = [&](bool ok, const std::string& what) {
    ++rep.checks;
    if (!ok) rep.failures.push_back(what);
  };
  try {
    const ScenarioConfig config = parse_scenario(read_json(dir / "config.json"));
    const ProblemSpec spec = build_problem(config);
    const OracleRecord oracle = oracle_from_json(read_json(dir / "oracle.json"));
    const json manifest = read_json(dir / "manifest.json");

    expect(manifest.at("config_sha256") == sha256_hex(scenario_to_json(config).dump()),
           "manifest: config hash mismatch");
    for (const auto& [rel, hash] : manifest.at("files").items()) {
      const fs::path p = dir / rel;
      expect(fs::exists(p) && sha256_hex(read_file(p)) == hash.get<std::string>(),
             "manifest: " + rel + " missing or modified");
    }

    const double c_const = divergence_constant(spec.num_actions());
    const bool deterministic = stream_variance(config.perturbation) == 0.0;
    for (double a : config.alphas) {
      const fs::path adir = dir / alpha_dir(a);
      for (auto seed : config.seeds) {
        const fs::path sdir = adir / seed_dir(seed);
        const std::string where = alpha_dir(a) + "/" + seed_dir(seed);
        const CsvTable ledger = read_csv(sdir / "ledger.csv");
        const auto xcols = ledger.cols_with_prefix("xbar_");
        for (const auto& row : ledger.rows) {
          const std::string at = where + " k=" + decimal(row[ledger.col("k")]);
          const double sg = row[ledger.col("sigma_g")];
          expect(row[ledger.col("gamma_a")] <= sg * sg / 2.0 * (1.0 + 1e-12),
                 at + ": gamma_a exceeds sigma_g^2/2");
          for (const char* t : {"zero", "star"}) {
            const std::string s(t);
            expect(row[ledger.col("lemma1_lhs_" + s)] <=
                       row[ledger.col("lemma1_rhs_" + s)] + row[ledger.col("lemma1_tol_" + s)],
                   at + ": Lemma-1 inequality fails for theta = " + s);
          }
          if (deterministic)
            expect(row[ledger.col("gamma_e")] == 0.0, at + ": gamma_e nonzero without noise");
          Vector xbar;
          for (auto c : xcols) xbar.push_back(row[c]);
          bool inside = true;
          try {
            (void)decompose_to_simplex(spec.action_set(), spec.scale(), xbar);
          } catch (const InfeasibleError&) {
            inside = false;
          }
          expect(inside, at + ": running average left X");
        }

        if (config.pipeline != Pipeline::queue) continue;
        const json info = read_json(sdir / "run.json");
        const double bound = info.at("lemma3_bound").get<double>();
        const bool adversarial = config.policy.kind == PolicyConfig::Kind::constant;
        const CsvTable traj = read_csv(sdir / "trajectory.csv");
        const auto qcols = traj.cols_with_prefix("Q_");
        const auto scols = traj.cols_with_prefix("s_");
        const std::size_t gap_col = traj.col("multiplier_gap"), gamma_col = traj.col("gamma");
        bool integral = true, gap_ok = true, gamma_ok = true;
        for (const auto& row : traj.rows) {
          for (auto c : qcols) integral = integral && row[c] >= 0.0 && std::floor(row[c]) == row[c];
          gap_ok = gap_ok && row[gap_col] <= bound * (1.0 + 1e-12) + 1e-12;
          Vector s;
          for (auto c : scols) s.push_back(row[c]);
          gamma_ok = gamma_ok && norm2(s) <= row[gamma_col] * c_const * (1.0 + 1e-9) + 1e-9;
        }
        expect(integral, where + ": queues not nonnegative integers");
        expect(gamma_ok, where + ": divergence exceeds gamma * C");
        if (!adversarial) {
          expect(gap_ok, where + ": Lemma-3 continuity bound violated");
          expect(info.at("rule_violations").get<std::size_t>() == 0,
                 where + ": emitted actions break the transition rule");
        }
      }
      for (const auto& c : read_json(adir / "certificate.json")) {
        const std::string at = alpha_dir(a) + " k=" + std::to_string(c["k"].get<std::size_t>());
        const auto d = [&](const char* key) { return c[key].get<double>(); };
        expect(d("gap_mean") <= d("upper_i") + d("slack_gap"), at + ": claim (i) fails");
        expect(d("gap_mean") >= d("lower_ii") - d("slack_gap"), at + ": claim (ii) fails");
        expect(d("violation_norm") <= d("violation_iii") + d("slack_violation"),
               at + ": claim (iii) fails");
        expect(d("lambdabar_norm") <= d("multiplier_iv") + d("slack_lambdabar"),
               at + ": claim (iv) fails");
      }
    }
  } catch (const std::exception& e) {
    ++rep.checks;
    rep.failures.push_back(std::string("unreadable artifacts: ") + e.what());
  }
  return rep;
}

}  // namespace pdsm
