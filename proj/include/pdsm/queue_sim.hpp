#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pdsm/dual_ascent.hpp"
#include "pdsm/linalg.hpp"
#include "pdsm/perturbation.hpp"
#include "pdsm/problem.hpp"
#include "pdsm/scheduler.hpp"

namespace pdsm {

using QueueVector = std::vector<std::int64_t>;

struct QueueState {
  QueueVector q;
};

// Integer-valued arrivals B_k; each coordinate is Bernoulli or constant.
class ArrivalProcess {
 public:
  static ArrivalProcess from_laws(std::vector<CoordinateLaw> laws, std::uint64_t seed);

  const Vector& mean() const noexcept { return stream_.mean(); }
  std::size_t dim() const noexcept { return stream_.dim(); }
  const PerturbationStream& stream() const noexcept { return stream_; }

 private:
  explicit ArrivalProcess(PerturbationStream s) : stream_(std::move(s)) {}
  PerturbationStream stream_;
};

// Q' = [Q + A y + B]^+. Throws ContractViolation when A y + B is not
// integer valued.
QueueState queue_step(const QueueState& state, const Matrix& a, std::span<const double> y,
                      std::span<const double> arrivals);

struct PolicyConfig {
  enum class Kind { myopic, amortized, block, constant };
  Kind kind = Kind::myopic;
  std::size_t tau_bar = 1;           // amortized: update every tau_bar slots
  std::size_t block_multiplier = 1;  // block: T
  std::optional<AdmissibilityRule> rule;
  std::size_t constant_action = 0;   // constant: the action always played
};

const char* policy_name(PolicyConfig::Kind kind);

// Largest -min_j s_k(j) the policy can produce (infinite for `constant`).
double policy_gamma_bound(const PolicyConfig& policy, std::size_t num_actions);

// psi = ||W||_2 * gamma * C: a uniform bound on ||sum (x_i - y_i)||_2.
double certified_psi(const ProblemSpec& spec, const PolicyConfig& policy);

struct SlotRow {
  std::size_t k = 0;
  QueueVector q;        // Q_k
  Vector lambda;        // continuous-action reference multiplier lambda_k
  std::size_t action = 0;
  double f_xbar = 0.0;
  double multiplier_gap = 0.0;  // ||lambda_k - alpha Q_k||_2
  double divergence = 0.0;      // ||sum_{i<k} (x_i - y_i)||_2
  Vector s;                     // sum_{i<=k} (u_i - e_i) after this slot
  double gamma = 0.0;           // -min_j s(j)
};

// mu_k = alpha Q_k; after each primal solve the discrete action is chosen
// by the policy and the real queues advance with it and the shared arrivals.
class QueueIdentification final : public MultiplierSource {
 public:
  QueueIdentification(const ProblemSpec& spec, double alpha, PolicyConfig policy,
                      QueueVector q1);

  Vector multiplier(const DualState& state) override;
  void observe(std::size_t k, const InnerSolution& primal,
               std::span<const double> delta_k) override;

  const std::vector<SlotRow>& rows() const noexcept { return rows_; }
  std::vector<SlotRow> take_rows() { return std::move(rows_); }
  const QueueState& queues() const noexcept { return queues_; }
  // Count of emitted adjacent pairs that break the admissibility rule.
  std::size_t rule_violations() const noexcept { return rule_violations_; }

 private:
  Vector action_weights(const InnerSolution& primal) const;
  std::size_t next_action(std::span<const double> u);

  const ProblemSpec& spec_;
  double alpha_;
  PolicyConfig policy_;
  QueueState queues_;
  std::optional<std::size_t> zero_action_;
  SchedulerState scheduler_;
  std::optional<BlockBuffer> block_;
  std::vector<std::size_t> emit_queue_;
  std::size_t emit_pos_ = 0;
  std::optional<std::size_t> last_action_;
  std::size_t rule_violations_ = 0;
  Vector divergence_;  // sum (x_i - y_i)
  Vector weight_divergence_;  // sum (u_i - e_i)
  Vector x_sum_;
  std::vector<SlotRow> rows_;
};

struct NetworkSimOptions {
  std::optional<QueueVector> q1;  // default 0; lambda_1 = alpha Q_1
  bool record_dual_rows = false;
  std::vector<std::size_t> checkpoints;
};

struct NetworkTrajectory {
  double alpha = 0.0;
  PolicyConfig policy;
  double psi = 0.0;          // policy-certified (infinite for `constant`)
  double a_norm = 0.0;       // ||A||_2
  std::vector<SlotRow> slots;
  DualRun dual;
  std::size_t rule_violations = 0;
};

// Throws ConfigError when a block policy with an active rule is run with
// c > 1 - 2/(T V).
NetworkTrajectory run_network_sim(const ProblemSpec& spec, const ArrivalProcess& arrivals,
                                  double alpha, std::size_t iters, const PolicyConfig& policy,
                                  const NetworkSimOptions& options = {});

struct ContinuityReport {
  double psi = 0.0;
  double bound = 0.0;        // 2 alpha ||A||_2 psi
  double max_ratio = 0.0;    // max_k ||lambda_k - alpha Q_k|| / bound
  double max_premise_ratio = 0.0;  // max_k ||sum (x_i - y_i)|| / psi
  std::optional<std::size_t> first_violation;
  std::optional<std::size_t> first_premise_violation;
  bool holds() const { return !first_violation.has_value(); }
  bool premise_holds() const { return !first_premise_violation.has_value(); }
};

ContinuityReport queue_continuity_check(const NetworkTrajectory& trajectory, double psi);

struct StabilityReport {
  std::vector<std::pair<std::size_t, Vector>> averages;  // (k, k^-1 sum Q_i)
  double slope = 0.0;  // least-squares slope of sum_j Q_k(j) over the final half
  double tolerance = 0.0;
  bool stable = true;
};

StabilityReport stability_metric(const NetworkTrajectory& trajectory,
                                 double slope_tolerance = 1e-2);

}  // namespace pdsm
