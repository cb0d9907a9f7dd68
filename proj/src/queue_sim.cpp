#include "pdsm/queue_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pdsm/errors.hpp"

namespace pdsm {
namespace {

bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

}  // namespace

ArrivalProcess ArrivalProcess::from_laws(std::vector<CoordinateLaw> laws, std::uint64_t seed) {
  for (const auto& law : laws) {
    if (const auto* d = std::get_if<DeterministicLaw>(&law); d && !is_integer(d->value))
      throw ContractViolation("arrival process: deterministic arrivals must be integers");
  }
  return ArrivalProcess(PerturbationStream::bernoulli(std::move(laws), seed));
}

QueueState queue_step(const QueueState& state, const Matrix& a, std::span<const double> y,
                      std::span<const double> arrivals) {
  if (state.q.size() != a.rows() || arrivals.size() != a.rows() || y.size() != a.cols())
    throw ContractViolation("queue_step: dimension mismatch");
  const Vector ay = a.multiply(y);
  QueueState next;
  next.q.resize(state.q.size());
  for (std::size_t j = 0; j < state.q.size(); ++j) {
    const double inc = ay[j] + arrivals[j];
    if (!is_integer(inc)) {
      std::ostringstream msg;
      msg << "queue_step: increment " << inc << " for queue " << j << " is not an integer";
      throw ContractViolation(msg.str());
    }
    next.q[j] = std::max<std::int64_t>(state.q[j] + static_cast<std::int64_t>(inc), 0);
  }
  return next;
}

const char* policy_name(PolicyConfig::Kind kind) {
  switch (kind) {
    case PolicyConfig::Kind::myopic:
      return "myopic";
    case PolicyConfig::Kind::amortized:
      return "amortized";
    case PolicyConfig::Kind::block:
      return "block";
    case PolicyConfig::Kind::constant:
      return "constant";
  }
  return "unknown";
}

double policy_gamma_bound(const PolicyConfig& policy, std::size_t num_actions) {
  switch (policy.kind) {
    case PolicyConfig::Kind::myopic:
      return 1.0;
    case PolicyConfig::Kind::amortized:
      return static_cast<double>(policy.tau_bar);
    case PolicyConfig::Kind::block:
      // The carried residual keeps s >= -1 once blocks are flowing; the
      // first block is padded with a single action, which can drive that
      // coordinate down by another T V.
      return 1.0 + static_cast<double>(policy.block_multiplier * num_actions);
    case PolicyConfig::Kind::constant:
      return std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::infinity();
}

double certified_psi(const ProblemSpec& spec, const PolicyConfig& policy) {
  const std::size_t v = spec.num_actions();
  return spec.action_set().spectral_norm() * policy_gamma_bound(policy, v) *
         divergence_constant(v);
}

QueueIdentification::QueueIdentification(const ProblemSpec& spec, double alpha,
                                         PolicyConfig policy, QueueVector q1)
    : spec_(spec),
      alpha_(alpha),
      policy_(std::move(policy)),
      queues_{std::move(q1)},
      zero_action_(spec.action_set().zero_action()),
      scheduler_(policy_.kind == PolicyConfig::Kind::amortized
                     ? SchedulerState::amortized(spec.num_actions(), policy_.tau_bar)
                     : SchedulerState::myopic(spec.num_actions())),
      divergence_(spec.dim(), 0.0),
      weight_divergence_(spec.num_actions(), 0.0),
      x_sum_(spec.dim(), 0.0) {
  const std::size_t v = spec.num_actions();
  if (queues_.q.size() != spec.num_constraints())
    throw ContractViolation("queue identification: Q_1 dimension mismatch");
  for (auto q : queues_.q)
    if (q < 0) throw ContractViolation("queue identification: Q_1 must be nonnegative");
  if (policy_.rule && policy_.rule->num_actions() != v)
    throw ContractViolation("queue identification: rule size differs from the action set");
  if (policy_.kind == PolicyConfig::Kind::block) block_.emplace(v, policy_.block_multiplier);
  if (policy_.kind == PolicyConfig::Kind::constant && policy_.constant_action >= v)
    throw ContractViolation("queue identification: constant action index out of range");
}

Vector QueueIdentification::multiplier(const DualState& state) {
  SlotRow row;
  row.k = state.k;
  row.q = queues_.q;
  row.lambda = state.lambda;
  Vector mu(queues_.q.size());
  for (std::size_t j = 0; j < mu.size(); ++j) mu[j] = alpha_ * static_cast<double>(queues_.q[j]);
  row.multiplier_gap = norm2(subtract(state.lambda, mu));
  row.divergence = norm2(divergence_);
  rows_.push_back(std::move(row));
  return mu;
}

Vector QueueIdentification::action_weights(const InnerSolution& primal) const {
  // x = c W u' = W (c u' + (1 - c) e_0) when the origin is an action;
  // otherwise decompose x over conv(Y) directly.
  if (zero_action_) {
    Vector u = primal.u;
    for (auto& w : u) w *= spec_.scale();
    u[*zero_action_] += 1.0 - spec_.scale();
    return u;
  }
  return decompose_to_simplex(spec_.action_set(), 1.0, primal.x);
}

std::size_t QueueIdentification::next_action(std::span<const double> u) {
  switch (policy_.kind) {
    case PolicyConfig::Kind::myopic:
      return myopic_select(scheduler_, u);
    case PolicyConfig::Kind::amortized:
      return amortized_select(scheduler_, u, scheduler_.k % policy_.tau_bar == 0);
    case PolicyConfig::Kind::constant:
      return policy_.constant_action;
    case PolicyConfig::Kind::block: {
      block_->push(u);
      // Until the first block is scheduled, idle on the zero action.
      const std::size_t action =
          emit_pos_ < emit_queue_.size() ? emit_queue_[emit_pos_++] : zero_action_.value_or(0);
      if (block_->full()) {
        std::vector<std::size_t> block = block_select(*block_);
        if (policy_.rule) block = reorder_block(block, *policy_.rule, action);
        emit_queue_ = std::move(block);
        emit_pos_ = 0;
      }
      return action;
    }
  }
  return 0;
}

void QueueIdentification::observe(std::size_t k, const InnerSolution& primal,
                                  std::span<const double> delta_k) {
  const Vector u = action_weights(primal);
  const std::size_t action = next_action(u);
  axpy(1.0, u, weight_divergence_);
  weight_divergence_[action] -= 1.0;
  if (policy_.rule && last_action_ && !policy_.rule->allows(*last_action_, action))
    ++rule_violations_;
  last_action_ = action;

  const Vector y = spec_.action_set().action(action);
  axpy(1.0, primal.x, divergence_);
  axpy(-1.0, y, divergence_);
  queues_ = queue_step(queues_, spec_.constraint_matrix(), y, delta_k);

  axpy(1.0, primal.x, x_sum_);
  Vector xbar = x_sum_;
  for (auto& v : xbar) v /= static_cast<double>(k);
  SlotRow& row = rows_.back();
  row.action = action;
  row.f_xbar = spec_.objective().value(xbar);
  row.s = weight_divergence_;
  row.gamma = -std::min(0.0, *std::min_element(weight_divergence_.begin(), weight_divergence_.end()));
}

NetworkTrajectory run_network_sim(const ProblemSpec& spec, const ArrivalProcess& arrivals,
                                  double alpha, std::size_t iters, const PolicyConfig& policy,
                                  const NetworkSimOptions& options) {
  const std::size_t m = spec.num_constraints();
  if (arrivals.dim() != m) throw ContractViolation("run_network_sim: arrival dimension mismatch");
  if (policy.kind == PolicyConfig::Kind::block && policy.rule && !policy.rule->is_unconstrained()) {
    const double cap =
        1.0 - 2.0 / static_cast<double>(policy.block_multiplier * spec.num_actions());
    if (spec.scale() > cap + 1e-12) {
      std::ostringstream msg;
      msg << "run_network_sim: scale c = " << spec.scale()
          << " exceeds 1 - 2/(T V) = " << cap << " required by the transition rule";
      throw ConfigError(msg.str());
    }
  }
  if (policy.kind == PolicyConfig::Kind::amortized && policy.tau_bar == 0)
    throw ConfigError("run_network_sim: tau_bar must be at least 1");
  if (policy.kind == PolicyConfig::Kind::block && policy.block_multiplier == 0)
    throw ConfigError("run_network_sim: block multiplier must be at least 1");

  QueueVector q1 = options.q1.value_or(QueueVector(m, 0));
  QueueIdentification source(spec, alpha, policy, q1);

  DualAscentOptions dopts;
  Vector lambda1(m);
  for (std::size_t j = 0; j < m; ++j) lambda1[j] = alpha * static_cast<double>(q1[j]);
  dopts.lambda1 = lambda1;
  dopts.record_rows = options.record_dual_rows;
  dopts.checkpoints = options.checkpoints;

  NetworkTrajectory out;
  out.alpha = alpha;
  out.policy = policy;
  out.psi = certified_psi(spec, policy);
  out.a_norm = spec.constraint_norm();
  out.dual = run_dual_ascent(spec, arrivals.stream(), alpha, iters, source, dopts);
  out.rule_violations = source.rule_violations();
  out.slots = source.take_rows();
  return out;
}

ContinuityReport queue_continuity_check(const NetworkTrajectory& trajectory, double psi) {
  if (psi < 0.0) throw ContractViolation("queue_continuity_check: psi must be nonnegative");
  ContinuityReport r;
  r.psi = psi;
  r.bound = 2.0 * trajectory.alpha * trajectory.a_norm * psi;
  const auto ratio = [](double value, double bound) {
    if (bound > 0.0) return value / bound;
    return value > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  for (const auto& row : trajectory.slots) {
    const double gap_ratio = ratio(row.multiplier_gap, r.bound);
    const double premise_ratio = ratio(row.divergence, psi);
    r.max_ratio = std::max(r.max_ratio, gap_ratio);
    r.max_premise_ratio = std::max(r.max_premise_ratio, premise_ratio);
    if (row.multiplier_gap > r.bound * (1.0 + 1e-12) + 1e-12 && !r.first_violation)
      r.first_violation = row.k;
    if (row.divergence > psi * (1.0 + 1e-12) + 1e-12 && !r.first_premise_violation)
      r.first_premise_violation = row.k;
  }
  return r;
}

StabilityReport stability_metric(const NetworkTrajectory& trajectory, double slope_tolerance) {
  StabilityReport r;
  r.tolerance = slope_tolerance;
  const auto& slots = trajectory.slots;
  if (slots.empty()) return r;
  const std::size_t m = slots.front().q.size();

  const std::vector<std::size_t> cps = default_checkpoints(slots.size());
  Vector running(m, 0.0);
  auto cp = cps.begin();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) running[j] += static_cast<double>(slots[i].q[j]);
    if (cp != cps.end() && *cp == i + 1) {
      Vector avg = running;
      for (auto& v : avg) v /= static_cast<double>(i + 1);
      r.averages.emplace_back(i + 1, std::move(avg));
      ++cp;
    }
  }

  const std::size_t start = slots.size() / 2;
  const double n = static_cast<double>(slots.size() - start);
  if (n < 2) return r;
  double mt = 0.0, my = 0.0;
  for (std::size_t i = start; i < slots.size(); ++i) {
    double total = 0.0;
    for (auto q : slots[i].q) total += static_cast<double>(q);
    mt += static_cast<double>(slots[i].k);
    my += total;
  }
  mt /= n;
  my /= n;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = start; i < slots.size(); ++i) {
    double total = 0.0;
    for (auto q : slots[i].q) total += static_cast<double>(q);
    const double dt = static_cast<double>(slots[i].k) - mt;
    stt += dt * dt;
    sty += dt * (total - my);
  }
  r.slope = sty / stt;
  r.stable = r.slope <= slope_tolerance;
  return r;
}

}  // namespace pdsm
