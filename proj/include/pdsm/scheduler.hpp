#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pdsm/linalg.hpp"
#include "pdsm/problem.hpp"

namespace pdsm {

// Weights u in U with x = c W u, by Frank-Wolfe on min_u ||x - c W u||^2.
// Throws InfeasibleError when the residual stays above 1e-8.
Vector decompose_to_simplex(const ActionSet& actions, double scale, std::span<const double> x);

// sqrt(V) (V - 1): the uniform bound on ||sum (u_i - e_i)||_2 under the
// myopic rule.
double divergence_constant(std::size_t num_actions);

struct SchedulerState {
  Vector s;                         // sum_{i<=k} (u_i - e_i)
  std::optional<std::size_t> last_e;
  std::size_t steps_since_select = 0;  // slots since the last update step
  std::size_t tau_bar = 1;          // declared maximal gap between updates
  std::size_t k = 0;

  static SchedulerState myopic(std::size_t num_actions);
  static SchedulerState amortized(std::size_t num_actions, std::size_t tau_bar);

  std::size_t num_actions() const noexcept { return s.size(); }
};

// Index of argmin_j ||w - e_j||_inf, lowest index on ties.
std::size_t closest_basis_vector(std::span<const double> w);

// e_k = argmin_{e in E} ||s_{k-1} + u_k - e||_inf; updates the state and
// returns the selected action index.
std::size_t myopic_select(SchedulerState& state, std::span<const double> u);

// As myopic_select on update steps; otherwise repeats the previous action.
// Throws ContractViolation when the gap between updates would exceed
// tau_bar, or when the first call is not an update.
std::size_t amortized_select(SchedulerState& state, std::span<const double> u, bool do_update);

struct GammaReport {
  double gamma = 0.0;       // -min_j s_k(j)
  double bound = 0.0;       // gamma * C
  double divergence = 0.0;  // ||s_k||_2
  bool holds = true;
};
GammaReport gamma_monitor(const SchedulerState& state);

// Pairwise transition predicate over action indices.
class AdmissibilityRule {
 public:
  static AdmissibilityRule unconstrained(std::size_t num_actions);
  static AdmissibilityRule from_allowed(std::size_t num_actions,
                                        const std::vector<std::pair<std::size_t, std::size_t>>& pairs);
  static AdmissibilityRule from_forbidden(
      std::size_t num_actions, const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

  std::size_t num_actions() const noexcept { return v_; }
  bool allows(std::size_t prev, std::size_t next) const { return allowed_[prev * v_ + next]; }
  bool is_unconstrained() const;
  std::vector<std::pair<std::size_t, std::size_t>> allowed_pairs() const;

 private:
  AdmissibilityRule(std::size_t v, bool fill) : v_(v), allowed_(v * v, fill) {}
  std::size_t v_ = 0;
  std::vector<bool> allowed_;
};

// Collects T*V continuous weights and emits them as T*V discrete actions.
class BlockBuffer {
 public:
  BlockBuffer(std::size_t num_actions, std::size_t multiplier);

  std::size_t num_actions() const noexcept { return v_; }
  std::size_t multiplier() const noexcept { return t_; }
  std::size_t block_length() const noexcept { return v_ * t_; }
  std::size_t pending() const noexcept { return pending_.size(); }
  bool full() const noexcept { return pending_.size() == block_length(); }
  const Vector& carried_residual() const noexcept { return carried_; }
  const std::vector<Vector>& pending_weights() const noexcept { return pending_; }

  void push(std::span<const double> u);

 private:
  friend std::vector<std::size_t> block_select(BlockBuffer& buffer);
  std::size_t v_;
  std::size_t t_;
  std::vector<Vector> pending_;
  Vector carried_;
};

// Greedy recursion on z = sum of the pending weights, seeded with the
// carried residual d: e_i = argmin_e ||(d + z - sum_{l<i} e_l) - e||_inf.
// Replaces d with d + z - z' (in D) and clears the pending weights.
std::vector<std::size_t> block_select(BlockBuffer& buffer);

// Permutation of a block in which every adjacent pair, including
// (previous, first), is allowed by the rule. Already admissible blocks are
// returned unchanged; otherwise runs are formed by staying on the current
// action when that still admits a completion, else moving to the lowest
// admissible index. Throws SchedulingInfeasible naming the shortfall.
std::vector<std::size_t> reorder_block(std::span<const std::size_t> actions,
                                       const AdmissibilityRule& rule,
                                       std::optional<std::size_t> previous = std::nullopt);

}  // namespace pdsm
