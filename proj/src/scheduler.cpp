#include "pdsm/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "pdsm/errors.hpp"
#include "pdsm/inner_solver.hpp"

namespace pdsm {
namespace {

constexpr double kDecompositionTol = 1e-8;

// ||target - x||_2^2
class SquaredDistance final : public SmoothFunction {
 public:
  explicit SquaredDistance(std::span<const double> target) : t_(target.begin(), target.end()) {}
  double value(std::span<const double> x) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - t_[i]) * (x[i] - t_[i]);
    return s;
  }
  void gradient(std::span<const double> x, std::span<double> out) const override {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 2.0 * (x[i] - t_[i]);
  }
  std::optional<double> curvature(std::span<const double>,
                                  std::span<const double> d) const override {
    return 2.0 * dot(d, d);
  }

 private:
  Vector t_;
};

void require_simplex(std::span<const double> u, std::size_t v, const char* who) {
  if (u.size() != v || !in_simplex(u)) {
    std::ostringstream msg;
    msg << who << ": weights must be a point of the " << v << "-action simplex";
    throw ContractViolation(msg.str());
  }
}

void apply_selection(SchedulerState& state, std::span<const double> u, std::size_t e) {
  for (std::size_t j = 0; j < state.s.size(); ++j) state.s[j] += u[j];
  state.s[e] -= 1.0;
  state.last_e = e;
  ++state.k;
}

// Depth-first construction of an admissible ordering of a multiset.
class Reorderer {
 public:
  Reorderer(const AdmissibilityRule& rule, std::vector<std::size_t> counts)
      : rule_(rule), counts_(std::move(counts)) {}

  // Fills `out` when a completion exists after `last` (V means none).
  bool build(std::size_t last, std::vector<std::size_t>& out) {
    if (!feasible(last)) return false;
    const std::size_t v = counts_.size();
    std::size_t remaining = 0;
    for (auto c : counts_) remaining += c;
    while (remaining-- > 0) {
      std::size_t pick = v;
      // Stay on the current action when that still admits a completion.
      if (last < v && counts_[last] > 0 && rule_.allows(last, last) && feasible_after(last))
        pick = last;
      for (std::size_t j = 0; j < v && pick == v; ++j) {
        if (counts_[j] == 0 || (last < v && !rule_.allows(last, j))) continue;
        if (feasible_after(j)) pick = j;
      }
      if (pick == v) return false;  // cannot happen once feasible(last) held
      --counts_[pick];
      out.push_back(pick);
      last = pick;
    }
    return true;
  }

  bool feasible(std::size_t last) {
    const std::size_t v = counts_.size();
    bool empty = true;
    for (auto c : counts_) empty = empty && c == 0;
    if (empty) return true;
    const auto key = encode(last);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    bool ok = false;
    for (std::size_t j = 0; j < v && !ok; ++j) {
      if (counts_[j] == 0 || (last < v && !rule_.allows(last, j))) continue;
      ok = feasible_after(j);
    }
    memo_.emplace(key, ok);
    return ok;
  }

 private:
  bool feasible_after(std::size_t j) {
    --counts_[j];
    const bool ok = feasible(j);
    ++counts_[j];
    return ok;
  }

  std::vector<std::size_t> encode(std::size_t last) const {
    std::vector<std::size_t> key(counts_);
    key.push_back(last);
    return key;
  }

  struct KeyHash {
    std::size_t operator()(const std::vector<std::size_t>& key) const noexcept {
      std::size_t h = 1469598103934665603ull;
      for (auto k : key) h = (h ^ k) * 1099511628211ull;
      return h;
    }
  };

  const AdmissibilityRule& rule_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::vector<std::size_t>, bool, KeyHash> memo_;
};

}  // namespace

Vector decompose_to_simplex(const ActionSet& actions, double scale, std::span<const double> x) {
  if (x.size() != actions.dim())
    throw ContractViolation("decompose_to_simplex: point dimension mismatch");
  const Matrix m = actions.matrix().scaled(scale);
  const SquaredDistance dist(x);
  SimplexSolveOptions opts;
  opts.gap_tol = 0.0;
  opts.value_floor = 1e-2 * kDecompositionTol * kDecompositionTol;
  opts.max_iterations = 100'000;
  const SimplexSolveResult r = minimize_over_simplex(m, dist, opts);
  const double residual = norm2(subtract(x, m.multiply(r.u)));
  if (residual > kDecompositionTol) {
    std::ostringstream msg;
    msg << "decompose_to_simplex: point is not in the scaled action hull (residual "
        << residual << ")";
    throw InfeasibleError(msg.str(), residual);
  }
  return r.u;
}

double divergence_constant(std::size_t num_actions) {
  const double v = static_cast<double>(num_actions);
  return std::sqrt(v) * (v - 1.0);
}

SchedulerState SchedulerState::myopic(std::size_t num_actions) {
  if (num_actions == 0) throw ContractViolation("scheduler needs at least one action");
  SchedulerState s;
  s.s.assign(num_actions, 0.0);
  return s;
}

SchedulerState SchedulerState::amortized(std::size_t num_actions, std::size_t tau_bar) {
  if (tau_bar == 0) throw ContractViolation("amortized scheduler: tau_bar must be at least 1");
  SchedulerState s = myopic(num_actions);
  s.tau_bar = tau_bar;
  return s;
}

std::size_t closest_basis_vector(std::span<const double> w) {
  // ||w - e_j||_inf = max(|w_j - 1|, max_{i != j} |w_i|); track the two
  // largest |w_i| so each candidate costs O(1).
  const std::size_t v = w.size();
  std::size_t top = 0;
  double first = -1.0, second = -1.0;
  for (std::size_t i = 0; i < v; ++i) {
    const double a = std::abs(w[i]);
    if (a > first) {
      second = first;
      first = a;
      top = i;
    } else if (a > second) {
      second = a;
    }
  }
  std::size_t best = 0;
  double best_val = 0.0;
  for (std::size_t j = 0; j < v; ++j) {
    const double others = j == top ? std::max(second, 0.0) : first;
    const double val = std::max(std::abs(w[j] - 1.0), others);
    if (j == 0 || val < best_val) {
      best_val = val;
      best = j;
    }
  }
  return best;
}

std::size_t myopic_select(SchedulerState& state, std::span<const double> u) {
  require_simplex(u, state.num_actions(), "myopic_select");
  Vector w = state.s;
  axpy(1.0, u, w);
  const std::size_t e = closest_basis_vector(w);
  apply_selection(state, u, e);
  state.steps_since_select = 0;
  return e;
}

std::size_t amortized_select(SchedulerState& state, std::span<const double> u, bool do_update) {
  if (do_update) return myopic_select(state, u);
  require_simplex(u, state.num_actions(), "amortized_select");
  if (!state.last_e)
    throw ContractViolation("amortized_select: the first step must be an update step");
  if (state.steps_since_select + 1 >= state.tau_bar) {
    std::ostringstream msg;
    msg << "amortized_select: gap between updates would exceed tau_bar = " << state.tau_bar;
    throw ContractViolation(msg.str());
  }
  apply_selection(state, u, *state.last_e);
  ++state.steps_since_select;
  return *state.last_e;
}

GammaReport gamma_monitor(const SchedulerState& state) {
  GammaReport r;
  double lowest = 0.0;
  for (double v : state.s) lowest = std::min(lowest, v);
  r.gamma = -lowest;
  r.bound = r.gamma * divergence_constant(state.num_actions());
  r.divergence = norm2(state.s);
  r.holds = r.divergence <= r.bound + 1e-9 * (1.0 + r.bound);
  return r;
}

AdmissibilityRule AdmissibilityRule::unconstrained(std::size_t num_actions) {
  return AdmissibilityRule(num_actions, true);
}

AdmissibilityRule AdmissibilityRule::from_allowed(
    std::size_t num_actions, const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  AdmissibilityRule rule(num_actions, false);
  for (const auto& [a, b] : pairs) {
    if (a >= num_actions || b >= num_actions)
      throw ContractViolation("admissibility rule: action index out of range");
    rule.allowed_[a * num_actions + b] = true;
  }
  return rule;
}

AdmissibilityRule AdmissibilityRule::from_forbidden(
    std::size_t num_actions, const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  AdmissibilityRule rule(num_actions, true);
  for (const auto& [a, b] : pairs) {
    if (a >= num_actions || b >= num_actions)
      throw ContractViolation("admissibility rule: action index out of range");
    rule.allowed_[a * num_actions + b] = false;
  }
  return rule;
}

bool AdmissibilityRule::is_unconstrained() const {
  return std::all_of(allowed_.begin(), allowed_.end(), [](bool b) { return b; });
}

std::vector<std::pair<std::size_t, std::size_t>> AdmissibilityRule::allowed_pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < v_; ++a)
    for (std::size_t b = 0; b < v_; ++b)
      if (allows(a, b)) out.emplace_back(a, b);
  return out;
}

BlockBuffer::BlockBuffer(std::size_t num_actions, std::size_t multiplier)
    : v_(num_actions), t_(multiplier), carried_(num_actions, 0.0) {
  if (num_actions == 0 || multiplier == 0)
    throw ContractViolation("block buffer needs at least one action and T >= 1");
  pending_.reserve(block_length());
}

void BlockBuffer::push(std::span<const double> u) {
  require_simplex(u, v_, "BlockBuffer::push");
  if (full()) throw ContractViolation("BlockBuffer::push: block is already full");
  pending_.emplace_back(u.begin(), u.end());
}

std::vector<std::size_t> block_select(BlockBuffer& buffer) {
  if (!buffer.full()) {
    std::ostringstream msg;
    msg << "block_select: buffer holds " << buffer.pending() << " of "
        << buffer.block_length() << " weights";
    throw ContractViolation(msg.str());
  }
  Vector r = buffer.carried_;
  for (const auto& u : buffer.pending_) axpy(1.0, u, r);
  std::vector<std::size_t> out;
  out.reserve(buffer.block_length());
  for (std::size_t i = 0; i < buffer.block_length(); ++i) {
    // Among the argmin candidates, decrease the largest component of r
    // (lowest index on ties), as in the recursion's construction.
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> dist(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) {
      r[j] -= 1.0;
      dist[j] = norm_inf(r);
      r[j] += 1.0;
      best = std::min(best, dist[j]);
    }
    std::size_t e = r.size();
    for (std::size_t j = 0; j < r.size(); ++j)
      if (dist[j] == best && (e == r.size() || r[j] > r[e])) e = j;
    r[e] -= 1.0;
    out.push_back(e);
  }
  if (!in_residual_set(r))
    throw InvariantFailure("block_select: carried residual left the set D", out.size());
  buffer.carried_ = std::move(r);
  buffer.pending_.clear();
  return out;
}

std::vector<std::size_t> reorder_block(std::span<const std::size_t> actions,
                                       const AdmissibilityRule& rule,
                                       std::optional<std::size_t> previous) {
  const std::size_t v = rule.num_actions();
  std::vector<std::size_t> counts(v, 0);
  for (auto a : actions) {
    if (a >= v) throw ContractViolation("reorder_block: action index out of range");
    ++counts[a];
  }
  if (previous && *previous >= v)
    throw ContractViolation("reorder_block: previous action index out of range");

  bool admissible = true;
  for (std::size_t i = 0; i < actions.size() && admissible; ++i) {
    if (i == 0)
      admissible = !previous || rule.allows(*previous, actions[0]);
    else
      admissible = rule.allows(actions[i - 1], actions[i]);
  }
  if (admissible) return {actions.begin(), actions.end()};

  const std::size_t start = previous.value_or(v);
  std::vector<std::size_t> out;
  out.reserve(actions.size());
  if (Reorderer(rule, counts).build(start, out)) return out;

  // Report the cheapest fix: the fewest extra copies of a single action
  // that would make the block admissible.
  std::size_t best_action = v, best_required = 0;
  for (std::size_t j = 0; j < v; ++j) {
    std::vector<std::size_t> trial = counts;
    for (std::size_t extra = 1; extra <= actions.size() + 1; ++extra) {
      ++trial[j];
      if (Reorderer(rule, trial).feasible(start)) {
        if (best_action == v || trial[j] - counts[j] < best_required - counts[best_action]) {
          best_action = j;
          best_required = trial[j];
        }
        break;
      }
    }
  }
  std::ostringstream msg;
  msg << "reorder_block: no admissible ordering";
  if (best_action < v) {
    msg << "; needs >= " << best_required << " occurrences of y(" << best_action << "), block has "
        << counts[best_action];
    throw SchedulingInfeasible(msg.str(), best_action, best_required);
  }
  throw SchedulingInfeasible(msg.str(), v, 0);
}

}  // namespace pdsm
