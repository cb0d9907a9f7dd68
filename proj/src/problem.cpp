#include "pdsm/problem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdsm/errors.hpp"

namespace pdsm {

bool in_simplex(std::span<const double> u) {
  if (u.empty()) return false;
  double total = 0.0;
  for (double v : u) {
    if (!(v >= -kSimplexNegTol)) return false;
    total += v;
  }
  return std::abs(total - 1.0) <= kSimplexSumTol;
}

std::optional<std::size_t> basis_index(std::span<const double> u) {
  if (!in_simplex(u)) return std::nullopt;
  std::optional<std::size_t> hit;
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (std::abs(u[j] - 1.0) <= kSimplexSumTol) {
      if (hit) return std::nullopt;
      hit = j;
    } else if (std::abs(u[j]) > kSimplexSumTol) {
      return std::nullopt;
    }
  }
  return hit;
}

bool in_residual_set(std::span<const double> d) {
  if (std::abs(sum(d)) > kSimplexSumTol * static_cast<double>(std::max<std::size_t>(d.size(), 1)))
    return false;
  return norm_inf(d) <= 1.0 + kResidualInfTol;
}

ActionSet::ActionSet(Matrix points) : points_(std::move(points)) {
  if (points_.cols() == 0) throw ContractViolation("action set must contain at least one action");
  for (std::size_t a = 0; a < points_.cols(); ++a) {
    for (std::size_t b = a + 1; b < points_.cols(); ++b) {
      bool same = true;
      for (std::size_t r = 0; r < points_.rows() && same; ++r)
        same = points_(r, a) == points_(r, b);
      if (same) {
        std::ostringstream msg;
        msg << "actions " << a << " and " << b << " coincide";
        throw ContractViolation(msg.str());
      }
    }
  }
  w_norm_ = pdsm::spectral_norm(points_);
}

ActionSet ActionSet::from_points(const std::vector<Vector>& points) {
  return ActionSet(Matrix::from_columns(points));
}

Vector ActionSet::combine(std::span<const double> u) const { return points_.multiply(u); }

std::optional<std::size_t> ActionSet::zero_action() const {
  for (std::size_t j = 0; j < size(); ++j) {
    bool zero = true;
    for (std::size_t r = 0; r < dim() && zero; ++r) zero = points_(r, j) == 0.0;
    if (zero) return j;
  }
  return std::nullopt;
}

DiagonalQuadratic::DiagonalQuadratic(Vector diagonal) : s_(std::move(diagonal)) {}

double DiagonalQuadratic::value(std::span<const double> x) const {
  if (x.size() != s_.size()) throw ContractViolation("objective: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < s_.size(); ++i) {
    const double t = s_[i] * x[i];
    acc += t * t;
  }
  return acc;
}

void DiagonalQuadratic::gradient(std::span<const double> x, std::span<double> out) const {
  if (x.size() != s_.size() || out.size() != s_.size())
    throw ContractViolation("objective: dimension mismatch");
  for (std::size_t i = 0; i < s_.size(); ++i) out[i] = 2.0 * s_[i] * s_[i] * x[i];
}

std::optional<double> DiagonalQuadratic::curvature(std::span<const double>,
                                                   std::span<const double> d) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < s_.size(); ++i) acc += 2.0 * s_[i] * s_[i] * d[i] * d[i];
  return acc;
}

ProblemSpec::ProblemSpec(std::shared_ptr<const Objective> objective, Matrix constraint_matrix,
                         Vector mean_perturbation, ActionSet action_set, double scale,
                         std::optional<Vector> slater_point)
    : objective_(std::move(objective)),
      a_(std::move(constraint_matrix)),
      delta_(std::move(mean_perturbation)),
      actions_(std::move(action_set)),
      scale_(scale),
      slater_(std::move(slater_point)) {
  if (!objective_) throw ContractViolation("objective handle is null");
  if (a_.rows() == 0) throw ContractViolation("constraint matrix has no rows");
  if (a_.cols() != actions_.dim())
    throw ContractViolation("constraint matrix columns must match action dimension");
  if (objective_->dim() != actions_.dim())
    throw ContractViolation("objective dimension must match action dimension");
  if (delta_.size() != a_.rows())
    throw ContractViolation("mean perturbation length must match constraint count");
  if (!(scale_ > 0.0 && scale_ <= 1.0)) throw ContractViolation("scale must lie in (0, 1]");
  if (slater_ && slater_->size() != a_.cols())
    throw ContractViolation("Slater point has the wrong dimension");
  scaled_w_ = actions_.matrix().scaled(scale_);
  a_norm_ = spectral_norm(a_);
}

Vector ProblemSpec::vertex(std::size_t j) const { return scaled_w_.column(j); }

Vector ProblemSpec::point_from_weights(std::span<const double> u) const {
  return scaled_w_.multiply(u);
}

Vector eval_constraints(const ProblemSpec& spec, std::span<const double> x,
                        std::span<const double> delta) {
  if (x.size() != spec.dim() || delta.size() != spec.num_constraints())
    throw ContractViolation("eval_constraints: dimension mismatch");
  Vector out = spec.constraint_matrix().multiply(x);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += delta[j];
  return out;
}

double eval_lagrangian(const ProblemSpec& spec, std::span<const double> x,
                       std::span<const double> mu, std::span<const double> delta) {
  if (mu.size() != spec.num_constraints())
    throw ContractViolation("eval_lagrangian: multiplier dimension mismatch");
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (mu[j] < 0.0) {
      std::ostringstream msg;
      msg << "eval_lagrangian: multiplier component " << j << " is negative (" << mu[j]
          << "); the dual function is -inf there";
      throw ContractViolation(msg.str());
    }
  }
  const Vector g = eval_constraints(spec, x, delta);
  return spec.objective().value(x) + dot(mu, g);
}

double subgradient_norm_bound(const ProblemSpec& spec,
                              std::span<const double> delta_support_bound) {
  if (delta_support_bound.size() != spec.num_constraints())
    throw ContractViolation("subgradient_norm_bound: support bound dimension mismatch");
  for (double b : delta_support_bound)
    if (b < 0.0) throw ContractViolation("subgradient_norm_bound: negative support bound");
  double best = 0.0;
  for (std::size_t j = 0; j < spec.num_actions(); ++j) {
    const Vector g = eval_constraints(spec, spec.vertex(j), spec.mean_perturbation());
    best = std::max(best, norm2(g));
  }
  return best + norm2(delta_support_bound);
}

double subgradient_norm_bound(const ProblemSpec& spec) {
  const Vector zero(spec.num_constraints(), 0.0);
  return subgradient_norm_bound(spec, zero);
}

double slater_margin(const ProblemSpec& spec, std::span<const double> point) {
  const Vector g = eval_constraints(spec, point, spec.mean_perturbation());
  double margin = -g.front();
  for (double v : g) margin = std::min(margin, -v);
  if (!(margin > 0.0)) {
    std::ostringstream msg;
    msg << "Slater point does not strictly satisfy the constraints (margin " << margin << ")";
    throw InvalidSlaterPoint(msg.str(), margin);
  }
  return margin;
}

double slater_margin(const ProblemSpec& spec) {
  if (!spec.slater_point()) throw InvalidSlaterPoint("no Slater point configured", 0.0);
  return slater_margin(spec, *spec.slater_point());
}

}  // namespace pdsm
