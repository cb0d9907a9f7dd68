#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>

#include "pdsm/linalg.hpp"

namespace pdsm {

// Tolerances for the membership predicates below. Long runs accumulate
// rounding in sums of simplex points, so these are loose on purpose.
inline constexpr double kSimplexSumTol = 1e-9;
inline constexpr double kSimplexNegTol = 1e-12;
inline constexpr double kResidualInfTol = 1e-9;

// u in U: u >= 0 and 1^T u = 1.
bool in_simplex(std::span<const double> u);
// u is (numerically) a standard basis vector; returns its index.
std::optional<std::size_t> basis_index(std::span<const double> u);
// d in D: 1^T d = 0 and ||d||_inf <= 1.
bool in_residual_set(std::span<const double> d);

// A finite set of physical actions, stored as the columns of W (n x V).
class ActionSet {
 public:
  explicit ActionSet(Matrix points);
  static ActionSet from_points(const std::vector<Vector>& points);

  std::size_t dim() const noexcept { return points_.rows(); }
  std::size_t size() const noexcept { return points_.cols(); }
  const Matrix& matrix() const noexcept { return points_; }
  Vector action(std::size_t j) const { return points_.column(j); }

  // W u
  Vector combine(std::span<const double> u) const;
  // ||W||_2, computed once.
  double spectral_norm() const noexcept { return w_norm_; }
  // Index of the origin if it is one of the actions.
  std::optional<std::size_t> zero_action() const;

 private:
  Matrix points_;
  double w_norm_ = 0.0;
};

// Convex objective over R^n. Implementations must be thread-safe for
// concurrent const calls.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual void gradient(std::span<const double> x, std::span<double> out) const = 0;
  // d^T (Hessian at x) d when the objective is quadratic; lets the inner
  // solver do an exact line search. nullopt selects Armijo backtracking.
  virtual std::optional<double> curvature(std::span<const double> x,
                                          std::span<const double> d) const {
    (void)x;
    (void)d;
    return std::nullopt;
  }
};

// f(x) = ||S x||_2^2 with S diagonal.
class DiagonalQuadratic final : public Objective {
 public:
  explicit DiagonalQuadratic(Vector diagonal);
  std::size_t dim() const override { return s_.size(); }
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  std::optional<double> curvature(std::span<const double> x,
                                  std::span<const double> d) const override;
  const Vector& diagonal() const noexcept { return s_; }

 private:
  Vector s_;
};

// The constrained problem  min f(x)  s.t.  A x + delta <= 0,  x in c*conv(Y).
class ProblemSpec {
 public:
  ProblemSpec(std::shared_ptr<const Objective> objective, Matrix constraint_matrix,
              Vector mean_perturbation, ActionSet action_set, double scale,
              std::optional<Vector> slater_point = std::nullopt);

  const Objective& objective() const noexcept { return *objective_; }
  std::shared_ptr<const Objective> objective_handle() const noexcept { return objective_; }
  const Matrix& constraint_matrix() const noexcept { return a_; }
  const Vector& mean_perturbation() const noexcept { return delta_; }
  const ActionSet& action_set() const noexcept { return actions_; }
  double scale() const noexcept { return scale_; }
  const std::optional<Vector>& slater_point() const noexcept { return slater_; }

  std::size_t num_constraints() const noexcept { return a_.rows(); }
  std::size_t dim() const noexcept { return a_.cols(); }
  std::size_t num_actions() const noexcept { return actions_.size(); }

  // c * y(j)
  Vector vertex(std::size_t j) const;
  // c * W * u
  Vector point_from_weights(std::span<const double> u) const;
  // c * W, the map from simplex weights to X.
  const Matrix& scaled_actions() const noexcept { return scaled_w_; }
  // ||A||_2, computed once.
  double constraint_norm() const noexcept { return a_norm_; }

 private:
  std::shared_ptr<const Objective> objective_;
  Matrix a_;
  Vector delta_;
  ActionSet actions_;
  double scale_;
  std::optional<Vector> slater_;
  Matrix scaled_w_;
  double a_norm_ = 0.0;
};

// A x + delta, no projection.
Vector eval_constraints(const ProblemSpec& spec, std::span<const double> x,
                        std::span<const double> delta);

// f(x) + mu^T (A x + delta). Throws ContractViolation for mu with a
// negative entry (the dual function is -inf there).
double eval_lagrangian(const ProblemSpec& spec, std::span<const double> x,
                       std::span<const double> mu, std::span<const double> delta);

// Upper bound on ||A x + delta'||_2 over x in X and every realizable
// delta' with |delta' - delta| <= delta_support_bound componentwise.
// The norm is convex, so the max over the polytope is at a vertex.
double subgradient_norm_bound(const ProblemSpec& spec,
                              std::span<const double> delta_support_bound);
double subgradient_norm_bound(const ProblemSpec& spec);

// min_j -(A xhat + delta)_j at the configured Slater point. Throws
// InvalidSlaterPoint when the margin is not strictly positive.
double slater_margin(const ProblemSpec& spec);
double slater_margin(const ProblemSpec& spec, std::span<const double> point);

}  // namespace pdsm
