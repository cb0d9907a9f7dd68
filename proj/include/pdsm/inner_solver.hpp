#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "pdsm/linalg.hpp"
#include "pdsm/problem.hpp"

namespace pdsm {

// Smooth convex function of x in R^n, minimized over {M u : u in U}.
class SmoothFunction {
 public:
  virtual ~SmoothFunction() = default;
  virtual double value(std::span<const double> x) const = 0;
  virtual void gradient(std::span<const double> x, std::span<double> out) const = 0;
  virtual std::optional<double> curvature(std::span<const double> x,
                                          std::span<const double> d) const = 0;
};

struct SimplexSolveOptions {
  double gap_tol = 1e-8;
  std::size_t max_iterations = 1'000'000;
  // Stop as soon as the objective drops to this value (used by the
  // least-squares decomposition where the optimum is known to be 0).
  std::optional<double> value_floor;
};

struct SimplexSolveResult {
  Vector u;
  Vector x;
  double value = 0.0;
  double gap = 0.0;  // Frank-Wolfe duality gap at u
  std::size_t iterations = 0;
  bool converged = false;
};

// Away-step Frank-Wolfe on phi(u) = F(M u) over the simplex. The linear
// minimization oracle is the argmin over vertices, lowest index on ties.
// Starts from the best vertex. Deterministic.
SimplexSolveResult minimize_over_simplex(const Matrix& m, const SmoothFunction& f,
                                         const SimplexSolveOptions& options);

struct InnerSolution {
  Vector x;                      // minimizer estimate, in X
  Vector u;                      // x = c W u
  double gap_certificate = 0.0;  // bounds L(x,mu) - min_X L(., mu)
  std::size_t iterations = 0;
  bool converged = false;        // false: cap hit, gap_certificate > tol
};

// 1e-8 * (1 + ||mu||_2)
double default_inner_tolerance(std::span<const double> mu);

// argmin_{x in X} f(x) + mu^T A x. The delta-dependent part of the
// Lagrangian is constant in x and is left out.
InnerSolution solve_inner(const ProblemSpec& spec, std::span<const double> mu, double tol);
InnerSolution solve_inner(const ProblemSpec& spec, std::span<const double> mu);

// Magnitude ||eps||_2 of a multiplier perturbation equivalent to an inner
// optimality gap xi: xi / (2 sigma_g).
double epsilon_from_gap(double xi, double sigma_g);

// h(lambda, delta) evaluated through an inner solve. `upper` is the
// Lagrangian at the returned point, so h lies in [upper - gap, upper].
struct DualValue {
  double upper = 0.0;
  double gap = 0.0;
  double lower() const { return upper - gap; }
};
DualValue dual_value(const ProblemSpec& spec, std::span<const double> lambda,
                     std::span<const double> delta, double tol = 1e-10);

}  // namespace pdsm
