#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "pdsm/errors.hpp"
#include "pdsm/inner_solver.hpp"

using namespace pdsm;

namespace {

// Brute-force minimum of f(x) + mu^T A x on a lattice of the simplex.
double grid_minimum(const ProblemSpec& spec, const Vector& mu, int n) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; i + j <= n; ++j) {
      const Vector u{static_cast<double>(n - i - j) / n, static_cast<double>(i) / n,
                     static_cast<double>(j) / n};
      const Vector x = spec.point_from_weights(u);
      best = std::min(best, eval_lagrangian(spec, x, mu, Vector(4, 0.0)));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("zero multiplier: the origin vertex minimizes") {
  const ProblemSpec spec = fixtures::access_point();
  const InnerSolution s = solve_inner(spec, Vector(4, 0.0), 1e-10);
  CHECK(s.x == Vector{0.0, 0.0});
  CHECK(s.gap_certificate == 0.0);
  CHECK(s.converged);
}

TEST_CASE("a face of the scaled simplex is active for mu = [2, 1, 0, 0]") {
  const ProblemSpec spec = fixtures::access_point();
  const Vector mu{2, 1, 0, 0};
  const InnerSolution s = solve_inner(spec, mu, 1e-12);
  CHECK(s.x[0] == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(s.x[1] == doctest::Approx(1.0 / 36).epsilon(1e-9));
  CHECK(s.gap_certificate <= 1e-12);

  const double value = eval_lagrangian(spec, s.x, mu, Vector(4, 0.0));
  const double grid = grid_minimum(spec, mu, 1000);
  CHECK(value <= grid + 1e-12);
  CHECK(value >= grid - 1e-5);
}

TEST_CASE("random multipliers agree with the lattice oracle") {
  const ProblemSpec spec = fixtures::access_point();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Vector mu(4);
    for (auto& m : mu) m = 5.0 * uniform01(rng);
    const InnerSolution s = solve_inner(spec, mu, 1e-10);
    const double value = eval_lagrangian(spec, s.x, mu, Vector(4, 0.0));
    const double grid = grid_minimum(spec, mu, 300);
    CHECK(value <= grid + 1e-10);
    CHECK(in_simplex(s.u));
  }
}

TEST_CASE("a flat Lagrangian returns the lowest-index vertex") {
  const ProblemSpec spec(std::make_shared<DiagonalQuadratic>(Vector{0.0, 0.0}),
                         Matrix::from_rows({{0, 0}}), Vector{0.0},
                         ActionSet::from_points({{1, 0}, {0, 1}, {0, 0}}), 1.0);
  const InnerSolution s = solve_inner(spec, Vector{1.0}, 1e-10);
  CHECK(s.u == Vector{1.0, 0.0, 0.0});
  CHECK(s.gap_certificate == 0.0);
}

TEST_CASE("inner solves are deterministic") {
  const ProblemSpec spec = fixtures::access_point();
  const Vector mu{0.3, 8.7, 0.01, 0.2};
  const InnerSolution a = solve_inner(spec, mu, 1e-9);
  const InnerSolution b = solve_inner(spec, mu, 1e-9);
  CHECK(a.x == b.x);
  CHECK(a.u == b.u);
  CHECK(a.gap_certificate == b.gap_certificate);
}

TEST_CASE("epsilon_from_gap") {
  CHECK(epsilon_from_gap(0.0, 1.5) == 0.0);
  CHECK(epsilon_from_gap(0.3, 1.5) == doctest::Approx(0.1));
  CHECK_THROWS_AS(epsilon_from_gap(0.1, 0.0), ContractViolation);

  const ProblemSpec spec = fixtures::access_point();
  const InnerSolution s = solve_inner(spec, Vector{2, 1, 0, 0}, 1e-6);
  CHECK(epsilon_from_gap(s.gap_certificate, std::sqrt(2.3125)) <= 1e-6 / (2 * 1.5207));
}

TEST_CASE("dual_value brackets h(lambda)") {
  const ProblemSpec spec = fixtures::access_point();
  const Vector lambda{0.5, 9, 0, 0};
  const DualValue h = dual_value(spec, lambda, spec.mean_perturbation());
  // h(lambda*) = f* for the fluid problem.
  CHECK(h.upper == doctest::Approx(2.3125).epsilon(1e-9));
  CHECK(h.lower() <= h.upper);
  CHECK(h.gap <= 1e-10);
}
