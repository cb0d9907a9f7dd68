#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "pdsm/errors.hpp"
#include "pdsm/problem.hpp"

using namespace pdsm;

TEST_CASE("eval_constraints is A x + delta without projection") {
  const ProblemSpec spec = fixtures::access_point();
  const Vector b = fixtures::kArrivalMean;
  CHECK(eval_constraints(spec, Vector{0, 0}, b) == b);
  CHECK(eval_constraints(spec, Vector{0, 0}, Vector(4, 0.0)) == Vector(4, 0.0));

  const Vector g = eval_constraints(spec, Vector{0.75, 1.0 / 36}, b);
  const Vector expected{-0.5, 0.5 - 1.0 / 36, -0.25, 1.0 / 36 - 1.0};
  for (std::size_t j = 0; j < 4; ++j) CHECK(g[j] == doctest::Approx(expected[j]).epsilon(1e-15));

  CHECK_THROWS_AS(eval_constraints(spec, Vector{0, 0, 0}, b), ContractViolation);
}

TEST_CASE("eval_lagrangian adds mu^T (A x + delta) and rejects negative multipliers") {
  const ProblemSpec spec = fixtures::access_point();
  const Vector b = fixtures::kArrivalMean;
  const Vector x{0.2, 0.1};
  CHECK(eval_lagrangian(spec, x, Vector(4, 0.0), b) == doctest::Approx(spec.objective().value(x)));
  CHECK(eval_lagrangian(spec, Vector{0, 0}, Vector{1, 1, 0, 0}, b) == doctest::Approx(0.75));

  const Vector xhat = *spec.slater_point();
  for (const Vector& mu : {Vector{1, 2, 3, 4}, Vector{0.5, 0, 0, 7}})
    CHECK(eval_lagrangian(spec, xhat, mu, b) <= spec.objective().value(xhat));

  CHECK_THROWS_AS(eval_lagrangian(spec, x, Vector{1, -1e-9, 0, 0}, b), ContractViolation);
}

TEST_CASE("subgradient_norm_bound is the largest vertex norm") {
  const ProblemSpec spec = fixtures::access_point();
  // Independent oracle: enumerate the three scaled vertices.
  double best = 0.0;
  for (std::size_t j = 0; j < spec.num_actions(); ++j)
    best = std::max(best, norm2(eval_constraints(spec, spec.vertex(j), spec.mean_perturbation())));
  CHECK(subgradient_norm_bound(spec) == doctest::Approx(best));
  CHECK(subgradient_norm_bound(spec) == doctest::Approx(std::sqrt(2.3125)));

  const ProblemSpec zero(std::make_shared<DiagonalQuadratic>(Vector{1.0}), Matrix::from_rows({{0}}),
                         Vector{0.0}, ActionSet::from_points({{0}}), 1.0);
  CHECK(subgradient_norm_bound(zero) == 0.0);

  const ProblemSpec single(std::make_shared<DiagonalQuadratic>(Vector{1.0}),
                           Matrix::from_rows({{0}}), Vector{1.0}, ActionSet::from_points({{0}}),
                           1.0);
  CHECK(subgradient_norm_bound(single, Vector{0.5}) == doctest::Approx(1.5));
}

TEST_CASE("slater_margin is the smallest constraint slack") {
  const ProblemSpec spec = fixtures::access_point();
  CHECK(slater_margin(spec, Vector{0.3, 0.6}) == doctest::Approx(0.05));
  CHECK_THROWS_AS(slater_margin(spec, Vector{0.25, 0.6}), InvalidSlaterPoint);

  const ProblemSpec trivial(std::make_shared<DiagonalQuadratic>(Vector{1.0}),
                            Matrix::from_rows({{0}}), Vector{-1.0}, ActionSet::from_points({{0}}),
                            1.0, Vector{0.0});
  CHECK(slater_margin(trivial) == doctest::Approx(1.0));
}

TEST_CASE("simplex and residual-set predicates") {
  CHECK(in_simplex(Vector{0.5, 0.5}));
  CHECK_FALSE(in_simplex(Vector{0.6, 0.5}));
  CHECK_FALSE(in_simplex(Vector{1.2, -0.2}));
  CHECK(basis_index(Vector{0, 1, 0}) == std::optional<std::size_t>(1));
  CHECK_FALSE(basis_index(Vector{0.5, 0.5}).has_value());
  CHECK(in_residual_set(Vector{1, -1, 0}));
  CHECK_FALSE(in_residual_set(Vector{1.5, -1.5}));
  CHECK_FALSE(in_residual_set(Vector{0.5, 0.0}));
}

TEST_CASE("the spectral norm of the incidence matrix") {
  // A^T A = 2 I, so ||A||_2 = sqrt(2).
  CHECK(fixtures::access_point().constraint_norm() == doctest::Approx(std::sqrt(2.0)));
}
