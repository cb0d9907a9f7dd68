#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "pdsm/errors.hpp"
#include "pdsm/queue_sim.hpp"

using namespace pdsm;

TEST_CASE("queue_step arithmetic") {
  const Matrix eye = Matrix::from_rows({{1, 0}, {0, 1}});
  CHECK(queue_step(QueueState{{3, 0}}, eye, Vector{-1, 2}, Vector{0, 0}).q == QueueVector{2, 2});
  CHECK(queue_step(QueueState{{0, 0}}, eye, Vector{-1, 0}, Vector{0, -2}).q == QueueVector{0, 0});
  CHECK_THROWS_AS(queue_step(QueueState{{0, 0}}, eye, Vector{0.5, 0}, Vector{0, 0}),
                  ContractViolation);

  const ProblemSpec spec = fixtures::access_point();
  const QueueState next = queue_step(QueueState{{0, 0, 5, 0}}, spec.constraint_matrix(),
                                     spec.action_set().action(1), Vector{1, 0, -1, -1});
  CHECK(next.q == QueueVector{0, 0, 5, 0});
}

TEST_CASE("scaled queues and the multiplier update coincide bitwise") {
  const ProblemSpec spec = fixtures::access_point();
  const double alpha = std::ldexp(1.0, -7);
  std::mt19937_64 rng(9);
  QueueState q{QueueVector(4, 0)};
  DualState mu{Vector(4, 0.0), Vector(4, 0.0), alpha, 1};
  for (int k = 0; k < 20000; ++k) {
    const std::size_t a = static_cast<std::size_t>(uniform01(rng) * 3);
    const Vector y = spec.action_set().action(a);
    const Vector b{uniform01(rng) < 0.25 ? 1.0 : 0.0, uniform01(rng) < 0.5 ? 1.0 : 0.0, -1, -1};
    q = queue_step(q, spec.constraint_matrix(), y, b);
    mu = dual_step(mu, add(spec.constraint_matrix().multiply(y), b));
    for (std::size_t j = 0; j < 4; ++j) REQUIRE(mu.lambda[j] == alpha * static_cast<double>(q.q[j]));
  }
}

TEST_CASE("an empty system stays empty") {
  const ProblemSpec spec(std::make_shared<DiagonalQuadratic>(Vector{1.0, 3.0}),
                         Matrix::from_rows({{-1, 0}, {0, -1}}), Vector{0, 0},
                         ActionSet::from_points({{0, 0}, {1, 0}, {0, 1}}), 7.0 / 9.0);
  const ArrivalProcess none = ArrivalProcess::from_laws(
      {DeterministicLaw{0.0}, DeterministicLaw{0.0}}, 1);
  const NetworkTrajectory t = run_network_sim(spec, none, 0.01, 500, PolicyConfig{});
  for (const auto& row : t.slots) {
    CHECK(row.q == QueueVector{0, 0});
    CHECK(row.action == 0);
  }
  const StabilityReport s = stability_metric(t);
  for (const auto& [k, avg] : s.averages) CHECK(avg == Vector{0.0, 0.0});
  CHECK(s.slope == 0.0);
  CHECK(s.stable);
}

TEST_CASE("access-point runs respect continuity, integrality and the rule") {
  const ProblemSpec spec = fixtures::access_point();
  const ArrivalProcess arrivals = ArrivalProcess::from_laws(fixtures::access_point_laws(), 4);
  PolicyConfig block;
  block.kind = PolicyConfig::Kind::block;
  block.block_multiplier = 3;
  block.rule = AdmissibilityRule::from_forbidden(3, {{1, 2}, {2, 1}});
  PolicyConfig amortized;
  amortized.kind = PolicyConfig::Kind::amortized;
  amortized.tau_bar = 3;
  for (const PolicyConfig& policy : {PolicyConfig{}, amortized, block}) {
    CAPTURE(policy_name(policy.kind));
    const NetworkTrajectory t = run_network_sim(spec, arrivals, 0.01, 5000, policy);
    const ContinuityReport r = queue_continuity_check(t, t.psi);
    CHECK(r.holds());
    CHECK(r.premise_holds());
    CHECK(t.rule_violations == 0);
    for (const auto& row : t.slots)
      for (auto q : row.q) CHECK(q >= 0);
  }
}

TEST_CASE("the transition rule needs room in the capacity scale") {
  const ProblemSpec spec = fixtures::access_point(0.8);
  const ArrivalProcess arrivals = ArrivalProcess::from_laws(fixtures::access_point_laws(), 1);
  PolicyConfig block;
  block.kind = PolicyConfig::Kind::block;
  block.block_multiplier = 3;
  block.rule = AdmissibilityRule::from_forbidden(3, {{1, 2}, {2, 1}});
  CHECK_THROWS_AS(run_network_sim(spec, arrivals, 0.01, 10, block), ConfigError);
}

TEST_CASE("a constant action breaks the continuity premise") {
  const ProblemSpec spec = fixtures::access_point();
  const ArrivalProcess arrivals = ArrivalProcess::from_laws(fixtures::access_point_laws(), 2);
  PolicyConfig stuck;
  stuck.kind = PolicyConfig::Kind::constant;
  stuck.constant_action = 0;
  const NetworkTrajectory t = run_network_sim(spec, arrivals, 0.01, 3000, stuck);
  const ContinuityReport r = queue_continuity_check(t, certified_psi(spec, PolicyConfig{}));
  CHECK_FALSE(r.premise_holds());
}

TEST_CASE("non-integer arrivals are rejected") {
  CHECK_THROWS_AS(ArrivalProcess::from_laws({DeterministicLaw{0.5}}, 1), ContractViolation);
}
