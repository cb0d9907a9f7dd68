// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pdsm/dual_ascent.hpp"
#include "pdsm/experiment.hpp"
#include "pdsm/queue_sim.hpp"
#include "pdsm/scheduler.hpp"

using namespace pdsm;

namespace {

// Tolerances. Invariants are exact up to floating-point bookkeeping.
constexpr double kFloatSlack = 1e-9;
constexpr double kBallRadius = 0.5;
constexpr std::size_t kSeeds = 20;
constexpr std::size_t kLemma3Slots = 20000;
constexpr std::size_t kLongSlots = 50000;
constexpr std::size_t kBallStart = 10000;
constexpr std::size_t kCertificateK = 20000;

int failures = 0;

void report(int id, const char* title, bool pass, const std::string& detail) {
  std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vector random_simplex(std::mt19937_64& rng, std::size_t v) {
  Vector u(v);
  double total = 0.0;
  for (auto& w : u) {
    w = -std::log1p(-uniform01(rng));
    total += w;
  }
  for (auto& w : u) w /= total;
  return u;
}

double min_of(const Vector& v) { return *std::min_element(v.begin(), v.end()); }
double max_of(const Vector& v) { return *std::max_element(v.begin(), v.end()); }

// 1 ----------------------------------------------------------------------

void myopic_suite() {
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  for (std::size_t v : {2u, 3u, 5u, 8u}) {
    std::mt19937_64 rng(1000 + v);
    SchedulerState s = SchedulerState::myopic(v);
    const double c = divergence_constant(v);
    for (std::size_t k = 1; k <= 1'000'000; ++k) {
      myopic_select(s, random_simplex(rng, v));
      const bool ok = min_of(s.s) >= -1.0 - kFloatSlack &&
                      max_of(s.s) <= static_cast<double>(v - 1) + kFloatSlack &&
                      norm2(s.s) <= c + kFloatSlack &&
                      std::abs(sum(s.s)) <= static_cast<double>(k) * 1e-12;
      violations += !ok;
      if (c > 0) worst_ratio = std::max(worst_ratio, norm2(s.s) / c);
    }
  }
  report(1, "myopic invariants", violations == 0,
         fmt("V in {2,3,5,8}, 1e6 steps each; %zu violations; max ||s||/C = %.3f", violations,
             worst_ratio));
}

// 2 ----------------------------------------------------------------------

bool residual_sequence_exists(const Vector& r0) {
  const std::size_t v = r0.size();
  std::vector<std::size_t> seq(v, 0);
  bool found = false;
  std::function<void(std::size_t, Vector&)> rec = [&](std::size_t pos, Vector& r) {
    if (found) return;
    if (pos == v) {
      found = in_residual_set(r);
      return;
    }
    for (std::size_t e = 0; e < v; ++e) {
      r[e] -= 1.0;
      rec(pos + 1, r);
      r[e] += 1.0;
    }
  };
  Vector r = r0;
  rec(0, r);
  return found;
}

void block_suite() {
  std::size_t residual_bad = 0, excursion_bad = 0, missing = 0, enumerated = 0;
  double worst = 0.0;
  for (std::size_t v : {2u, 3u}) {
    for (std::size_t t : {1u, 3u}) {
      std::mt19937_64 rng(2000 + 10 * v + t);
      BlockBuffer buffer(v, t);
      Vector s(v, 0.0);
      for (int block = 0; block < 1000; ++block) {
        std::vector<Vector> us;
        Vector z = buffer.carried_residual();
        for (std::size_t i = 0; i < v * t; ++i) {
          us.push_back(random_simplex(rng, v));
          buffer.push(us.back());
          axpy(1.0, us.back(), z);
        }
        if (t == 1) {
          ++enumerated;
          missing += !residual_sequence_exists(z);
        }
        const std::vector<std::size_t> es = block_select(buffer);
        residual_bad += !in_residual_set(buffer.carried_residual());
        for (std::size_t i = 0; i < es.size(); ++i) {
          axpy(1.0, us[i], s);
          s[es[i]] -= 1.0;
          worst = std::max(worst, norm_inf(s));
          excursion_bad += norm_inf(s) > 1.0 + 2.0 * static_cast<double>(v) + kFloatSlack;
        }
      }
    }
  }
  const bool pass = residual_bad == 0 && excursion_bad == 0 && missing == 0;
  report(2, "block invariants", pass,
         fmt("V in {2,3}, T in {1,3}, 1e3 blocks each; residual-not-in-D %zu, excursion>1+2V %zu "
             "(max ||s||_inf %.3f); exhaustive search found a sequence for %zu/%zu blocks",
             residual_bad, excursion_bad, worst, enumerated - missing, enumerated));
}

// 3 ----------------------------------------------------------------------

void amortized_suite() {
  std::size_t violations = 0;
  std::string ratios;
  for (std::size_t tau : {2u, 3u, 5u}) {
    std::mt19937_64 rng(3000 + tau);
    SchedulerState s = SchedulerState::amortized(3, tau);
    const double bound = static_cast<double>(tau) * divergence_constant(3);
    double worst = 0.0;
    std::size_t until_update = 0;
    for (std::size_t k = 0; k < 100000; ++k) {
      const bool update = until_update == 0;
      // Random update gaps in [1, tau].
      if (update) until_update = 1 + static_cast<std::size_t>(uniform01(rng) * tau);
      --until_update;
      amortized_select(s, random_simplex(rng, 3), update);
      violations += norm2(s.s) > bound + kFloatSlack;
      worst = std::max(worst, norm2(s.s) / bound);
    }
    ratios += fmt("%s tau=%zu: %.3f", ratios.empty() ? "" : ",", tau, worst);
  }
  report(3, "amortized bound", violations == 0,
         fmt("V = 3, 1e5 steps, random update gaps <= tau; %zu violations; max ||s||/(tau C):%s",
             violations, ratios.c_str()));
}

// Access-point runs shared by criteria 4-7 -------------------------------

struct ApRun {
  std::uint64_t seed;
  NetworkTrajectory traj;
};

struct ApData {
  ProblemSpec spec;
  OracleRecord oracle;
  PolicyConfig block;
  std::vector<ApRun> fast;  // alpha = 1e-2, block policy, long horizon
  std::vector<double> slow_gap_final;  // alpha = 1e-3, |f(xbar) - f*| at the horizon
  std::vector<double> slow_slope;
  std::vector<NetworkTrajectory> myopic;  // alpha = 1e-2, no rule
};

ApData run_access_point() {
  const ScenarioConfig config = ap_example_scenario();
  ApData d{build_problem(config), compute_oracle(config), config.policy, {}, {}, {}, {}};
  NetworkSimOptions opts;
  opts.record_dual_rows = true;
  opts.checkpoints = {100, 1000, 10000, kCertificateK, kLongSlots};
  for (std::size_t seed = 1; seed <= kSeeds; ++seed) {
    const ArrivalProcess arrivals = ArrivalProcess::from_laws(config.perturbation, seed);
    d.fast.push_back({seed, run_network_sim(d.spec, arrivals, 0.01, kLongSlots, d.block, opts)});

    NetworkSimOptions light;
    light.checkpoints = {kLongSlots};
    const NetworkTrajectory slow = run_network_sim(d.spec, arrivals, 0.001, kLongSlots, d.block, light);
    d.slow_gap_final.push_back(std::abs(slow.slots.back().f_xbar - d.oracle.f_star));
    d.slow_slope.push_back(stability_metric(slow, config.stability_tolerance).slope);

    d.myopic.push_back(run_network_sim(d.spec, arrivals, 0.01, kLemma3Slots, PolicyConfig{}, light));
  }
  return d;
}

// 4 ----------------------------------------------------------------------

void lemma3(const ApData& d) {
  std::size_t violations = 0, premise = 0, runs = 0;
  double worst = 0.0;
  auto check = [&](const NetworkTrajectory& t) {
    NetworkTrajectory head = t;
    head.slots.resize(std::min(head.slots.size(), kLemma3Slots));
    const ContinuityReport r = queue_continuity_check(head, t.psi);
    violations += !r.holds();
    premise += !r.premise_holds();
    worst = std::max(worst, r.max_ratio);
    ++runs;
  };
  for (const auto& r : d.fast) check(r.traj);
  for (const auto& t : d.myopic) check(t);
  report(4, "queue continuity", violations == 0 && premise == 0,
         fmt("%zu runs (block T=3 with rule, and myopic) x 2e4 slots, psi = ||W||_2 gamma C; "
             "%zu bound violations, %zu premise violations; max gap/bound = %.3f",
             runs, violations, premise, worst));
}

// 5 ----------------------------------------------------------------------

void lemma1(const ApData& d) {
  const Vector zero(d.spec.num_constraints(), 0.0);
  const std::vector<std::size_t> ks{100, 1000, 10000};
  std::size_t checked = 0, failed = 0;
  double worst = -std::numeric_limits<double>::infinity();
  auto check = [&](const DualRun& run) {
    for (const Vector* theta : {&zero, &d.oracle.lambda_star}) {
      const Lemma1Report rep = lemma1_ledger_check(d.spec, run, *theta);
      for (const auto& c : rep.checkpoints) {
        if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) continue;
        ++checked;
        failed += !c.holds;
        // Positive means the inequality is violated beyond its tolerance.
        worst = std::max(worst, c.lhs - c.rhs_lower - c.tolerance);
      }
    }
  };
  ExactMultipliers exact;
  DualAscentOptions opts;
  opts.checkpoints = ks;
  check(run_dual_ascent(d.spec, PerturbationStream::constant(d.spec.mean_perturbation()), 0.01,
                        10000, exact, opts));
  for (const auto& r : d.fast) check(r.traj.dual);
  report(5, "Lemma-1 inequality", failed == 0 && checked == 2 * 3 * (1 + kSeeds),
         fmt("1 deterministic + %zu stochastic runs, k in {1e2,1e3,1e4}, theta in {0, lambda*}: "
             "%zu/%zu hold; max (lhs - rhs - tol) = %.3g",
             kSeeds, checked - failed, checked, worst));
}

// 6 ----------------------------------------------------------------------

void theorem2(const ApData& d) {
  std::vector<DiagnosticLedger> ledgers;
  for (const auto& r : d.fast)
    for (const auto& l : r.traj.dual.checkpoints)
      if (l.k() == kCertificateK) ledgers.push_back(l);
  const DualOracle oracle{d.oracle.lambda_star, d.oracle.f_star, d.oracle.h_lambda_star};
  const SlaterInfo slater{*d.spec.slater_point(), slater_margin(d.spec)};
  const Theorem2Certificate c = theorem2_bounds(d.spec, ledgers, oracle, slater,
                                                Vector(d.spec.num_constraints(), 0.0));
  report(6, "Theorem-2 bounds", ledgers.size() == kSeeds && c.pass_i && c.pass_iii && c.pass_iv,
         fmt("alpha=0.01, k=2e4, R=%zu: (i) gap %.4f <= %.4f [%s]; (ii) gap >= %.4g [%s, loose]; "
             "(iii) %.3g <= %.4f [%s]; (iv) ||E lambdabar|| %.4f <= %.2f [%s] (loose %.2f); "
             "slack gap %.2g",
             ledgers.size(), c.gap_mean, c.upper_i, c.pass_i ? "ok" : "FAIL", c.lower_ii,
             c.pass_ii ? "ok" : "FAIL", c.violation_norm, c.violation_iii,
             c.pass_iii ? "ok" : "FAIL", c.lambdabar_norm, c.multiplier_iv,
             c.pass_iv ? "ok" : "FAIL", c.multiplier_iv_loose, c.slack_gap));
}

// 7 ----------------------------------------------------------------------

void reproduction(const ApData& d) {
  const double alpha = 0.01;
  bool integral = true;
  std::size_t outside = 0;
  double worst_ball = 0.0, worst_slope = -std::numeric_limits<double>::infinity();
  Vector mean_mult(2, 0.0);
  std::vector<double> fast_gap;
  for (const auto& r : d.fast) {
    double run_worst = 0.0;
    for (const auto& row : r.traj.slots) {
      for (auto q : row.q) integral = integral && q >= 0;
      if (row.k < kBallStart) continue;
      Vector diff(row.q.size());
      for (std::size_t j = 0; j < diff.size(); ++j)
        diff[j] = alpha * static_cast<double>(row.q[j]) - d.oracle.lambda_star[j];
      run_worst = std::max(run_worst, norm2(diff));
    }
    const auto& last = r.traj.slots.back();
    for (std::size_t j = 0; j < 2; ++j)
      mean_mult[j] += alpha * static_cast<double>(last.q[j]) / static_cast<double>(d.fast.size());
    outside += run_worst > kBallRadius;
    worst_ball = std::max(worst_ball, run_worst);
    worst_slope = std::max(worst_slope, stability_metric(r.traj).slope);
    fast_gap.push_back(std::abs(last.f_xbar - d.oracle.f_star));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double gap_fast = mean(fast_gap), gap_slow = mean(d.slow_gap_final);
  const bool stable = worst_slope <= 1e-2;
  const bool ball = outside == 0;
  const bool trend = gap_slow < gap_fast;
  report(7, "access-point reproduction", integral && stable && ball && trend,
         fmt("integer queues [%s]; alpha=1e-2 max Q slope %.2g [%s]; ball r=%.1f around oracle "
             "lambda*=[%.3g, %.3g] after 1e4 slots: %zu/%zu runs leave it, max dist %.3f [%s]; "
             "|f(xbar)-f*| at 5e4: alpha=1e-3 %.4f vs alpha=1e-2 %.4f [%s]; "
             "final mean alpha*Q(1:2) = [%.3f, %.3f] vs the published [2, 1]",
             integral ? "ok" : "FAIL", worst_slope, stable ? "ok" : "FAIL", kBallRadius,
             d.oracle.lambda_star[0], d.oracle.lambda_star[1], outside, d.fast.size(), worst_ball,
             ball ? "ok" : "FAIL", gap_slow, gap_fast, trend ? "ok" : "FAIL", mean_mult[0],
             mean_mult[1]));
}

// 8 ----------------------------------------------------------------------

void negative_controls(const ApData& d) {
  // Overload: total demand 1.8 exceeds the capacity 7/9.
  const ProblemSpec overload(d.spec.objective_handle(), d.spec.constraint_matrix(),
                             Vector{0.9, 0.9, -1, -1}, d.spec.action_set(), d.spec.scale());
  const ArrivalProcess heavy = ArrivalProcess::from_laws(
      {BernoulliLaw{0.9}, BernoulliLaw{0.9}, DeterministicLaw{-1}, DeterministicLaw{-1}}, 1);
  const NetworkTrajectory t = run_network_sim(overload, heavy, 0.01, kLemma3Slots, PolicyConfig{});
  const StabilityReport s = stability_metric(t);

  PolicyConfig stuck;
  stuck.kind = PolicyConfig::Kind::constant;
  stuck.constant_action = 0;
  const ArrivalProcess normal = ArrivalProcess::from_laws(
      {BernoulliLaw{0.25}, BernoulliLaw{0.5}, DeterministicLaw{-1}, DeterministicLaw{-1}}, 1);
  const NetworkTrajectory c = run_network_sim(d.spec, normal, 0.01, kLemma3Slots, stuck);
  const ContinuityReport r = queue_continuity_check(c, certified_psi(d.spec, PolicyConfig{}));

  report(8, "negative controls", !s.stable && !r.premise_holds(),
         fmt("overload slope %.3f > %.2g [%s]; constant y(0) premise ratio %.1f, first broken at "
             "k=%zu [%s]",
             s.slope, s.tolerance, s.stable ? "not flagged" : "flagged", r.max_premise_ratio,
             r.first_premise_violation.value_or(0), r.premise_holds() ? "not flagged" : "flagged"));
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  myopic_suite();
  block_suite();
  amortized_suite();
  const ApData ap = run_access_point();
  lemma3(ap);
  lemma1(ap);
  theorem2(ap);
  reproduction(ap);
  negative_controls(ap);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d of 8 criteria failed (%.0f s)\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
