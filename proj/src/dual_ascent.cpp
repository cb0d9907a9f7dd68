#include "pdsm/dual_ascent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdsm/errors.hpp"

namespace pdsm {
namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Unbiased sample standard deviation; 0 for fewer than two samples.
double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Mean vector and the root of the summed per-coordinate sample variances.
std::pair<Vector, double> vector_mean_std(const std::vector<Vector>& samples) {
  const std::size_t dim = samples.front().size();
  Vector mean(dim, 0.0);
  for (const auto& s : samples) axpy(1.0, s, mean);
  for (auto& m : mean) m /= static_cast<double>(samples.size());
  double var = 0.0;
  if (samples.size() >= 2) {
    for (std::size_t j = 0; j < dim; ++j) {
      double ss = 0.0;
      for (const auto& s : samples) ss += (s[j] - mean[j]) * (s[j] - mean[j]);
      var += ss / static_cast<double>(samples.size() - 1);
    }
  }
  return {mean, std::sqrt(var)};
}

}  // namespace

DualState dual_step(DualState state, std::span<const double> subgrad) {
  if (subgrad.size() != state.lambda.size())
    throw ContractViolation("dual_step: subgradient dimension mismatch");
  for (std::size_t j = 0; j < subgrad.size(); ++j)
    state.lambda[j] = std::max(state.lambda[j] + state.alpha * subgrad[j], 0.0);
  ++state.k;
  return state;
}

DiagnosticLedger::DiagnosticLedger(const ProblemSpec& spec, double alpha, Vector lambda1,
                                   double sigma_g, double variance_bound)
    : alpha_(alpha),
      delta_(spec.mean_perturbation()),
      lambda1_(std::move(lambda1)),
      a_(spec.constraint_matrix()),
      sigma_g_(sigma_g),
      variance_bound_(variance_bound),
      x_sum_(spec.dim(), 0.0),
      lambda_sum_(spec.num_constraints(), 0.0),
      delta_dev_sum_(spec.num_constraints(), 0.0) {}

void DiagnosticLedger::record(std::span<const double> lambda_i, std::span<const double> x_i,
                              std::span<const double> delta_i, double eps_norm) {
  const std::size_t m = delta_.size();
  Vector w = a_.multiply(x_i);  // g(x_i) + delta
  axpy(1.0, delta_, w);
  double dev_sq = 0.0, dev_w = 0.0, lam_dev = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double dev = delta_i[j] - delta_[j];
    dev_sq += dev * dev;
    dev_w += dev * w[j];
    lam_dev += lambda_i[j] * dev;
    delta_dev_sum_[j] += dev;
  }
  const double w_norm = norm2(w);
  sum_a_ += w_norm * w_norm;
  sum_b_ += dev_sq;
  sum_c_ += dev_w;
  sum_d_ += eps_norm * w_norm;
  lambda_dev_dot_ += lam_dev;
  eps_sum_ += eps_norm;
  max_g_norm_ = std::max(max_g_norm_, w_norm);
  axpy(1.0, x_i, x_sum_);
  axpy(1.0, lambda_i, lambda_sum_);
  ++k_;
}

Vector DiagnosticLedger::xbar() const {
  Vector out = x_sum_;
  if (k_)
    for (auto& v : out) v /= static_cast<double>(k_);
  return out;
}

Vector DiagnosticLedger::lambdabar() const {
  Vector out = lambda_sum_;
  if (k_)
    for (auto& v : out) v /= static_cast<double>(k_);
  return out;
}

double DiagnosticLedger::gamma_a() const { return k_ ? sum_a_ / (2.0 * k_) : 0.0; }
double DiagnosticLedger::gamma_b() const { return k_ ? sum_b_ / (2.0 * k_) : 0.0; }
double DiagnosticLedger::gamma_c() const { return k_ ? sum_c_ / k_ : 0.0; }
double DiagnosticLedger::gamma_d() const { return k_ ? 2.0 * sum_d_ / k_ : 0.0; }

double DiagnosticLedger::gamma_e(std::span<const double> theta) const {
  if (!k_) return 0.0;
  // sum (lambda_i - theta)^T (delta_i - delta)
  return (lambda_dev_dot_ - dot(theta, delta_dev_sum_)) / static_cast<double>(k_);
}

double DiagnosticLedger::gamma_e() const {
  return k_ ? lambda_dev_dot_ / static_cast<double>(k_) : 0.0;
}

double DiagnosticLedger::gamma(std::span<const double> theta) const {
  return alpha_ * (gamma_a() + gamma_b() + gamma_c()) + gamma_d() + gamma_e(theta);
}

double DiagnosticLedger::omega(std::span<const double> lambda_star) const {
  const double d = norm2(subtract(lambda1_, lambda_star));
  return d * d + alpha_ * alpha_ * theta_constant() * static_cast<double>(k_) +
         2.0 * alpha_ * eps_sum_ * sigma_g_;
}

std::vector<std::size_t> default_checkpoints(std::size_t iters) {
  std::vector<std::size_t> out;
  for (std::size_t p = 1; p <= iters; p *= 10) {
    out.push_back(p);
    if (p > iters / 10) break;
  }
  if (out.empty() || out.back() != iters) out.push_back(iters);
  return out;
}

DualRun run_dual_ascent(const ProblemSpec& spec, PerturbationStream stream, double alpha,
                        std::size_t iters, MultiplierSource& source,
                        const DualAscentOptions& options) {
  if (!(alpha > 0.0)) throw ContractViolation("run_dual_ascent: alpha must be positive");
  if (iters == 0) throw ContractViolation("run_dual_ascent: iters must be at least 1");
  const std::size_t m = spec.num_constraints();
  if (stream.dim() != m)
    throw ContractViolation("run_dual_ascent: perturbation dimension mismatch");

  DualState state;
  state.lambda = options.lambda1.value_or(Vector(m, 0.0));
  if (state.lambda.size() != m)
    throw ContractViolation("run_dual_ascent: lambda_1 dimension mismatch");
  for (double l : state.lambda)
    if (l < 0.0) throw ContractViolation("run_dual_ascent: lambda_1 must be nonnegative");
  state.epsilon.assign(m, 0.0);
  state.alpha = alpha;

  const double sigma_g = options.sigma_g.value_or(subgradient_norm_bound(spec));
  std::vector<std::size_t> checkpoints =
      options.checkpoints.empty() ? default_checkpoints(iters) : options.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  auto next_cp = checkpoints.begin();

  DualRun run;
  run.ledger = DiagnosticLedger(spec, alpha, state.lambda, sigma_g, stream.variance_bound());
  if (options.record_rows) run.rows.reserve(iters);

  const Matrix& a = spec.constraint_matrix();
  Vector delta_k(m), subgrad(m), xsum(spec.dim(), 0.0);

  for (std::size_t k = 1; k <= iters; ++k) {
    state.k = k;
    const Vector mu = source.multiplier(state);
    if (mu.size() != m) throw ContractViolation("run_dual_ascent: multiplier dimension mismatch");
    for (std::size_t j = 0; j < m; ++j) {
      if (mu[j] < 0.0) {
        std::ostringstream msg;
        msg << "run_dual_ascent: mu_k has negative component " << j << " (" << mu[j]
            << ") at k = " << k;
        throw ContractViolation(msg.str());
      }
    }
    state.epsilon = subtract(mu, state.lambda);

    const InnerSolution sol = options.inner_tol ? solve_inner(spec, mu, *options.inner_tol)
                                                : solve_inner(spec, mu);
    stream.draw(delta_k);
    a.multiply(sol.x, subgrad);
    axpy(1.0, delta_k, subgrad);

    const double eps_norm =
        norm2(state.epsilon) + epsilon_from_gap(sol.gap_certificate, sigma_g);
    run.ledger.record(state.lambda, sol.x, delta_k, eps_norm);
    axpy(1.0, sol.x, xsum);

    if (options.record_rows) {
      IterationRow row;
      row.k = k;
      row.lambda = state.lambda;
      row.mu = mu;
      row.x = sol.x;
      row.delta = delta_k;
      row.eps_norm = eps_norm;
      row.inner_gap = sol.gap_certificate;
      Vector xbar = xsum;
      for (auto& v : xbar) v /= static_cast<double>(k);
      row.f_xbar = spec.objective().value(xbar);
      row.gamma_a = run.ledger.gamma_a();
      row.gamma_b = run.ledger.gamma_b();
      row.gamma_c = run.ledger.gamma_c();
      row.gamma_d = run.ledger.gamma_d();
      row.gamma_e = run.ledger.gamma_e();
      run.rows.push_back(std::move(row));
    }

    Vector pre_projection;
    if (!options.projection_checks.empty()) {
      pre_projection = state.lambda;
      axpy(alpha, subgrad, pre_projection);
    }
    state = dual_step(std::move(state), subgrad);
    for (const auto& theta : options.projection_checks) {
      const double after = norm2(subtract(state.lambda, theta));
      const double before = norm2(subtract(pre_projection, theta));
      if (after > before + 1e-12 * (1.0 + before))
        throw InvariantFailure("projection onto the nonnegative orthant expanded a distance", k);
    }
    source.observe(k, sol, delta_k);

    while (next_cp != checkpoints.end() && *next_cp == k) {
      run.checkpoints.push_back(run.ledger);
      ++next_cp;
    }
  }
  run.lambda_next = state.lambda;
  return run;
}

Lemma1Report lemma1_ledger_check(const ProblemSpec& spec, const DualRun& run,
                                 std::span<const double> theta, double h_tol) {
  if (run.checkpoints.empty()) throw ContractViolation("lemma1_ledger_check: no checkpoints");
  const std::size_t kmax = run.checkpoints.back().k();
  if (run.rows.size() < kmax)
    throw ContractViolation("lemma1_ledger_check: trajectory rows were not recorded");
  for (double t : theta)
    if (t < 0.0) throw ContractViolation("lemma1_ledger_check: theta must be nonnegative");

  const Vector& delta = spec.mean_perturbation();
  const DualValue h_theta = dual_value(spec, theta, delta, h_tol);

  Lemma1Report report;
  report.h_theta = h_theta.upper;
  double sum_upper = 0.0, sum_lower = 0.0;
  std::size_t i = 0;
  for (const auto& cp : run.checkpoints) {
    for (; i < cp.k(); ++i) {
      const DualValue h = dual_value(spec, run.rows[i].lambda, delta, h_tol);
      sum_upper += h.upper;
      sum_lower += h.lower();
    }
    const double k = static_cast<double>(cp.k());
    const double d = norm2(subtract(cp.lambda1(), theta));
    Lemma1Checkpoint c;
    c.k = cp.k();
    c.lhs = -d * d / (2.0 * cp.alpha() * k) - cp.gamma(theta);
    c.rhs_upper = sum_upper / k - h_theta.lower();
    c.rhs_lower = sum_lower / k - h_theta.upper;
    c.tolerance = 1e-6 * (1.0 + std::abs(c.rhs_upper)) + (c.rhs_upper - c.rhs_lower);
    c.holds = c.lhs <= c.rhs_lower + c.tolerance;
    if (!c.holds && !report.first_violation) report.first_violation = c.k;
    report.checkpoints.push_back(c);
  }
  return report;
}

Theorem2Certificate theorem2_bounds(const ProblemSpec& spec,
                                    std::span<const DiagnosticLedger> ledgers,
                                    const DualOracle& oracle, const SlaterInfo& slater,
                                    std::optional<Vector> loose_probe) {
  if (ledgers.empty()) throw ContractViolation("theorem2_bounds: no runs supplied");
  const DiagnosticLedger& first = ledgers.front();
  if (first.k() == 0) throw ContractViolation("theorem2_bounds: empty ledger");
  for (const auto& l : ledgers) {
    if (l.k() != first.k() || l.alpha() != first.alpha() || l.lambda1() != first.lambda1())
      throw ContractViolation("theorem2_bounds: runs differ in k, alpha or lambda_1");
  }
  if (!(slater.margin > 0.0))
    throw InvalidSlaterPoint("theorem2_bounds: Slater margin must be positive", slater.margin);

  const std::size_t r = ledgers.size();
  const double k = static_cast<double>(first.k());
  const double alpha = first.alpha();
  const double sigma_g = first.sigma_g();
  const double big_theta = first.theta_constant();

  std::vector<double> gaps, eps_sums;
  std::vector<Vector> violations, lambdabars;
  for (const auto& l : ledgers) {
    const Vector xbar = l.xbar();
    gaps.push_back(spec.objective().value(xbar) - oracle.f_star);
    violations.push_back(eval_constraints(spec, xbar, spec.mean_perturbation()));
    lambdabars.push_back(l.lambdabar());
    eps_sums.push_back(l.eps_sum());
  }
  const double eps_sum = mean_of(eps_sums);

  Theorem2Certificate cert;
  cert.k = first.k();
  cert.runs = r;
  cert.alpha = alpha;

  const double l1 = norm2(first.lambda1());
  const double d1 = norm2(subtract(first.lambda1(), oracle.lambda_star));
  const double omega = d1 * d1 + alpha * alpha * big_theta * k + 2.0 * alpha * eps_sum * sigma_g;
  const double ls = norm2(oracle.lambda_star);

  const auto [viol_mean, viol_std] = vector_mean_std(violations);
  const auto [lbar_mean, lbar_std] = vector_mean_std(lambdabars);

  cert.gap_mean = mean_of(gaps);
  cert.gap_std = sample_std(gaps);
  cert.violation_norm = norm2(positive_part(viol_mean));
  cert.violation_std = viol_std;
  cert.lambdabar_norm = norm2(lbar_mean);
  cert.lambdabar_std = lbar_std;

  const double root_r = std::sqrt(static_cast<double>(r));
  cert.slack_gap = 3.0 * cert.gap_std / root_r;
  cert.slack_violation = 3.0 * cert.violation_std / root_r;
  cert.slack_lambdabar = 3.0 * cert.lambdabar_std / root_r;

  cert.upper_i = alpha * big_theta / 2.0 + l1 * l1 / (2.0 * alpha * k) + 2.0 * eps_sum * sigma_g / k;
  cert.lower_ii = -(omega + cert.lambdabar_norm * (ls + std::sqrt(omega))) / (alpha * k);
  cert.violation_iii = (ls + std::sqrt(omega)) / (alpha * k);
  const double f_hat = spec.objective().value(slater.point);
  cert.multiplier_iv = (f_hat - oracle.h_lambda_star + omega / (alpha * k)) / slater.margin;
  if (loose_probe) {
    const double h_probe = dual_value(spec, *loose_probe, spec.mean_perturbation()).upper;
    cert.multiplier_iv_loose = (f_hat - h_probe + omega / (alpha * k)) / slater.margin;
  } else {
    cert.multiplier_iv_loose = cert.multiplier_iv;
  }

  cert.pass_i = cert.gap_mean <= cert.upper_i + cert.slack_gap;
  cert.pass_ii = cert.gap_mean >= cert.lower_ii - cert.slack_gap;
  cert.pass_iii = cert.violation_norm <= cert.violation_iii + cert.slack_violation;
  cert.pass_iv = cert.lambdabar_norm <= cert.multiplier_iv + cert.slack_lambdabar &&
                 cert.lambdabar_norm <= cert.multiplier_iv_loose + cert.slack_lambdabar;
  return cert;
}

}  // namespace pdsm
