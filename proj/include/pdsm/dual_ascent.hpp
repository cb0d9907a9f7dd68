#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pdsm/inner_solver.hpp"
#include "pdsm/linalg.hpp"
#include "pdsm/perturbation.hpp"
#include "pdsm/problem.hpp"

namespace pdsm {

struct DualState {
  Vector lambda;   // lambda_k >= 0
  Vector epsilon;  // mu_k = lambda_k + epsilon_k
  double alpha = 0.0;
  std::size_t k = 1;

  Vector mu() const { return add(lambda, epsilon); }
};

// lambda_{k+1} = [lambda_k + alpha * subgrad]^+; k advances, epsilon is
// left for the caller to set before the next primal solve.
DualState dual_step(DualState state, std::span<const double> subgrad);

// Supplies the multiplier mu_k = lambda_k + eps_k used in the primal step.
class MultiplierSource {
 public:
  virtual ~MultiplierSource() = default;
  virtual Vector multiplier(const DualState& state) = 0;
  // Called once per iteration after lambda_{k+1} has been formed.
  virtual void observe(std::size_t k, const InnerSolution& primal,
                       std::span<const double> delta_k) {
    (void)k;
    (void)primal;
    (void)delta_k;
  }
};

// eps_k = 0: the classic (possibly stochastic) dual subgradient method.
class ExactMultipliers final : public MultiplierSource {
 public:
  Vector multiplier(const DualState& state) override { return state.lambda; }
};

// eps_k from a caller-supplied sequence, treated as a fixed realization.
class InjectedPerturbation final : public MultiplierSource {
 public:
  using Sequence = std::function<Vector(std::size_t k, const Vector& lambda)>;
  explicit InjectedPerturbation(Sequence eps) : eps_(std::move(eps)) {}
  Vector multiplier(const DualState& state) override {
    return add(state.lambda, eps_(state.k, state.lambda));
  }

 private:
  Sequence eps_;
};

// Running sums behind the per-iteration convergence diagnostics.
class DiagnosticLedger {
 public:
  DiagnosticLedger() = default;
  DiagnosticLedger(const ProblemSpec& spec, double alpha, Vector lambda1, double sigma_g,
                   double variance_bound);

  // One iteration: lambda_i, x_i, delta_i and the accounted ||eps_i||_2.
  void record(std::span<const double> lambda_i, std::span<const double> x_i,
              std::span<const double> delta_i, double eps_norm);

  std::size_t k() const noexcept { return k_; }
  double alpha() const noexcept { return alpha_; }
  const Vector& lambda1() const noexcept { return lambda1_; }
  Vector xbar() const;
  Vector lambdabar() const;

  double gamma_a() const;
  double gamma_b() const;
  double gamma_c() const;
  double gamma_d() const;
  // Depends on the reference multiplier; gamma_e() uses theta = 0.
  double gamma_e(std::span<const double> theta) const;
  double gamma_e() const;
  // alpha (a + b + c) + d + e(theta)
  double gamma(std::span<const double> theta) const;

  double sigma_g() const noexcept { return sigma_g_; }
  double variance_bound() const noexcept { return variance_bound_; }
  // sigma_g^2 + sigma_delta^2
  double theta_constant() const noexcept { return sigma_g_ * sigma_g_ + variance_bound_; }
  // ||lambda_1 - lambda*||^2 + alpha^2 Theta k + 2 alpha sigma_g sum ||eps_i||
  double omega(std::span<const double> lambda_star) const;
  double eps_sum() const noexcept { return eps_sum_; }
  double eps_l1_running() const { return k_ ? eps_sum_ / static_cast<double>(k_) : 0.0; }
  // Largest ||A x_i + delta||_2 seen so far.
  double max_subgrad_norm() const noexcept { return max_g_norm_; }

 private:
  std::size_t k_ = 0;
  double alpha_ = 0.0;
  Vector delta_;
  Vector lambda1_;
  Matrix a_;
  double sigma_g_ = 0.0;
  double variance_bound_ = 0.0;

  Vector x_sum_;
  Vector lambda_sum_;
  Vector delta_dev_sum_;        // sum (delta_i - delta)
  double lambda_dev_dot_ = 0.0; // sum lambda_i^T (delta_i - delta)
  double sum_a_ = 0.0;          // sum ||g_i + delta||^2
  double sum_b_ = 0.0;          // sum ||delta_i - delta||^2
  double sum_c_ = 0.0;          // sum (delta_i - delta)^T (g_i + delta)
  double sum_d_ = 0.0;          // sum ||eps_i|| ||g_i + delta||
  double eps_sum_ = 0.0;
  double max_g_norm_ = 0.0;
};

struct IterationRow {
  std::size_t k = 0;
  Vector lambda;
  Vector mu;
  Vector x;
  Vector delta;
  double eps_norm = 0.0;  // ||mu_k - lambda_k|| + inner-gap contribution
  double inner_gap = 0.0;
  double f_xbar = 0.0;
  double gamma_a = 0.0, gamma_b = 0.0, gamma_c = 0.0, gamma_d = 0.0, gamma_e = 0.0;
};

struct DualAscentOptions {
  std::optional<Vector> lambda1;          // default 0
  std::optional<double> inner_tol;        // default 1e-8 (1 + ||mu||)
  std::optional<double> sigma_g;          // default subgradient_norm_bound(spec)
  bool record_rows = true;
  std::vector<std::size_t> checkpoints;   // default: powers of 10 up to iters
  // Assert ||lambda_{k+1} - theta|| <= ||lambda_k + alpha g_k - theta||
  // for these theta at every step.
  std::vector<Vector> projection_checks;
};

struct DualRun {
  std::vector<IterationRow> rows;
  DiagnosticLedger ledger;
  std::vector<DiagnosticLedger> checkpoints;
  Vector lambda_next;  // lambda_{iters+1}
};

// Powers of ten up to `iters`, plus `iters` itself.
std::vector<std::size_t> default_checkpoints(std::size_t iters);

// Runs the perturbed dual subgradient iteration. Throws ContractViolation
// naming the coordinate and k when mu_k has a negative entry.
DualRun run_dual_ascent(const ProblemSpec& spec, PerturbationStream stream, double alpha,
                        std::size_t iters, MultiplierSource& source,
                        const DualAscentOptions& options = {});

struct Lemma1Checkpoint {
  std::size_t k = 0;
  double lhs = 0.0;        // -||lambda_1 - theta||^2/(2 alpha k) - Gamma
  double rhs_upper = 0.0;  // using upper estimates of h
  double rhs_lower = 0.0;  // using certified lower estimates of h
  double tolerance = 0.0;
  bool holds = false;
};

struct Lemma1Report {
  std::vector<Lemma1Checkpoint> checkpoints;
  std::optional<std::size_t> first_violation;
  double h_theta = 0.0;
  bool all_hold() const { return !first_violation.has_value(); }
};

// Evaluates both sides of the Lemma-1 inequality at every ledger
// checkpoint, with h computed by inner solves at `h_tol`.
Lemma1Report lemma1_ledger_check(const ProblemSpec& spec, const DualRun& run,
                                 std::span<const double> theta, double h_tol = 1e-10);

struct DualOracle {
  Vector lambda_star;
  double f_star = 0.0;
  double h_lambda_star = 0.0;
};

struct SlaterInfo {
  Vector point;
  double margin = 0.0;
};

struct Theorem2Certificate {
  std::size_t k = 0;
  std::size_t runs = 0;
  double alpha = 0.0;

  double upper_i = 0.0;
  double lower_ii = 0.0;
  double violation_iii = 0.0;
  double multiplier_iv = 0.0;
  // Claim (iv) with h(probe) in place of h(lambda*): never smaller.
  double multiplier_iv_loose = 0.0;

  double gap_mean = 0.0;  // E f(xbar_k) - f*
  double gap_std = 0.0;
  double violation_norm = 0.0;  // ||[E(A xbar_k + delta)]^+||
  double violation_std = 0.0;
  double lambdabar_norm = 0.0;  // ||E lambdabar_k||
  double lambdabar_std = 0.0;
  double slack_gap = 0.0, slack_violation = 0.0, slack_lambdabar = 0.0;

  bool pass_i = false, pass_ii = false, pass_iii = false, pass_iv = false;
  bool all_pass() const { return pass_i && pass_ii && pass_iii && pass_iv; }
};

// Closed-form bounds from the ledgers of R independent runs (all with the
// same spec, alpha, lambda_1 and iteration count) against Monte-Carlo
// estimates, with slack 3 * sample std / sqrt(R).
Theorem2Certificate theorem2_bounds(const ProblemSpec& spec,
                                    std::span<const DiagnosticLedger> ledgers,
                                    const DualOracle& oracle, const SlaterInfo& slater,
                                    std::optional<Vector> loose_probe = std::nullopt);

}  // namespace pdsm
