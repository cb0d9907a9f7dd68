#include "pdsm/inner_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdsm/errors.hpp"

namespace pdsm {
namespace {

// f(x) + q^T x
class LinearlyTiltedObjective final : public SmoothFunction {
 public:
  LinearlyTiltedObjective(const Objective& f, Vector q) : f_(f), q_(std::move(q)) {}

  double value(std::span<const double> x) const override { return f_.value(x) + dot(q_, x); }
  void gradient(std::span<const double> x, std::span<double> out) const override {
    f_.gradient(x, out);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += q_[i];
  }
  std::optional<double> curvature(std::span<const double> x,
                                  std::span<const double> d) const override {
    return f_.curvature(x, d);
  }

 private:
  const Objective& f_;
  Vector q_;
};

double evaluate(const Matrix& m, const SmoothFunction& f, std::span<const double> u,
                Vector& x_scratch) {
  m.multiply(u, x_scratch);
  return f.value(x_scratch);
}

}  // namespace

SimplexSolveResult minimize_over_simplex(const Matrix& m, const SmoothFunction& f,
                                         const SimplexSolveOptions& options) {
  const std::size_t n = m.rows();
  const std::size_t v = m.cols();
  if (v == 0) throw ContractViolation("minimize_over_simplex: empty vertex set");

  Vector x(n), grad_x(n), grad_u(v), dir_u(v), dir_x(n), trial_u(v), trial_x(n);

  // Best vertex start, lowest index on ties.
  SimplexSolveResult res;
  res.u.assign(v, 0.0);
  std::size_t start = 0;
  double best = 0.0;
  {
    Vector e(v, 0.0);
    for (std::size_t j = 0; j < v; ++j) {
      e[j] = 1.0;
      const double val = evaluate(m, f, e, x);
      e[j] = 0.0;
      if (j == 0 || val < best) {
        best = val;
        start = j;
      }
    }
  }
  res.u[start] = 1.0;
  double value = evaluate(m, f, res.u, x);

  for (;;) {
    f.gradient(x, grad_x);
    m.multiply_transpose(grad_x, grad_u);

    std::size_t s = 0;
    for (std::size_t j = 1; j < v; ++j)
      if (grad_u[j] < grad_u[s]) s = j;
    const double inner = dot(grad_u, res.u);
    const double fw_gap = std::max(0.0, inner - grad_u[s]);
    res.gap = fw_gap;

    if (fw_gap <= options.gap_tol ||
        (options.value_floor && value <= *options.value_floor)) {
      res.converged = true;
      break;
    }
    if (res.iterations >= options.max_iterations) break;
    ++res.iterations;

    // Away vertex: worst active vertex, lowest index on ties.
    std::size_t a = v;
    for (std::size_t j = 0; j < v; ++j) {
      if (res.u[j] > 0.0 && (a == v || grad_u[j] > grad_u[a])) a = j;
    }
    const double away_gap = grad_u[a] - inner;

    double t_max = 1.0;
    bool away = false;
    if (fw_gap >= away_gap || res.u[a] >= 1.0) {
      for (std::size_t j = 0; j < v; ++j) dir_u[j] = -res.u[j];
      dir_u[s] += 1.0;
    } else {
      away = true;
      for (std::size_t j = 0; j < v; ++j) dir_u[j] = res.u[j];
      dir_u[a] -= 1.0;
      t_max = res.u[a] / (1.0 - res.u[a]);
    }
    const double slope = dot(grad_u, dir_u);
    if (!(slope < 0.0)) break;  // no descent direction left at this precision
    m.multiply(dir_u, dir_x);

    double t = t_max;
    if (auto curv = f.curvature(x, dir_x)) {
      if (*curv > 0.0) t = std::min(t_max, -slope / *curv);
      for (std::size_t j = 0; j < v; ++j) trial_u[j] = res.u[j] + t * dir_u[j];
    } else {
      // Armijo backtracking from the maximal step.
      for (;;) {
        for (std::size_t j = 0; j < v; ++j) trial_u[j] = res.u[j] + t * dir_u[j];
        const double trial = evaluate(m, f, trial_u, trial_x);
        if (trial <= value + 1e-4 * t * slope) break;
        t *= 0.5;
        if (t < 1e-18 * t_max) {
          t = 0.0;
          break;
        }
      }
      if (t == 0.0) break;
    }

    // Snap the endpoints so drop steps and full FW steps are exact.
    if (t == t_max) {
      if (away) {
        trial_u[a] = 0.0;
      } else {
        std::fill(trial_u.begin(), trial_u.end(), 0.0);
        trial_u[s] = 1.0;
      }
    }
    for (auto& w : trial_u)
      if (w < 0.0) w = 0.0;
    res.u = trial_u;
    value = evaluate(m, f, res.u, x);
  }

  res.x = x;
  res.value = value;
  return res;
}

double default_inner_tolerance(std::span<const double> mu) {
  return 1e-8 * (1.0 + norm2(mu));
}

InnerSolution solve_inner(const ProblemSpec& spec, std::span<const double> mu, double tol) {
  if (mu.size() != spec.num_constraints())
    throw ContractViolation("solve_inner: multiplier dimension mismatch");
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (mu[j] < 0.0) {
      std::ostringstream msg;
      msg << "solve_inner: multiplier component " << j << " is negative (" << mu[j] << ")";
      throw ContractViolation(msg.str());
    }
  }
  if (!(tol > 0.0)) throw ContractViolation("solve_inner: tolerance must be positive");

  const LinearlyTiltedObjective phi(spec.objective(),
                                    spec.constraint_matrix().multiply_transpose(mu));
  SimplexSolveOptions opts;
  opts.gap_tol = tol;
  const double cap = 10.0 * static_cast<double>(spec.num_actions()) * std::ceil(1.0 / tol);
  opts.max_iterations = static_cast<std::size_t>(std::min(cap, 1e6));

  SimplexSolveResult r = minimize_over_simplex(spec.scaled_actions(), phi, opts);
  InnerSolution out;
  out.x = std::move(r.x);
  out.u = std::move(r.u);
  out.gap_certificate = r.gap;
  out.iterations = r.iterations;
  out.converged = r.gap <= tol;
  return out;
}

InnerSolution solve_inner(const ProblemSpec& spec, std::span<const double> mu) {
  return solve_inner(spec, mu, default_inner_tolerance(mu));
}

double epsilon_from_gap(double xi, double sigma_g) {
  if (xi < 0.0) throw ContractViolation("epsilon_from_gap: negative gap");
  if (xi == 0.0) return 0.0;
  if (!(sigma_g > 0.0))
    throw ContractViolation(
        "epsilon_from_gap: a positive gap is inconsistent with a zero subgradient bound");
  return xi / (2.0 * sigma_g);
}

DualValue dual_value(const ProblemSpec& spec, std::span<const double> lambda,
                     std::span<const double> delta, double tol) {
  const InnerSolution sol = solve_inner(spec, lambda, tol);
  DualValue out;
  out.upper = eval_lagrangian(spec, sol.x, lambda, delta);
  out.gap = sol.gap_certificate;
  return out;
}

}  // namespace pdsm
