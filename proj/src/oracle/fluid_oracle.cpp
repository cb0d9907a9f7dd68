#include "oracle/fluid_oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "pdsm/errors.hpp"

namespace pdsm::oracle {
namespace {

using Score = std::function<std::optional<double>(const Vector& u)>;

struct GridResult {
  Vector u;
  double value = std::numeric_limits<double>::infinity();
  double step = 0.0;
};

// Visits every u = i / n with nonnegative integers i summing to n.
void for_each_lattice_point(std::size_t v, std::size_t n, const std::function<void(const Vector&)>& fn) {
  std::vector<std::size_t> idx(v, 0);
  Vector u(v);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t left) {
    if (pos + 1 == v) {
      idx[pos] = left;
      for (std::size_t j = 0; j < v; ++j) u[j] = static_cast<double>(idx[j]) / static_cast<double>(n);
      fn(u);
      return;
    }
    for (std::size_t i = 0; i <= left; ++i) {
      idx[pos] = i;
      rec(pos + 1, left - i);
    }
  };
  rec(0, n);
}

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r *= static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

GridResult grid_minimize(std::size_t v, const Score& score, const OracleOptions& opt) {
  GridResult best;
  auto consider = [&](const Vector& u) {
    if (auto s = score(u); s && *s < best.value) {
      best.value = *s;
      best.u = u;
    }
  };
  if (v == 1) {
    consider(Vector{1.0});
    best.step = 0.0;
    return best;
  }

  // Coarse lattice, shrunk for large V so it stays around 2e5 points.
  std::size_t n = std::max<std::size_t>(opt.initial_divisions, 2);
  while (n > 4 && binomial(n + v - 1, v - 1) > 2e5) n /= 2;
  for_each_lattice_point(v, n, consider);
  if (best.u.empty()) throw InfeasibleError("fluid oracle: no feasible lattice point", 0.0);

  // Local refinement: offsets in {-R..R}^{V-1}, last weight closes the sum.
  const int r = opt.refine_radius;
  double h = 1.0 / static_cast<double>(n);
  std::vector<int> off(v - 1);
  Vector trial(v);
  while (h > opt.final_step) {
    h /= 4.0;
    const Vector center = best.u;
    std::fill(off.begin(), off.end(), -r);
    for (;;) {
      double moved = 0.0;
      bool ok = true;
      for (std::size_t j = 0; j + 1 < v && ok; ++j) {
        trial[j] = center[j] + h * off[j];
        moved += h * off[j];
        ok = trial[j] >= 0.0;
      }
      trial[v - 1] = center[v - 1] - moved;
      if (ok && trial[v - 1] >= 0.0) consider(trial);
      std::size_t j = 0;
      while (j + 1 < v && off[j] == r) off[j++] = -r;
      if (j + 1 == v) break;
      ++off[j];
    }
  }
  best.step = h;
  return best;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

Eigen::VectorXd to_eigen(const Vector& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Hessian by polarization of d^T H d; nullopt when curvature is unavailable.
std::optional<Eigen::MatrixXd> hessian(const Objective& f, const Vector& x) {
  const std::size_t n = x.size();
  Eigen::MatrixXd h(n, n);
  Vector d(n, 0.0);
  Vector diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.assign(n, 0.0);
    d[i] = 1.0;
    auto c = f.curvature(x, d);
    if (!c) return std::nullopt;
    diag[i] = *c;
    h(i, i) = *c;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d.assign(n, 0.0);
      d[i] = d[j] = 1.0;
      const double c = *f.curvature(x, d);
      h(i, j) = h(j, i) = 0.5 * (c - diag[i] - diag[j]);
    }
  }
  return h;
}

struct ActiveSet {
  std::vector<std::size_t> rows;   // active constraint rows
  std::vector<std::size_t> zeros;  // weights at zero
};

ActiveSet active_set(const ProblemSpec& spec, const Vector& u, const Vector& x, double tol) {
  ActiveSet s;
  const Vector g = eval_constraints(spec, x, spec.mean_perturbation());
  for (std::size_t j = 0; j < g.size(); ++j)
    if (g[j] >= -tol) s.rows.push_back(j);
  for (std::size_t j = 0; j < u.size(); ++j)
    if (u[j] <= tol) s.zeros.push_back(j);
  return s;
}

// Stationarity in weight space: M^T grad f + (A M)^T lambda - nu + eta 1 = 0
// with M = c W. Returns (lambda over all rows, residual norm).
std::pair<Vector, double> multipliers_least_squares(const ProblemSpec& spec, const Vector& x,
                                                    const ActiveSet& act) {
  const Eigen::MatrixXd m = to_eigen(spec.scaled_actions());
  const Eigen::MatrixXd am = to_eigen(spec.constraint_matrix()) * m;
  const std::size_t v = spec.num_actions();
  Vector grad(spec.dim());
  spec.objective().gradient(x, grad);
  const Eigen::VectorXd rhs = -(m.transpose() * to_eigen(grad));

  const std::size_t cols = act.rows.size() + act.zeros.size() + 1;
  Eigen::MatrixXd k(v, cols);
  std::size_t c = 0;
  for (auto r : act.rows) k.col(c++) = am.row(r).transpose();
  for (auto z : act.zeros) {
    k.col(c).setZero();
    k(z, c++) = -1.0;
  }
  k.col(c).setOnes();
  const Eigen::VectorXd sol = k.completeOrthogonalDecomposition().solve(rhs);
  Vector lambda(spec.num_constraints(), 0.0);
  for (std::size_t i = 0; i < act.rows.size(); ++i) lambda[act.rows[i]] = std::max(sol(i), 0.0);
  return {lambda, (k * sol - rhs).norm()};
}

}  // namespace

FluidSolution solve_fluid(const ProblemSpec& spec, const OracleOptions& options) {
  const Matrix& m = spec.scaled_actions();
  const Vector& delta = spec.mean_perturbation();
  const Score feasible_value = [&](const Vector& u) -> std::optional<double> {
    const Vector x = m.multiply(u);
    const Vector g = eval_constraints(spec, x, delta);
    for (double gj : g)
      if (gj > 0.0) return std::nullopt;
    return spec.objective().value(x);
  };
  const GridResult grid = grid_minimize(spec.num_actions(), feasible_value, options);

  FluidSolution out;
  out.u_star = grid.u;
  out.x_star = m.multiply(grid.u);
  out.f_star = grid.value;
  out.grid_step = grid.step;

  ActiveSet act = active_set(spec, out.u_star, out.x_star, options.active_tol);

  // Exact polish for quadratic objectives: solve the equality-constrained
  // problem on the identified active set.
  if (auto h = hessian(spec.objective(), out.x_star)) {
    const std::size_t v = spec.num_actions();
    const Eigen::MatrixXd em = to_eigen(m);
    const Eigen::MatrixXd am = to_eigen(spec.constraint_matrix()) * em;
    Vector grad(spec.dim());
    spec.objective().gradient(out.x_star, grad);
    const Eigen::VectorXd g0 = to_eigen(grad) - (*h) * to_eigen(out.x_star);
    const std::size_t na = act.rows.size(), nz = act.zeros.size();
    const std::size_t dim = v + na + nz + 1;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    kkt.topLeftCorner(v, v) = em.transpose() * (*h) * em;
    rhs.head(v) = -(em.transpose() * g0);
    for (std::size_t i = 0; i < na; ++i) {
      kkt.block(0, v + i, v, 1) = am.row(act.rows[i]).transpose();
      kkt.block(v + i, 0, 1, v) = am.row(act.rows[i]);
      rhs(v + i) = -delta[act.rows[i]];
    }
    for (std::size_t i = 0; i < nz; ++i) {
      kkt(act.zeros[i], v + na + i) = -1.0;
      kkt(v + na + i, act.zeros[i]) = 1.0;
    }
    kkt.block(0, dim - 1, v, 1).setOnes();
    kkt.block(dim - 1, 0, 1, v).setOnes();
    rhs(dim - 1) = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    const double residual = (kkt * sol - rhs).norm();

    Vector u(sol.data(), sol.data() + v);
    bool valid = residual <= 1e-9;
    for (double w : u) valid = valid && w >= -1e-12;
    for (std::size_t i = 0; i < na + nz; ++i) valid = valid && sol(v + i) >= -1e-12;
    if (valid) {
      for (auto& w : u) w = std::max(w, 0.0);
      const Vector x = m.multiply(u);
      const Vector g = eval_constraints(spec, x, delta);
      for (double gj : g) valid = valid && gj <= 1e-12;
      const double fx = spec.objective().value(x);
      valid = valid && fx <= out.f_star + 1e-9;
      if (valid) {
        out.u_star = u;
        out.x_star = x;
        out.f_star = fx;
        out.lambda_star.assign(spec.num_constraints(), 0.0);
        for (std::size_t i = 0; i < na; ++i)
          out.lambda_star[act.rows[i]] = std::max(sol(v + i), 0.0);
        out.polished = true;
        act = active_set(spec, out.u_star, out.x_star, 1e-9);
      }
    }
  }

  auto [lambda_ls, residual] = multipliers_least_squares(spec, out.x_star, act);
  if (!out.polished) out.lambda_star = lambda_ls;
  out.kkt_residual = residual;
  for (double gj : eval_constraints(spec, out.x_star, delta))
    out.max_violation = std::max(out.max_violation, gj);
  out.h_lambda_star = dual_function_grid(spec, out.lambda_star, options);
  return out;
}

double dual_function_grid(const ProblemSpec& spec, const Vector& lambda,
                          const OracleOptions& options) {
  const Matrix& m = spec.scaled_actions();
  const Vector& delta = spec.mean_perturbation();
  const Score lagrangian = [&](const Vector& u) -> std::optional<double> {
    const Vector x = m.multiply(u);
    return spec.objective().value(x) + dot(lambda, eval_constraints(spec, x, delta));
  };
  return grid_minimize(spec.num_actions(), lagrangian, options).value;
}

}  // namespace pdsm::oracle
