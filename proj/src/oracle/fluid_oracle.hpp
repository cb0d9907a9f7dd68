#pragma once

#include <cstddef>

#include "pdsm/linalg.hpp"
#include "pdsm/problem.hpp"

namespace pdsm::oracle {

// Reference solution of the fluid problem, computed without the library's
// Frank-Wolfe solver: successive grid refinement over simplex weights,
// then an active-set KKT solve for the multipliers (and an exact polish
// when the objective reports curvature).
struct FluidSolution {
  Vector x_star;
  Vector u_star;
  double f_star = 0.0;
  Vector lambda_star;
  double h_lambda_star = 0.0;  // min over X of the Lagrangian at lambda*
  double kkt_residual = 0.0;   // ||stationarity residual||_2 in weight space
  double max_violation = 0.0;  // max_j (A x* + delta)_j, clipped at 0
  double grid_step = 0.0;      // final refinement step
  bool polished = false;
};

struct OracleOptions {
  double final_step = 1e-7;
  std::size_t initial_divisions = 120;
  int refine_radius = 8;
  double active_tol = 1e-5;
};

FluidSolution solve_fluid(const ProblemSpec& spec, const OracleOptions& options = {});

// min over X of f(x) + lambda^T (A x + delta) by the same grid refinement.
double dual_function_grid(const ProblemSpec& spec, const Vector& lambda,
                          const OracleOptions& options = {});

}  // namespace pdsm::oracle
