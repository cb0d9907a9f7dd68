#pragma once

#include <memory>
#include <random>

#include "pdsm/linalg.hpp"
#include "pdsm/perturbation.hpp"
#include "pdsm/problem.hpp"

namespace fixtures {

inline const pdsm::Vector kArrivalMean{0.25, 0.5, -1.0, -1.0};

// Two links behind one access point: f(x) = x1^2 + 9 x2^2, queues for
// both links plus two unit-capacity service constraints.
inline pdsm::ProblemSpec access_point(double scale = 7.0 / 9.0) {
  return pdsm::ProblemSpec(std::make_shared<pdsm::DiagonalQuadratic>(pdsm::Vector{1.0, 3.0}),
                           pdsm::Matrix::from_rows({{-1, 0}, {0, -1}, {1, 0}, {0, 1}}),
                           kArrivalMean,
                           pdsm::ActionSet::from_points({{0, 0}, {1, 0}, {0, 1}}), scale,
                           pdsm::Vector{0.263, 0.513});
}

inline std::vector<pdsm::CoordinateLaw> access_point_laws() {
  return {pdsm::BernoulliLaw{0.25}, pdsm::BernoulliLaw{0.5}, pdsm::DeterministicLaw{-1.0},
          pdsm::DeterministicLaw{-1.0}};
}

// Uniform point on the simplex (normalized exponentials).
inline pdsm::Vector random_simplex(std::mt19937_64& rng, std::size_t v) {
  pdsm::Vector u(v);
  double total = 0.0;
  for (auto& w : u) {
    w = -std::log1p(-pdsm::uniform01(rng));
    total += w;
  }
  for (auto& w : u) w /= total;
  return u;
}

}  // namespace fixtures
