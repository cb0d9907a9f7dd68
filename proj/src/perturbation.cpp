#include "pdsm/perturbation.hpp"

#include <algorithm>

#include "pdsm/errors.hpp"

namespace pdsm {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

PerturbationStream PerturbationStream::constant(Vector mean) {
  PerturbationStream s;
  s.kind_ = Kind::constant;
  s.support_.assign(mean.size(), 0.0);
  for (double v : mean) s.laws_.emplace_back(DeterministicLaw{v});
  s.mean_ = std::move(mean);
  return s;
}

PerturbationStream PerturbationStream::bernoulli(std::vector<CoordinateLaw> laws,
                                                 std::uint64_t seed) {
  PerturbationStream s;
  s.kind_ = Kind::bernoulli;
  s.seed_ = seed;
  s.rng_.seed(seed);
  for (const auto& law : laws) {
    if (const auto* b = std::get_if<BernoulliLaw>(&law)) {
      if (!(b->p >= 0.0 && b->p <= 1.0))
        throw ContractViolation("Bernoulli probability must lie in [0, 1]");
      s.mean_.push_back(b->p);
      s.variance_ += b->p * (1.0 - b->p);
      s.support_.push_back(std::max(b->p, 1.0 - b->p));
    } else {
      s.mean_.push_back(std::get<DeterministicLaw>(law).value);
      s.support_.push_back(0.0);
    }
  }
  s.laws_ = std::move(laws);
  return s;
}

PerturbationStream PerturbationStream::custom(Vector mean, double variance_bound,
                                              Vector support, std::uint64_t seed,
                                              Generator generate) {
  if (!generate) throw ContractViolation("custom perturbation stream needs a generator");
  if (support.size() != mean.size())
    throw ContractViolation("support bound dimension must match mean");
  if (variance_bound < 0.0) throw ContractViolation("variance bound must be nonnegative");
  PerturbationStream s;
  s.kind_ = Kind::custom;
  s.mean_ = std::move(mean);
  s.variance_ = variance_bound;
  s.support_ = std::move(support);
  s.seed_ = seed;
  s.rng_.seed(seed);
  s.generate_ = std::move(generate);
  return s;
}

Vector PerturbationStream::draw() {
  Vector out(mean_.size());
  draw(out);
  return out;
}

void PerturbationStream::draw(std::span<double> out) {
  if (out.size() != mean_.size()) throw ContractViolation("perturbation draw: dimension mismatch");
  switch (kind_) {
    case Kind::constant:
      std::copy(mean_.begin(), mean_.end(), out.begin());
      return;
    case Kind::bernoulli:
      for (std::size_t j = 0; j < laws_.size(); ++j) {
        if (const auto* b = std::get_if<BernoulliLaw>(&laws_[j])) {
          out[j] = uniform01(rng_) < b->p ? 1.0 : 0.0;
        } else {
          out[j] = std::get<DeterministicLaw>(laws_[j]).value;
        }
      }
      return;
    case Kind::custom:
      generate_(rng_, out);
      return;
  }
}

void PerturbationStream::reset() { rng_.seed(seed_); }

}  // namespace pdsm
