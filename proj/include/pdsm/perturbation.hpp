#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "pdsm/linalg.hpp"

namespace pdsm {

// Uniform double in [0, 1) from the top 53 bits. Unlike the standard
// distributions this is identical across standard library implementations.
double uniform01(std::mt19937_64& rng);

struct BernoulliLaw {
  double p;
};
struct DeterministicLaw {
  double value;
};
using CoordinateLaw = std::variant<BernoulliLaw, DeterministicLaw>;

// The sequence delta_k standing in for the unknown constraint constant.
// Must be ergodic with the configured mean.
class PerturbationStream {
 public:
  enum class Kind { constant, bernoulli, custom };
  using Generator = std::function<void(std::mt19937_64&, std::span<double>)>;

  static PerturbationStream constant(Vector mean);
  static PerturbationStream bernoulli(std::vector<CoordinateLaw> laws, std::uint64_t seed);
  // `generate` must emit draws with the declared mean, variance bound
  // E||delta_k - mean||^2 <= variance_bound and |delta_k - mean| <= support.
  static PerturbationStream custom(Vector mean, double variance_bound, Vector support,
                                   std::uint64_t seed, Generator generate);

  Kind kind() const noexcept { return kind_; }
  const Vector& mean() const noexcept { return mean_; }
  double variance_bound() const noexcept { return variance_; }
  const Vector& support_bound() const noexcept { return support_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t dim() const noexcept { return mean_.size(); }
  const std::vector<CoordinateLaw>& laws() const noexcept { return laws_; }

  Vector draw();
  void draw(std::span<double> out);
  // Rewind to the first draw.
  void reset();

 private:
  PerturbationStream() = default;

  Kind kind_ = Kind::constant;
  Vector mean_;
  double variance_ = 0.0;
  Vector support_;
  std::uint64_t seed_ = 0;
  std::vector<CoordinateLaw> laws_;
  Generator generate_;
  std::mt19937_64 rng_;
};

}  // namespace pdsm
