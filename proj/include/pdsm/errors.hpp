#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pdsm {

// Caller broke a documented precondition (bad dimensions, negative
// multiplier, u outside the simplex, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A point that was required to lie in a feasible set does not.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// The Slater point does not strictly satisfy every constraint.
class InvalidSlaterPoint : public std::invalid_argument {
 public:
  InvalidSlaterPoint(const std::string& what, double margin)
      : std::invalid_argument(what), margin_(margin) {}
  double margin() const noexcept { return margin_; }

 private:
  double margin_;
};

// No admissible permutation of a block exists under the transition rule.
class SchedulingInfeasible : public std::runtime_error {
 public:
  SchedulingInfeasible(const std::string& what, std::size_t action,
                       std::size_t required)
      : std::runtime_error(what), action_(action), required_(required) {}
  // Action whose count falls short and the count that would suffice.
  std::size_t action() const noexcept { return action_; }
  std::size_t required() const noexcept { return required_; }

 private:
  std::size_t action_;
  std::size_t required_;
};

// Scenario or problem configuration failed validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A runtime-checked inequality from the convergence analysis failed.
class InvariantFailure : public std::runtime_error {
 public:
  InvariantFailure(const std::string& what, std::size_t k)
      : std::runtime_error(what), k_(k) {}
  std::size_t iteration() const noexcept { return k_; }

 private:
  std::size_t k_;
};

}  // namespace pdsm
