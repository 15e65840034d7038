#ifndef PINVITKIT_ERRORS_HPP
#define PINVITKIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pinvitkit {

/// Vector/operator dimensions do not match.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operator was asked for a capability it does not provide
/// (exact apply, approximate apply, inverse apply).
class CapabilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operator that must be symmetric positive definite is not
/// (failed factorization, negative quadratic form, zero diagonal).
class NotSpdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iteration breakdown: the update produced a (numerically) zero vector.
class BreakdownError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative procedure exceeded its iteration cap without converging.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A supplied perturbation violates its stated budget.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid solver configuration or arguments outside the analyzed domain.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace pinvitkit

#endif
