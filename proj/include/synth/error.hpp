#pragma once

#include <stdexcept>
#include <string>

namespace synth {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument: out-of-domain parameter, malformed distribution,
/// dimension mismatch.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An enumeration would exceed the configured atom budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// A typical set or conditional shell turned out to be empty.
class EmptyTypicalSet : public Error {
 public:
  using Error::Error;
};

/// A linear program has no feasible point with finite cost.
class Infeasible : public Error {
 public:
  using Error::Error;
};

/// An operation's precondition was checked and does not hold.
class PreconditionViolated : public Error {
 public:
  using Error::Error;
};

/// An iterative numeric routine failed to converge.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace synth
