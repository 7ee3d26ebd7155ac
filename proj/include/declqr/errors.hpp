#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace declqr {

// Input or structural problems: malformed graphs, bad shapes, violated
// preconditions. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures: non-convergent Riccati iterations, unstable loops.
// The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroDelayCycleError : public ValidationError {
 public:
  explicit ZeroDelayCycleError(std::vector<int> component);
  const std::vector<int>& component() const { return component_; }

 private:
  std::vector<int> component_;  // 0-based node ids
};

class IndexOutOfRange : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ShapeMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PreconditionViolated : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Raised by the decentralized runtime when a state it needs is not in the
// agent's visible window or memory.
class MissingState : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NoConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnstableMixedLoop : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class Unstable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace declqr
