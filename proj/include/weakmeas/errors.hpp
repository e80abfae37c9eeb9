#pragma once

#include <stdexcept>
#include <string>

namespace weakmeas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by a caller-supplied value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A forced measurement outcome has zero probability.
class DegenerateBranch : public Error {
 public:
  using Error::Error;
};

/// Pre- and post-selected states are orthogonal.
class SingularWeakValue : public Error {
 public:
  using Error::Error;
};

/// Process reconstruction produced a non-physical matrix.
class ReconstructionFailure : public Error {
 public:
  ReconstructionFailure(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class InfeasibleTargets : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace weakmeas
