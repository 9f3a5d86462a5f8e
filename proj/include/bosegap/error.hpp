#pragma once

#include <stdexcept>
#include <string>

namespace bosegap {

// Base of every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed configuration, violated invariant, budget exceeded.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A numerical stage failed: non-convergence, singular Gram matrix,
// complement block not invertible at the requested spectral parameter.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace bosegap
