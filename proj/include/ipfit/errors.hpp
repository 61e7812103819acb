#pragma once

#include <stdexcept>
#include <string>

namespace ipfit {

// Cross-product of a model matrix is numerically singular (design audit / OLS paths).
class SingularDesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Jacobian cross-product too ill-conditioned for a Gauss-Newton step.
class SingularJacobianError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model mean undefined: |theta'g(x)| fell below the floor at some data point.
class NearSingularMeanError : public std::runtime_error {
 public:
  NearSingularMeanError(const std::string& msg, long point_index)
      : std::runtime_error(msg), point_index(point_index) {}
  long point_index;
};

// Grid start found no feasible candidate (every grid point hit a singular mean).
class NoFeasibleStartError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linearized start failed because the transformed regression is rank deficient.
class SingularStartError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Too many bootstrap replicates failed to converge.
class ExcessDropError : public std::runtime_error {
 public:
  ExcessDropError(const std::string& msg, int dropped, std::string first_diagnostic)
      : std::runtime_error(msg), dropped(dropped), first_diagnostic(std::move(first_diagnostic)) {}
  int dropped;
  std::string first_diagnostic;
};

// File could not be read/written/parsed; message carries path and detail.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ipfit
