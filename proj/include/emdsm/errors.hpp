#pragma once

#include <stdexcept>
#include <string>

namespace emdsm {

/// Kernel evaluated at coincident points.
struct SingularityError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Points, grids or surfaces placed where an operation cannot use them.
struct GeometryError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularSystemError : std::runtime_error {
  SingularSystemError(const std::string& what, double rcond_estimate)
      : std::runtime_error(what), rcond(rcond_estimate) {}
  double rcond;
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, double final_residual, int iterations_done)
      : std::runtime_error(what), residual(final_residual), iterations(iterations_done) {}
  double residual;
  int iterations;
};

/// Bad experiment configuration; `key` names the offending JSON path.
struct ConfigError : std::runtime_error {
  ConfigError(std::string offending_key, const std::string& what)
      : std::runtime_error(offending_key + ": " + what), key(std::move(offending_key)) {}
  std::string key;
};

}  // namespace emdsm
