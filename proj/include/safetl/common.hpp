#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace safetl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Bad arguments: dimension mismatches, out-of-range parameters, malformed data.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A matrix that should be positive definite could not be factorized even
// after the jitter ladder was exhausted.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hyperparameter fitting produced no finite objective on any restart.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or unsupported experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace safetl
