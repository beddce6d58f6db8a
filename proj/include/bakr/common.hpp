#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace bakr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Bad parameters, flags, or preconditions. CLI exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, malformed, or dimensionally inconsistent data. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown: singular kernel, divergent chain, empty spectrum.
// CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bakr
