#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace plasticnet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Arr = Eigen::ArrayXd;
using IVec = Eigen::VectorXi;
using IMat = Eigen::MatrixXi;

// Bad user-supplied configuration or malformed input files. Maps to exit code 1.
struct param_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical degeneracy or violated model invariant detected at runtime.
// Maps to exit code 2.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace plasticnet
