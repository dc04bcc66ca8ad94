#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace kssl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Invalid arguments or violated preconditions.
struct input_error : std::invalid_argument {
  explicit input_error(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numerical failure (singular matrix, non-convergent quadrature, divergence).
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Problem size beyond what exhaustive enumeration supports.
struct resource_error : std::runtime_error {
  explicit resource_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw input_error(msg);
}

}  // namespace kssl
