#pragma once

#include <limits>
#include <stdexcept>

#include <Eigen/Core>

namespace bcn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Membership tolerance for box / affine feasibility tests.
constexpr double kFeasTol = 1e-9;

// An iterative routine failed to reach its contractual tolerance.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The requested minimization problem has no finite minimizer.
struct unbounded_error : numerical_error {
  using numerical_error::numerical_error;
};

inline double cube(double t) { return t * t * t; }

}  // namespace bcn
