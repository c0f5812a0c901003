#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace koop {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// Thrown when a caller hands us something unusable (bad shapes, bad flags,
// malformed files).  The CLI maps this to exit code 2.
struct InvalidInput : std::invalid_argument {
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when a computation fails numerically (divergence, non-convergence,
// defective matrices, non-finite values).  The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

// Axis-aligned box in state space, used for sampling initial conditions and
// Monte-Carlo integration regions.
struct Box {
  Vector lo, hi;
  Index dim() const { return lo.size(); }
  void validate() const {
    if (lo.size() != hi.size() || lo.size() == 0 || (lo.array() >= hi.array()).any())
      throw InvalidInput("Box: bounds must satisfy lo < hi componentwise");
  }
};

inline Box uniform_box(Index dim, double lo, double hi) {
  return Box{Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
}

}  // namespace koop
