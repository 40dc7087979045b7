#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hjb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// Thrown when an iterative or direct numerical procedure fails to meet its
// accuracy contract (carries the offending residual in the message).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a linear (tensor) equation is singular or near-singular.
class SingularEquationError : public NumericalError {
 public:
  explicit SingularEquationError(const std::string& what) : NumericalError(what) {}
};

}  // namespace hjb
