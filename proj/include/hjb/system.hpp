#pragma once

#include <string>

#include "hjb/types.hpp"

namespace hjb {

// Bilinear control system dy/dt = A y + (N y + B) u in canonical
// (Euclidean-inner-product) coordinates, with running cost
// l(y,u) = 1/2 ||y||^2 + alpha/2 u^2.
struct BilinearSystem {
  int n = 0;
  Matrix A;
  Matrix N;
  Vector B;
  double alpha = 1.0;
  std::string label;

  void validate() const {
    if (n < 1 || A.rows() != n || A.cols() != n || N.rows() != n || N.cols() != n ||
        B.size() != n)
      throw std::invalid_argument("BilinearSystem: inconsistent shapes");
    if (!(alpha > 0)) throw std::invalid_argument("BilinearSystem: alpha must be positive");
    if (!A.allFinite() || !N.allFinite() || !B.allFinite())
      throw std::invalid_argument("BilinearSystem: non-finite entries");
  }
};

}  // namespace hjb
