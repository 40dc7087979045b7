#pragma once

#include <string>

#include "hjb/system.hpp"

namespace hjb {

// 1D Fokker-Planck control setup: rho_t = nu Lap(rho) + div(rho G') + u div(rho a')
// with no-flux boundary, discretized by a conservative finite-volume scheme,
// then projected onto the zero-mean subspace and canonicalized to Euclidean
// coordinates.
struct FPConfig {
  double x_lo = 0.0;
  double x_hi = 1.0;
  int cells = 16;         // m; reduced system has dimension m-1
  double nu = 0.1;        // diffusion
  std::string potential = "double_well";  // or "quadratic"
  double kappa = 5.0;     // potential strength
  double x_center = 0.5;  // quadratic well center
  std::string control_shape = "cosine";
  double alpha_cost = 1.0;

  void validate() const;
  double potentialG(double x) const;
  double potentialGPrime(double x) const;
  double controlShapePrime(double x) const;
};

struct FullOperators {
  Matrix A;       // m x m
  Matrix N;       // m x m
  Vector B;       // m
  Vector rho_inf; // discrete Gibbs state, h * sum = 1
  double cell_width = 0.0;
};

struct DiscretizedFP {
  FullOperators full;
  Matrix basis;           // m x (m-1), columns orthonormal in <u,v> = h u'v
  BilinearSystem reduced; // dim m-1, canonical coordinates
};

// Finite-volume operators on uniform cells with zero boundary flux:
//   F_{i+1/2} = nu (rho_{i+1}-rho_i)/h + (rho_i+rho_{i+1})/2 * G'(x_{i+1/2}),
//   (A rho)_i = (F_{i+1/2} - F_{i-1/2}) / h,
// N analogous with the control-shape derivative, B = N rho_inf.
FullOperators buildFullOperators(const FPConfig& config);

// Cell-centered Gibbs density exp(-G/nu), normalized to unit discrete mass.
// Agrees with the discrete steady state to O(h^2); the gap between the two
// is the discretization-quality measure used by the refinement tests.
Vector gibbsState(const FPConfig& config);

DiscretizedFP reduceAndCanonicalize(const FullOperators& full, const FPConfig& config);

inline DiscretizedFP buildFPSystem(const FPConfig& config) {
  return reduceAndCanonicalize(buildFullOperators(config), config);
}

// Coordinates of the zero-mean part of a full-space vector:
// reduce(y) = h * basis' * (y - h*sum(y) * rho_inf).
Vector reduceVector(const DiscretizedFP& fp, const Vector& y_full);
// Embedding back: y = basis * c (zero-mean by construction).
Vector liftVector(const DiscretizedFP& fp, const Vector& c);

}  // namespace hjb
