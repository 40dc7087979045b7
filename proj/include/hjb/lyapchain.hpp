#pragma once

#include <vector>

#include "hjb/multilinear.hpp"
#include "hjb/spectral.hpp"
#include "hjb/system.hpp"

namespace hjb {

// Value-function expansion up to degree p: Pi carries the quadratic term
// (T_2(z1,z2) = z1' Pi z2), tensors holds T_3..T_p.
struct ExpansionCoeffs {
  int n = 0;
  int degree = 2;  // p
  double alpha = 1.0;
  Matrix Pi;
  std::vector<SymTensor> tensors;  // tensors[k-3] is T_k
  Matrix closed_loop;              // A_Pi
  Spectrum spectrum;               // eigendecomposition of A_Pi

  const SymTensor& tensor(int k) const { return tensors.at(static_cast<size_t>(k) - 3); }
};

// C_i(z_1,...,z_i) = T_{i+1}(B, z_1,...,z_i).
SymTensor assembleC(const SymTensor& t_next, const Vector& B);

// G_i(z_1,...,z_i) = (1/i) sum_j T_i(z_1,...,N z_j,...,z_i); G_1 = 0.
SymTensor assembleG(const SymTensor& t_i, const Matrix& N);

// Right-hand side R_k of the generalized Lyapunov equation,
//   R_k = 2k(k-1) Sym_{1,k-1}(C_1 (x) G_{k-1})
//       + sum_{i=2}^{k-2} binom(k,i) Sym_{i,k-i}((C_i + i G_i) (x) (C_{k-i} + (k-i) G_{k-i})),
// built from Pi (= T_2) and the lower-order tensors T_3..T_{k-1}.
SymTensor assembleR(int k, const Matrix& Pi, const std::vector<SymTensor>& tensors,
                    const Matrix& N, const Vector& B);

// Solves sum_i T(z_1,...,A_Pi z_i,...,z_k) = (1/(2 alpha)) R(z_1,...,z_k)
// by transforming R into the eigenbasis of A_Pi, dividing by the eigenvalue
// sums, and transforming back.
SymTensor solveGeneralizedLyapunov(const Spectrum& spectrum, const SymTensor& R, double alpha);

// Same equation through the dense n^k x n^k Kronecker system (n^k <= 4096).
SymTensor kroneckerOracle(const Matrix& A_Pi, const SymTensor& R, double alpha);

// Same equation through the integral representation
// T = -(1/(2 alpha)) \int_0^inf R(e^{A_Pi t} z_1, ..., e^{A_Pi t} z_k) dt.
SymTensor quadratureOracle(const Spectrum& spectrum, const SymTensor& R, double alpha);

// Full recursion: T_3..T_p from the Riccati solution.
ExpansionCoeffs buildExpansion(const BilinearSystem& system, int p, const RiccatiSolution& riccati);

// Max relative defect of sum_i T_k(..., A_Pi z_i, ...) = (1/2alpha) R_k over
// `samples` random argument tuples; used by the invariant suite.
double lyapunovResidual(const SymTensor& T, const SymTensor& R, const Matrix& A_Pi, double alpha,
                        int samples, unsigned seed);

}  // namespace hjb
