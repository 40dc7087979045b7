#pragma once

#include <optional>

#include "hjb/types.hpp"

namespace hjb {

// Dense nonsymmetric eigendecomposition A = S diag(lambda) S^{-1}.
struct Spectrum {
  ComplexVector eigenvalues;
  ComplexMatrix right_vectors;    // S
  ComplexMatrix inverse_vectors;  // S^{-1}
  double condition_estimate = 1.0;

  double spectralAbscissa() const { return eigenvalues.real().maxCoeff(); }
};

// Stabilizing solution of A'Pi + Pi A + Q - (1/alpha) Pi B B' Pi = 0.
struct RiccatiSolution {
  Matrix Pi;
  double residual_norm = 0.0;
  Matrix closed_loop;  // A - (1/alpha) B B' Pi
  int iterations = 0;
};

// Eigendecomposition with the reconstruction-residual contract
// ||A S - S diag(lambda)||_F <= 1e-10 ||A||_F.
Spectrum eig(const Matrix& A);

// Solves A'X + XB = C through the two diagonalizations. Falls back to the
// dense Kronecker solve when either basis is too ill-conditioned.
Matrix solveSylvesterDiag(const Spectrum& specA, const Spectrum& specB, const Matrix& C);

// Dense Kronecker-product solve of A'X + XB = C (n^2 unknowns); the oracle
// and the fallback path.
Matrix solveSylvesterKron(const Matrix& A, const Matrix& B, const Matrix& C);

// Newton-Kleinman iteration. K0 is an optional stabilizing feedback row;
// when omitted A itself must be stable.
RiccatiSolution solveRiccati(const Matrix& A, const Vector& B, const Matrix& Q, double alpha,
                             const std::optional<RowVector>& K0 = std::nullopt);

Matrix closedLoopMatrix(const Matrix& A, const Vector& B, const Matrix& Pi, double alpha);

}  // namespace hjb
