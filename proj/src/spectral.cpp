#include "hjb/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace hjb {

namespace {

constexpr double kDiagConditionLimit = 1e8;

void checkSquare(const Matrix& A, const char* what) {
  if (A.rows() != A.cols()) throw std::invalid_argument(std::string(what) + ": matrix not square");
  if (!A.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

}  // namespace

Spectrum eig(const Matrix& A) {
  checkSquare(A, "eig");
  Eigen::EigenSolver<Matrix> solver(A);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eig: QR iteration did not converge");
  Spectrum s;
  s.eigenvalues = solver.eigenvalues();
  s.right_vectors = solver.eigenvectors();
  Eigen::FullPivLU<ComplexMatrix> lu(s.right_vectors);
  if (!lu.isInvertible()) throw NumericalError("eig: eigenvector matrix is singular");
  s.inverse_vectors = lu.inverse();
  s.condition_estimate =
      std::max(1.0, s.right_vectors.norm() * s.inverse_vectors.norm());

  const double anorm = A.norm();
  const double resid =
      (A.cast<std::complex<double>>() * s.right_vectors -
       s.right_vectors * s.eigenvalues.asDiagonal())
          .norm();
  if (anorm > 0 && resid > 1e-10 * anorm) {
    std::ostringstream msg;
    msg << "eig: reconstruction residual " << resid << " exceeds 1e-10*||A|| = " << 1e-10 * anorm;
    throw NumericalError(msg.str());
  }
  return s;
}

Matrix solveSylvesterKron(const Matrix& A, const Matrix& B, const Matrix& C) {
  checkSquare(A, "solveSylvesterKron");
  checkSquare(B, "solveSylvesterKron");
  const Eigen::Index n = A.rows();
  if (B.rows() != n || C.rows() != n || C.cols() != n)
    throw std::invalid_argument("solveSylvesterKron: shape mismatch");
  // vec is row-major here (row index slow), so A'X + XB = C becomes
  // (A' (x) I + I (x) B') vec(X) = vec(C).
  Matrix M = Matrix::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index l = 0; l < n; ++l) M(i * n + j, l * n + j) += A(l, i);
      for (Eigen::Index l = 0; l < n; ++l) M(i * n + j, i * n + l) += B(l, j);
    }
  Vector rhs(n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) rhs[i * n + j] = C(i, j);
  Eigen::PartialPivLU<Matrix> lu(M);
  Vector x = lu.solve(rhs);
  if (!x.allFinite() || (M * x - rhs).norm() > 1e-9 * std::max(1.0, rhs.norm()))
    throw SingularEquationError("solveSylvesterKron: system singular or badly conditioned");
  Matrix X(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) X(i, j) = x[i * n + j];
  return X;
}

Matrix solveSylvesterDiag(const Spectrum& specA, const Spectrum& specB, const Matrix& C) {
  const Eigen::Index n = specA.eigenvalues.size();
  const Eigen::Index m = specB.eigenvalues.size();
  if (C.rows() != n || C.cols() != m)
    throw std::invalid_argument("solveSylvesterDiag: shape mismatch");

  const double scale = specA.eigenvalues.cwiseAbs().maxCoeff() +
                       specB.eigenvalues.cwiseAbs().maxCoeff();
  ComplexMatrix Ct = specA.right_vectors.transpose() * C.cast<std::complex<double>>() *
                     specB.right_vectors;
  ComplexMatrix Xt(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const std::complex<double> denom = specA.eigenvalues[i] + specB.eigenvalues[j];
      if (std::abs(denom) <= 1e-12 * scale)
        throw SingularEquationError("solveSylvesterDiag: eigenvalue sum near zero");
      Xt(i, j) = Ct(i, j) / denom;
    }
  ComplexMatrix X = specA.inverse_vectors.transpose() * Xt * specB.inverse_vectors;
  return X.real();
}

Matrix closedLoopMatrix(const Matrix& A, const Vector& B, const Matrix& Pi, double alpha) {
  checkSquare(A, "closedLoopMatrix");
  if (B.size() != A.rows() || Pi.rows() != A.rows() || Pi.cols() != A.cols())
    throw std::invalid_argument("closedLoopMatrix: shape mismatch");
  return A - (1.0 / alpha) * B * (B.transpose() * Pi);
}

namespace {

// A'X + XA = C for stable A, diagonalization path with Kronecker fallback.
Matrix solveLyapunov(const Matrix& A, const Matrix& C) {
  Spectrum spec = eig(A);
  if (spec.condition_estimate <= kDiagConditionLimit)
    return solveSylvesterDiag(spec, spec, C);
  return solveSylvesterKron(A, A, C);
}

}  // namespace

RiccatiSolution solveRiccati(const Matrix& A, const Vector& B, const Matrix& Q, double alpha,
                             const std::optional<RowVector>& K0) {
  checkSquare(A, "solveRiccati");
  checkSquare(Q, "solveRiccati");
  const Eigen::Index n = A.rows();
  if (B.size() != n) throw std::invalid_argument("solveRiccati: B size mismatch");
  if (alpha <= 0) throw std::invalid_argument("solveRiccati: alpha must be positive");

  RowVector K = K0.value_or(RowVector::Zero(n));
  {
    const Matrix Acl0 = A - B * K;
    if (eig(Acl0).spectralAbscissa() >= 0)
      throw std::invalid_argument(
          K0 ? "solveRiccati: supplied K0 is not stabilizing"
             : "solveRiccati: A is unstable and no stabilizing K0 was supplied");
  }

  Matrix Pi = Matrix::Zero(n, n);
  int iterations = 0;
  double prev_change = std::numeric_limits<double>::infinity();
  for (int j = 0; j < 100; ++j) {
    const Matrix Acl = A - B * K;
    const Matrix rhs = -(Q + alpha * K.transpose() * K);
    Matrix PiNext = solveLyapunov(Acl, rhs);
    PiNext = 0.5 * (PiNext + PiNext.transpose()).eval();
    const double change = (PiNext - Pi).norm();
    Pi = PiNext;
    K = (1.0 / alpha) * (B.transpose() * Pi);
    iterations = j + 1;
    if (change <= 1e-12 * std::max(1.0, Pi.norm())) break;
    if (j > 2 && change >= prev_change && change <= 1e-10 * std::max(1.0, Pi.norm()))
      break;  // stalled at roundoff level
    prev_change = change;
  }

  // Defect correction: the Newton iteration stalls at the Lyapunov-solver
  // rounding floor (~1e-14 residual). Evaluating the defect in long double
  // and solving one linearized correction pushes the residual to the
  // evaluation floor of the defect itself.
  using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  for (int pass = 0; pass < 2; ++pass) {
    const LMatrix Al = A.cast<long double>();
    const LMatrix Pl = Pi.cast<long double>();
    const LMatrix Bl = B.cast<long double>();
    const LMatrix defect_l = Al.transpose() * Pl + Pl * Al + Q.cast<long double>() -
                             (1.0L / static_cast<long double>(alpha)) *
                                 (Pl * Bl) * (Bl.transpose() * Pl);
    const Matrix defect = defect_l.cast<double>();
    if (defect.norm() <= 1e-16 * std::max(1.0, Q.norm())) break;
    const Matrix Acl = A - B * K;
    Matrix delta = solveLyapunov(Acl, -defect);
    delta = 0.5 * (delta + delta.transpose()).eval();
    Pi += delta;
    Pi = 0.5 * (Pi + Pi.transpose()).eval();
    K = (1.0 / alpha) * (B.transpose() * Pi);
  }

  RiccatiSolution sol;
  sol.Pi = Pi;
  sol.closed_loop = closedLoopMatrix(A, B, Pi, alpha);
  sol.iterations = iterations;
  const Matrix residual =
      A.transpose() * Pi + Pi * A + Q - (1.0 / alpha) * Pi * B * B.transpose() * Pi;
  sol.residual_norm = residual.norm();
  if (sol.residual_norm > 1e-9 * std::max(1.0, Q.norm())) {
    std::ostringstream msg;
    msg << "solveRiccati: residual " << sol.residual_norm << " after " << iterations
        << " iterations";
    throw NumericalError(msg.str());
  }
  if (eig(sol.closed_loop).spectralAbscissa() >= 0)
    throw NumericalError("solveRiccati: computed solution is not stabilizing");
  return sol;
}

}  // namespace hjb
