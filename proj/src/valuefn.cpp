#include "hjb/valuefn.hpp"

#include <cmath>

namespace hjb {

namespace {

double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

void checkDim(const ExpansionCoeffs& coeffs, const Vector& y, const char* what) {
  if (y.size() != coeffs.n) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace

double evalVp(const ExpansionCoeffs& coeffs, const Vector& y) {
  checkDim(coeffs, y, "evalVp");
  double v = 0.5 * y.dot(coeffs.Pi * y);
  for (int k = 3; k <= coeffs.degree; ++k)
    v += coeffs.tensor(k).evalDiagonal(y) / factorial(k);
  return v;
}

Vector gradVp(const ExpansionCoeffs& coeffs, const Vector& y) {
  checkDim(coeffs, y, "gradVp");
  Vector g = coeffs.Pi * y;
  // diagonalGradient returns k * T_k(y^{(k-1)}, .), so the 1/(k-1)! term
  // becomes diagonalGradient / k!.
  for (int k = 3; k <= coeffs.degree; ++k)
    g += coeffs.tensor(k).diagonalGradient(y) / factorial(k);
  return g;
}

double feedbackUp(const ExpansionCoeffs& coeffs, const BilinearSystem& system, const Vector& y) {
  checkDim(coeffs, y, "feedbackUp");
  return -(1.0 / coeffs.alpha) * gradVp(coeffs, y).dot(system.N * y + system.B);
}

FeedbackEval evalFeedback(const ExpansionCoeffs& coeffs, const BilinearSystem& system,
                          const Vector& y) {
  checkDim(coeffs, y, "evalFeedback");
  FeedbackEval fe;
  fe.gradient_Vp = gradVp(coeffs, y);
  fe.Vp = evalVp(coeffs, y);
  fe.value = -(1.0 / coeffs.alpha) * fe.gradient_Vp.dot(system.N * y + system.B);
  return fe;
}

double residualRp(const ExpansionCoeffs& coeffs, const BilinearSystem& system, const Vector& y) {
  checkDim(coeffs, y, "residualRp");
  const int p = coeffs.degree;
  const Vector Ny = system.N * y;
  const Vector Piy = coeffs.Pi * y;

  // Diagonal values C_i(y^(i)) = T_{i+1}(B, y^(i)) and
  // G_i(y^(i)) = T_i(Ny, y^(i-1)).
  auto cDiag = [&](int i) -> double {
    if (i == 1) return system.B.dot(Piy);
    return coeffs.tensor(i + 1).evalMixed(system.B, y);
  };
  auto gDiag = [&](int i) -> double {
    if (i == 2) return Ny.dot(Piy);
    return coeffs.tensor(i).evalMixed(Ny, y);
  };

  std::vector<double> q(static_cast<size_t>(p) + 1, 0.0);
  q[1] = cDiag(1);
  for (int i = 2; i <= p - 1; ++i) q[i] = (cDiag(i) + i * gDiag(i)) / factorial(i);
  q[p] = gDiag(p) / factorial(p - 1);

  double acc = 0.0;
  for (int i = p + 1; i <= 2 * p; ++i)
    for (int j = i - p; j <= p; ++j) acc += q[j] * q[i - j];
  return acc / (2.0 * coeffs.alpha);
}

double hjbResidual(const ExpansionCoeffs& coeffs, const BilinearSystem& system, const Vector& y) {
  checkDim(coeffs, y, "hjbResidual");
  // Evaluates -DVp.(Ay) - 1/2 |y|^2 + 1/(2a) (DVp.(Ny+B))^2, regrouped so
  // no intermediate exceeds the order of the result. With g = Pi y + g3,
  // w = q1 + d and the symmetrized Riccati substitution
  //   y'Pi A y = 1/2 y'(Res - I + (1/a) Pi B B'Pi) y,
  // the expression is exactly (2 q1 d + d^2)/(2a) - g3.(Ay) - 1/2 y'Res y,
  // which avoids the catastrophic cancellation of the quadratic terms.
  // The contractions run in long double: the result is orders of magnitude
  // below the ||A||*||Pi|| intermediates, so double rounding would dominate.
  using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LMatrix A = system.A.cast<long double>();
  const LMatrix Pi = coeffs.Pi.cast<long double>();
  const LVector yl = y.cast<long double>();
  const LVector Piy = Pi * yl;
  const LVector Ny = system.N.cast<long double>() * yl;
  const LVector Bl = system.B.cast<long double>();

  Vector g3d = Vector::Zero(coeffs.n);
  for (int k = 3; k <= coeffs.degree; ++k)
    g3d += coeffs.tensor(k).diagonalGradient(y) / factorial(k);
  const LVector g3 = g3d.cast<long double>();

  const long double alpha = static_cast<long double>(coeffs.alpha);
  const long double q1 = Bl.dot(Piy);
  const long double d = Piy.dot(Ny) + g3.dot(Ny + Bl);
  const LVector PiB = Pi * Bl;
  const LMatrix res = A.transpose() * Pi + Pi * A +
                      LMatrix::Identity(coeffs.n, coeffs.n) -
                      (1.0L / alpha) * (PiB * PiB.transpose());
  const long double value =
      (2.0L * q1 * d + d * d) / (2.0L * alpha) - g3.dot(A * yl) - 0.5L * yl.dot(res * yl);
  return static_cast<double>(value);
}

double runningCost(const Vector& y, double u, double alpha) {
  return 0.5 * y.squaredNorm() + 0.5 * alpha * u * u;
}

double runningCostP(const ExpansionCoeffs& coeffs, const BilinearSystem& system, const Vector& y,
                    double u) {
  return runningCost(y, u, coeffs.alpha) + residualRp(coeffs, system, y);
}

}  // namespace hjb
