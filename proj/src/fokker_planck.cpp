#include "hjb/fokker_planck.hpp"

#include <cmath>
#include <functional>
#include <numbers>

#include <Eigen/QR>

namespace hjb {

void FPConfig::validate() const {
  if (!(x_hi > x_lo)) throw std::invalid_argument("FPConfig: empty interval");
  if (cells < 4) throw std::invalid_argument("FPConfig: need at least 4 cells");
  if (!(nu > 0)) throw std::invalid_argument("FPConfig: diffusion must be positive");
  if (!(alpha_cost > 0)) throw std::invalid_argument("FPConfig: alpha_cost must be positive");
  if (potential != "quadratic" && potential != "double_well")
    throw std::invalid_argument("FPConfig: unknown potential preset '" + potential + "'");
  if (control_shape != "cosine")
    throw std::invalid_argument("FPConfig: unknown control shape '" + control_shape + "'");
}

double FPConfig::potentialG(double x) const {
  if (potential == "quadratic") {
    const double d = x - x_center;
    return kappa * d * d;
  }
  const double xi = (x - x_lo) / (x_hi - x_lo);
  return kappa * xi * xi * (1.0 - xi) * (1.0 - xi);
}

double FPConfig::potentialGPrime(double x) const {
  if (potential == "quadratic") return 2.0 * kappa * (x - x_center);
  const double L = x_hi - x_lo;
  const double xi = (x - x_lo) / L;
  return 2.0 * kappa * xi * (1.0 - xi) * (1.0 - 2.0 * xi) / L;
}

double FPConfig::controlShapePrime(double x) const {
  // a(x) = cos(pi (x - x_lo)/L); a'(x_lo) = a'(x_hi) = 0.
  const double L = x_hi - x_lo;
  const double xi = (x - x_lo) / L;
  return -std::numbers::pi * std::sin(std::numbers::pi * xi) / L;
}

namespace {

// Conservative flux operator for drift g evaluated at interfaces:
// (Op rho)_i = (F_{i+1/2} - F_{i-1/2})/h with zero boundary fluxes.
Matrix fluxOperator(int m, double h, double x_lo, double nu,
                    const std::function<double(double)>& drift_prime) {
  Matrix op = Matrix::Zero(m, m);
  for (int j = 0; j + 1 < m; ++j) {
    const double x_face = x_lo + (j + 1) * h;
    const double g = drift_prime(x_face);
    const double c_lo = -nu / h + 0.5 * g;   // coefficient of rho_j in the flux
    const double c_hi = nu / h + 0.5 * g;    // coefficient of rho_{j+1}
    op(j, j) += c_lo / h;
    op(j, j + 1) += c_hi / h;
    op(j + 1, j) -= c_lo / h;
    op(j + 1, j + 1) -= c_hi / h;
  }
  return op;
}

}  // namespace

FullOperators buildFullOperators(const FPConfig& config) {
  config.validate();
  const int m = config.cells;
  const double h = (config.x_hi - config.x_lo) / m;

  FullOperators ops;
  ops.cell_width = h;
  ops.A = fluxOperator(m, h, config.x_lo, config.nu,
                       [&](double x) { return config.potentialGPrime(x); });
  ops.N = fluxOperator(m, h, config.x_lo, 0.0,
                       [&](double x) { return config.controlShapePrime(x); });

  // Steady state of the discrete generator (kernel of A), so that the
  // affine term vanishes exactly in the reduced coordinates. It matches the
  // Gibbs density to second order in h.
  Eigen::FullPivLU<Matrix> lu(ops.A);
  lu.setThreshold(1e-9);
  const Matrix kernel = lu.kernel();
  if (kernel.cols() != 1)
    throw NumericalError("buildFullOperators: generator kernel is not one-dimensional");
  ops.rho_inf = kernel.col(0);
  if (ops.rho_inf.sum() < 0) ops.rho_inf = -ops.rho_inf;
  if (ops.rho_inf.minCoeff() <= 0)
    throw NumericalError("buildFullOperators: steady state is not positive");
  ops.rho_inf /= h * ops.rho_inf.sum();
  ops.B = ops.N * ops.rho_inf;
  return ops;
}

Vector gibbsState(const FPConfig& config) {
  config.validate();
  const int m = config.cells;
  const double h = (config.x_hi - config.x_lo) / m;
  Vector rho(m);
  for (int i = 0; i < m; ++i) {
    const double x = config.x_lo + (i + 0.5) * h;
    rho[i] = std::exp(-config.potentialG(x) / config.nu);
  }
  return rho / (h * rho.sum());
}

DiscretizedFP reduceAndCanonicalize(const FullOperators& full, const FPConfig& config) {
  const int m = static_cast<int>(full.A.rows());
  const double h = full.cell_width;

  // Euclidean-orthonormal basis of {v : sum v = 0}, rescaled by 1/sqrt(h)
  // so the columns are orthonormal in <u,v> = h u'v.
  Matrix ones = Matrix::Ones(m, 1);
  Eigen::HouseholderQR<Matrix> qr(ones);
  Matrix Q = qr.householderQ() * Matrix::Identity(m, m);
  Matrix basis = Q.rightCols(m - 1) / std::sqrt(h);
  if ((h * basis.transpose() * basis - Matrix::Identity(m - 1, m - 1)).norm() > 1e-12 * m)
    throw std::logic_error("reduceAndCanonicalize: basis failed orthonormality check");

  DiscretizedFP fp;
  fp.full = full;
  fp.basis = basis;
  fp.reduced.n = m - 1;
  fp.reduced.A = h * basis.transpose() * full.A * basis;
  fp.reduced.N = h * basis.transpose() * full.N * basis;
  fp.reduced.B = h * basis.transpose() * full.B;
  fp.reduced.alpha = config.alpha_cost;
  fp.reduced.label = "fokker_planck[" + config.potential + ",m=" + std::to_string(m) + "]";
  fp.reduced.validate();
  return fp;
}

Vector reduceVector(const DiscretizedFP& fp, const Vector& y_full) {
  const double h = fp.full.cell_width;
  const Vector zero_mean = y_full - (h * y_full.sum()) * fp.full.rho_inf;
  return h * fp.basis.transpose() * zero_mean;
}

Vector liftVector(const DiscretizedFP& fp, const Vector& c) { return fp.basis * c; }

}  // namespace hjb
