#include "hjb/lyapchain.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace hjb {

namespace {

Eigen::Index powi(int base, int exp) {
  Eigen::Index r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

SymTensor assembleC(const SymTensor& t_next, const Vector& B) {
  if (!t_next.symmetric()) throw std::invalid_argument("assembleC: T_{i+1} must be symmetric");
  if (t_next.order() < 2) throw std::invalid_argument("assembleC: need order >= 2");
  return t_next.contractLast(B);
}

SymTensor assembleG(const SymTensor& t_i, const Matrix& N) {
  if (!t_i.symmetric()) throw std::invalid_argument("assembleG: T_i must be symmetric");
  const int i = t_i.order();
  const int n = t_i.dim();
  if (N.rows() != n || N.cols() != n) throw std::invalid_argument("assembleG: shape mismatch");
  if (i < 2) throw std::invalid_argument("assembleG: order must be >= 2 (G_1 = 0)");
  Vector acc = Vector::Zero(t_i.size());
  for (int mode = 0; mode < i; ++mode) acc += modeMultiply<double>(t_i.entries(), i, n, mode, N);
  acc /= static_cast<double>(i);
  return SymTensor::fromEntries(i, n, std::move(acc), true);
}

SymTensor assembleR(int k, const Matrix& Pi, const std::vector<SymTensor>& tensors,
                    const Matrix& N, const Vector& B) {
  if (k < 3) throw std::invalid_argument("assembleR: k must be >= 3");
  const int n = static_cast<int>(Pi.rows());
  if (static_cast<int>(tensors.size()) < k - 3)
    throw std::invalid_argument("assembleR: lower-order tensors T_3..T_{k-1} missing");

  auto tensorOf = [&](int ord) -> SymTensor {
    if (ord == 2) return SymTensor::fromMatrix(Pi);
    return tensors.at(static_cast<size_t>(ord) - 3);
  };
  auto C = [&](int i) { return assembleC(tensorOf(i + 1), B); };
  auto G = [&](int i) { return assembleG(tensorOf(i), N); };

  SymTensor R = 2.0 * k * (k - 1) * symPair(C(1), G(k - 1));
  for (int i = 2; i <= k - 2; ++i) {
    SymTensor left = C(i) + static_cast<double>(i) * G(i);
    SymTensor right = C(k - i) + static_cast<double>(k - i) * G(k - i);
    R += binom(k, i) * symPair(left, right);
  }
  return R;
}

SymTensor solveGeneralizedLyapunov(const Spectrum& spectrum, const SymTensor& R, double alpha) {
  const int k = R.order();
  const int n = R.dim();
  if (spectrum.eigenvalues.size() != n)
    throw std::invalid_argument("solveGeneralizedLyapunov: dimension mismatch");
  if (spectrum.spectralAbscissa() >= 0)
    throw std::invalid_argument("solveGeneralizedLyapunov: A_Pi must be stable");

  ComplexVector work = R.entries().cast<std::complex<double>>();
  for (int mode = 0; mode < k; ++mode)
    work = modeMultiply<std::complex<double>>(work, k, n, mode, spectrum.right_vectors);

  const double guard = 1e-12 * k * spectrum.eigenvalues.cwiseAbs().maxCoeff();
  const double scale = 1.0 / (2.0 * alpha);
  const Eigen::Index total = work.size();
  for (Eigen::Index flat = 0; flat < total; ++flat) {
    std::complex<double> denom{};
    Eigen::Index rest = flat;
    for (int q = 0; q < k; ++q) {
      denom += spectrum.eigenvalues[rest % n];
      rest /= n;
    }
    if (std::abs(denom) <= guard)
      throw SingularEquationError(
          "solveGeneralizedLyapunov: eigenvalue sum below guard (instability upstream?)");
    work[flat] *= scale / denom;
  }

  for (int mode = 0; mode < k; ++mode)
    work = modeMultiply<std::complex<double>>(work, k, n, mode, spectrum.inverse_vectors);

  const double imag_norm = work.imag().norm();
  const double real_norm = work.real().norm();
  if (imag_norm > 1e-9 * std::max(1.0, real_norm)) {
    std::ostringstream msg;
    msg << "solveGeneralizedLyapunov: imaginary residue " << imag_norm
        << " too large for a real solution";
    throw NumericalError(msg.str());
  }
  return SymTensor::fromEntries(k, n, work.real(), true);
}

SymTensor kroneckerOracle(const Matrix& A_Pi, const SymTensor& R, double alpha) {
  const int k = R.order();
  const int n = R.dim();
  const Eigen::Index total = powi(n, k);
  if (total > 4096) throw std::invalid_argument("kroneckerOracle: n^k exceeds 4096");
  if (A_Pi.rows() != n || A_Pi.cols() != n)
    throw std::invalid_argument("kroneckerOracle: shape mismatch");

  // Row-major vec: index i_1 slowest. Mode-q action of A_Pi contributes
  // A(j, m_q) to entry (m, m with j in slot q).
  Matrix M = Matrix::Zero(total, total);
  std::vector<Eigen::Index> stride(k);
  for (int q = 0; q < k; ++q) stride[q] = powi(n, k - 1 - q);
  for (Eigen::Index row = 0; row < total; ++row) {
    Eigen::Index rest = row;
    std::vector<int> idx(k);
    for (int q = k - 1; q >= 0; --q) {
      idx[q] = static_cast<int>(rest % n);
      rest /= n;
    }
    for (int q = 0; q < k; ++q) {
      const Eigen::Index base = row - idx[q] * stride[q];
      for (int j = 0; j < n; ++j) M(row, base + j * stride[q]) += A_Pi(j, idx[q]);
    }
  }
  Vector rhs = R.entries() / (2.0 * alpha);
  Eigen::PartialPivLU<Matrix> lu(M);
  Vector x = lu.solve(rhs);
  if (!x.allFinite() || (M * x - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm()))
    throw SingularEquationError("kroneckerOracle: dense system singular or badly conditioned");
  return SymTensor::fromEntries(k, n, std::move(x), true);
}

SymTensor quadratureOracle(const Spectrum& spectrum, const SymTensor& R, double alpha) {
  const int k = R.order();
  const int n = R.dim();
  const double abscissa = spectrum.spectralAbscissa();
  if (abscissa >= 0) throw std::invalid_argument("quadratureOracle: A_Pi must be stable");

  const double t_max = std::log(1e12) / (-abscissa);

  // Integrand as a tensor: R transformed in every slot by e^{A_Pi t}.
  auto integrand = [&](double t) -> Vector {
    ComplexVector expd =
        (spectrum.eigenvalues * t).array().exp().matrix();
    Matrix E = (spectrum.right_vectors * expd.asDiagonal() * spectrum.inverse_vectors).real();
    Vector work = R.entries();
    for (int mode = 0; mode < k; ++mode) work = modeMultiply<double>(work, k, n, mode, E);
    return work;
  };

  // Composite Simpson with panel doubling until the update is below
  // tolerance.
  auto composite = [&](int panels) -> Vector {
    const double h = t_max / panels;
    Vector acc = integrand(0.0) + integrand(t_max);
    for (int i = 1; i < panels; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * integrand(i * h);
    return acc * (h / 3.0);
  };

  Vector prev = composite(64);
  Vector cur;
  for (int panels = 128; panels <= 16384; panels *= 2) {
    cur = composite(panels);
    if ((cur - prev).lpNorm<Eigen::Infinity>() <=
        1e-10 * std::max(1.0, cur.lpNorm<Eigen::Infinity>()))
      break;
    prev = cur;
  }
  cur *= -1.0 / (2.0 * alpha);
  return SymTensor::fromEntries(k, n, std::move(cur), true);
}

ExpansionCoeffs buildExpansion(const BilinearSystem& system, int p,
                               const RiccatiSolution& riccati) {
  system.validate();
  if (p < 2) throw std::invalid_argument("buildExpansion: p must be >= 2");

  ExpansionCoeffs coeffs;
  coeffs.n = system.n;
  coeffs.degree = p;
  coeffs.alpha = system.alpha;
  coeffs.Pi = 0.5 * (riccati.Pi + riccati.Pi.transpose());
  coeffs.closed_loop = riccati.closed_loop;
  coeffs.spectrum = eig(riccati.closed_loop);

  // L[T] entries for sum_i T(..., A_Pi z_i, ...), accumulated in long
  // double so the refinement defect below is meaningful past the double
  // rounding floor.
  using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> Acl_l =
      coeffs.closed_loop.cast<long double>();
  auto applyLyap = [&](const SymTensor& T) -> LVec {
    const LVec entries = T.entries().cast<long double>();
    LVec acc = LVec::Zero(T.size());
    for (int mode = 0; mode < T.order(); ++mode)
      acc += modeMultiply<long double>(entries, T.order(), T.dim(), mode, Acl_l);
    return acc;
  };

  for (int k = 3; k <= p; ++k) {
    SymTensor R = assembleR(k, coeffs.Pi, coeffs.tensors, system.N, system.B);
    SymTensor T = solveGeneralizedLyapunov(coeffs.spectrum, R, system.alpha);
    // Iterative refinement: the eigenbasis transform leaves a defect around
    // 1e-13 relative, which is too coarse for the downstream residual
    // identities; correction solves against the long-double defect push it
    // to the rounding level of the defect evaluation itself.
    const LVec rhs = R.entries().cast<long double>() / (2.0L * system.alpha);
    for (int pass = 0; pass < 3; ++pass) {
      const Vector defect = (rhs - applyLyap(T)).cast<double>();
      if (defect.lpNorm<Eigen::Infinity>() <=
          1e-17 * std::max(1e-300, T.entries().lpNorm<Eigen::Infinity>()))
        break;
      SymTensor corr = solveGeneralizedLyapunov(
          coeffs.spectrum,
          SymTensor::fromEntries(k, system.n, 2.0 * system.alpha * defect, false),
          system.alpha);
      T += corr;
    }
    coeffs.tensors.push_back(T.symmetrized());
  }
  return coeffs;
}

double lyapunovResidual(const SymTensor& T, const SymTensor& R, const Matrix& A_Pi, double alpha,
                        int samples, unsigned seed) {
  const int k = T.order();
  const int n = T.dim();
  std::mt19937 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    std::vector<Vector> z(k);
    for (auto& v : z) {
      v = Vector::NullaryExpr(n, [&](Eigen::Index) { return dist(gen); });
    }
    double lhs = 0.0;
    for (int i = 0; i < k; ++i) {
      std::vector<Vector> args = z;
      args[i] = A_Pi * z[i];
      lhs += T.eval(std::span<const Vector>(args));
    }
    const double rhs = R.eval(std::span<const Vector>(z)) / (2.0 * alpha);
    worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
  }
  return worst;
}

}  // namespace hjb
