#include <doctest.h>

#include <span>

#include <algorithm>
#include <random>
#include <vector>

#include "hjb/multilinear.hpp"

using hjb::Matrix;
using hjb::SymTensor;
using hjb::Vector;

namespace {

std::mt19937 rng_for(unsigned seed) { return std::mt19937(seed); }

Vector randomVector(std::mt19937& rng, int n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

SymTensor randomTensor(std::mt19937& rng, int order, int dim, bool symmetrize = true) {
  Eigen::Index size = 1;
  for (int q = 0; q < order; ++q) size *= dim;
  Vector entries(size);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < size; ++i) entries[i] = gauss(rng);
  return SymTensor::fromEntries(order, dim, std::move(entries), symmetrize);
}

// Independent brute-force contraction by explicit index loops over a
// multi-index counter; shares no code with SymTensor::eval.
double bruteForceEval(const SymTensor& T, const std::vector<Vector>& args) {
  const int k = T.order();
  const int n = T.dim();
  std::vector<int> idx(static_cast<size_t>(k), 0);
  double acc = 0.0;
  for (;;) {
    Eigen::Index flat = 0;
    double prod = 1.0;
    for (int s = 0; s < k; ++s) {
      flat = flat * n + idx[static_cast<size_t>(s)];
      prod *= args[static_cast<size_t>(s)][idx[static_cast<size_t>(s)]];
    }
    acc += T.entries()[flat] * prod;
    int s = k - 1;
    while (s >= 0 && ++idx[static_cast<size_t>(s)] == n) idx[static_cast<size_t>(s--)] = 0;
    if (s < 0) break;
  }
  return acc;
}

}  // namespace

TEST_CASE("identity bilinear form is the dot product") {
  SymTensor T = SymTensor::fromMatrix(Matrix::Identity(2, 2));
  Vector z1(2), z2(2);
  z1 << 1, 2;
  z2 << 3, 4;
  CHECK(T.eval({z1, z2}) == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("eval with a zero argument vanishes") {
  auto rng = rng_for(11);
  SymTensor T = randomTensor(rng, 3, 4);
  Vector z = randomVector(rng, 4);
  CHECK(T.eval({z, Vector::Zero(4), z}) == 0.0);
}

TEST_CASE("eval matches brute-force index-loop oracle") {
  auto rng = rng_for(12);
  for (int order = 2; order <= 4; ++order) {
    const int n = order == 4 ? 3 : 4;
    SymTensor T = randomTensor(rng, order, n, false);
    std::vector<Vector> args;
    for (int s = 0; s < order; ++s) args.push_back(randomVector(rng, n));
    const double got = T.eval(std::span<const Vector>(args));
    const double want = bruteForceEval(T, args);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("permutation invariance: entries bit-exact, eval to rounding") {
  auto rng = rng_for(13);
  const int k = 4, n = 3;
  SymTensor T = randomTensor(rng, k, n);

  // Entry-level symmetry is bit-exact: every index permutation maps an
  // entry onto an identical value.
  std::vector<int> idx(static_cast<size_t>(k), 0);
  for (;;) {
    Eigen::Index flat = 0;
    for (int s = 0; s < k; ++s) flat = flat * n + idx[static_cast<size_t>(s)];
    auto swapped = idx;
    std::swap(swapped[0], swapped[static_cast<size_t>(k - 1)]);
    Eigen::Index flat2 = 0;
    for (int s = 0; s < k; ++s) flat2 = flat2 * n + swapped[static_cast<size_t>(s)];
    REQUIRE(T.entries()[flat] == T.entries()[flat2]);
    int s = k - 1;
    while (s >= 0 && ++idx[static_cast<size_t>(s)] == n) idx[static_cast<size_t>(s--)] = 0;
    if (s < 0) break;
  }

  // Eval under argument permutation sums the same terms in a different
  // order; equal up to summation rounding.
  std::vector<Vector> args;
  for (int s = 0; s < k; ++s) args.push_back(randomVector(rng, n));
  const double base = T.eval(std::span<const Vector>(args));
  std::vector<int> perm = {0, 1, 2, 3};
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vector> permuted;
    for (int s : perm) permuted.push_back(args[static_cast<size_t>(s)]);
    CHECK(T.eval(std::span<const Vector>(permuted)) ==
          doctest::Approx(base).epsilon(1e-13));
  }
}

TEST_CASE("multilinearity in each slot") {
  auto rng = rng_for(14);
  SymTensor T = randomTensor(rng, 3, 4);
  std::vector<Vector> args;
  for (int s = 0; s < 3; ++s) args.push_back(randomVector(rng, 4));
  const Vector u = randomVector(rng, 4);
  const Vector v = randomVector(rng, 4);
  const double a = 0.37, b = -1.62;
  for (int slot = 0; slot < 3; ++slot) {
    auto combo = args;
    combo[static_cast<size_t>(slot)] = a * u + b * v;
    auto left = args, right = args;
    left[static_cast<size_t>(slot)] = u;
    right[static_cast<size_t>(slot)] = v;
    const double want = a * T.eval(std::span<const Vector>(left)) +
                        b * T.eval(std::span<const Vector>(right));
    CHECK(T.eval(std::span<const Vector>(combo)) ==
          doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("Lipschitz bound with the l1-norm upper bound") {
  auto rng = rng_for(15);
  const int k = 3, n = 3;
  SymTensor T = randomTensor(rng, k, n);
  const double norm_ub = T.l1Norm();
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double M = 2.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vector> ys, vs;
    double max_diff = 0.0;
    for (int s = 0; s < k; ++s) {
      Vector y = randomVector(rng, n), v = randomVector(rng, n);
      if (y.norm() > M) y *= M / y.norm();
      if (v.norm() > M) v *= M / v.norm();
      ys.push_back(y);
      vs.push_back(v);
      max_diff = std::max(max_diff, (y - v).norm());
    }
    const double lhs =
        std::abs(T.eval(std::span<const Vector>(ys)) - T.eval(std::span<const Vector>(vs)));
    CHECK(lhs <= k * std::pow(M, k - 1) * norm_ub * max_diff + 1e-12);
  }
}

TEST_CASE("contractLast agrees with direct eval") {
  auto rng = rng_for(16);
  SymTensor T = randomTensor(rng, 3, 4);
  const Vector v = randomVector(rng, 4);
  SymTensor S = T.contractLast(v);
  CHECK(S.order() == 2);
  CHECK(S.symmetric());
  for (int trial = 0; trial < 5; ++trial) {
    Vector z1 = randomVector(rng, 4), z2 = randomVector(rng, 4);
    CHECK(S.eval({z1, z2}) == doctest::Approx(T.eval({z1, z2, v})).epsilon(1e-12));
  }
  SymTensor Z = T.contractLast(Vector::Zero(4));
  CHECK(Z.maxAbs() == 0.0);
}

TEST_CASE("contractLast of the identity form picks a coordinate") {
  SymTensor T = SymTensor::fromMatrix(Matrix::Identity(3, 3));
  Vector e0 = Vector::Zero(3);
  e0[0] = 1.0;
  SymTensor S = T.contractLast(e0);
  Vector z(3);
  z << 5, -2, 7;
  CHECK(S.eval({z}) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("diagonalGradient of a quadratic form is 2 Pi y") {
  auto rng = rng_for(17);
  Matrix P = Matrix::Random(4, 4);
  P = (0.5 * (P + P.transpose())).eval();
  SymTensor T = SymTensor::fromMatrix(P);
  const Vector y = randomVector(rng, 4);
  const Vector g = T.diagonalGradient(y);
  CHECK((g - 2.0 * P * y).norm() <= 1e-13 * g.norm());
  CHECK(T.diagonalGradient(Vector::Zero(4)).norm() == 0.0);
}

TEST_CASE("diagonalGradient matches central finite differences") {
  auto rng = rng_for(18);
  SymTensor T = randomTensor(rng, 3, 3);
  const Vector y = randomVector(rng, 3);
  const Vector g = T.diagonalGradient(y);
  const double eps = 1e-5;
  for (int i = 0; i < 3; ++i) {
    Vector yp = y, ym = y;
    yp[i] += eps;
    ym[i] -= eps;
    const double fd = (T.evalDiagonal(yp) - T.evalDiagonal(ym)) / (2 * eps);
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("symPair interleaving count and diagonal factorization") {
  auto rng = rng_for(19);
  SymTensor T1 = randomTensor(rng, 2, 3);
  SymTensor T2 = randomTensor(rng, 2, 3);
  SymTensor S = symPair(T1, T2);
  CHECK(S.order() == 4);
  CHECK(S.symmetric());
  for (int trial = 0; trial < 10; ++trial) {
    const Vector y = randomVector(rng, 3);
    const double want = T1.evalDiagonal(y) * T2.evalDiagonal(y);
    CHECK(S.evalDiagonal(y) == doctest::Approx(want).epsilon(1e-12));
  }
  // i=j=2 averages over exactly binom(4,2) = 6 interleavings: test on a
  // decomposable pair where each interleaving value is known.
  SymTensor Z = symPair(T1, SymTensor(2, 3));
  CHECK(Z.maxAbs() == 0.0);
}

TEST_CASE("symPair of rank-one quadratic forms averages six interleavings") {
  // T1 = a a', T2 = b b'. The six interleavings of Sym_{2,2} give
  // S(z1..z4) = (1/6) sum over the 3 pair-splits, each counted twice.
  Vector a(2), b(2);
  a << 1, 2;
  b << -3, 1;
  SymTensor T1 = SymTensor::fromMatrix(a * a.transpose());
  SymTensor T2 = SymTensor::fromMatrix(b * b.transpose());
  SymTensor S = symPair(T1, T2);
  Vector z1(2), z2(2), z3(2), z4(2);
  z1 << 1, 0;
  z2 << 0, 1;
  z3 << 1, 1;
  z4 << 2, -1;
  auto q = [](const Vector& w, const Vector& u, const Vector& v) {
    return (u.dot(w)) * (v.dot(w));
  };
  const double want = (q(a, z1, z2) * q(b, z3, z4) + q(a, z1, z3) * q(b, z2, z4) +
                       q(a, z1, z4) * q(b, z2, z3) + q(a, z2, z3) * q(b, z1, z4) +
                       q(a, z2, z4) * q(b, z1, z3) + q(a, z3, z4) * q(b, z1, z2)) /
                      6.0;
  CHECK(S.eval({z1, z2, z3, z4}) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("symmetrized is idempotent and preserves the diagonal") {
  auto rng = rng_for(20);
  SymTensor T = randomTensor(rng, 3, 3, false);
  SymTensor S = T.symmetrized();
  CHECK(S.symmetric());
  SymTensor S2 = S.symmetrized();
  CHECK((S2.entries() - S.entries()).lpNorm<Eigen::Infinity>() == 0.0);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector y = randomVector(rng, 3);
    CHECK(S.evalDiagonal(y) == doctest::Approx(T.evalDiagonal(y)).epsilon(1e-12));
  }
}

TEST_CASE("symmetrized order-2 is the matrix symmetrization") {
  Vector entries(4);
  entries << 0, 1, 0, 0;  // [[0,1],[0,0]]
  SymTensor T = SymTensor::fromEntries(2, 2, entries, false);
  SymTensor S = T.symmetrized();
  Vector want(4);
  want << 0, 0.5, 0.5, 0;
  CHECK((S.entries() - want).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("modeMultiply matches slot substitution") {
  auto rng = rng_for(21);
  const int order = 3, n = 3;
  SymTensor T = randomTensor(rng, order, n);
  Matrix M = Matrix::Random(n, n);
  for (int mode = 0; mode < order; ++mode) {
    Vector out = hjb::modeMultiply<double>(T.entries(), order, n, mode, M);
    SymTensor U = SymTensor::fromEntries(order, n, out, false);
    for (int trial = 0; trial < 3; ++trial) {
      std::vector<Vector> args;
      for (int s = 0; s < order; ++s) args.push_back(randomVector(rng, n));
      auto mapped = args;
      mapped[static_cast<size_t>(mode)] = M * args[static_cast<size_t>(mode)];
      CHECK(U.eval(std::span<const Vector>(args)) ==
            doctest::Approx(T.eval(std::span<const Vector>(mapped))).epsilon(1e-12));
    }
  }
}

TEST_CASE("eval rejects dimension mismatches") {
  SymTensor T = SymTensor::fromMatrix(Matrix::Identity(3, 3));
  Vector bad(2);
  bad << 1, 2;
  Vector ok(3);
  ok << 1, 2, 3;
  CHECK_THROWS_AS((void)T.eval({bad, ok}), std::invalid_argument);
  CHECK_THROWS_AS((void)T.eval({ok}), std::invalid_argument);
  CHECK_THROWS_AS((void)T.contractLast(bad), std::invalid_argument);
}
