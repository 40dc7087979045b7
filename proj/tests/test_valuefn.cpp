#include <doctest.h>

#include <cmath>
#include <random>

#include "hjb/fokker_planck.hpp"
#include "hjb/valuefn.hpp"

using hjb::BilinearSystem;
using hjb::ExpansionCoeffs;
using hjb::Matrix;
using hjb::Vector;

namespace {

Vector randomVector(std::mt19937& rng, int n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

struct FPFixture {
  BilinearSystem sys;
  hjb::RiccatiSolution ric;

  FPFixture() {
    hjb::FPConfig cfg;  // defaults: m=16, double well
    sys = hjb::buildFPSystem(cfg).reduced;
    ric = hjb::solveRiccati(sys.A, sys.B, Matrix::Identity(sys.n, sys.n), sys.alpha);
  }
};

}  // namespace

TEST_CASE("evalVp: zero state, quadratic case, scalar closed form") {
  FPFixture f;
  auto c3 = hjb::buildExpansion(f.sys, 3, f.ric);
  CHECK(hjb::evalVp(c3, Vector::Zero(f.sys.n)) == 0.0);

  std::mt19937 rng(61);
  auto c2 = hjb::buildExpansion(f.sys, 2, f.ric);
  Vector y = 0.1 * randomVector(rng, f.sys.n);
  CHECK(hjb::evalVp(c2, y) == doctest::Approx(0.5 * y.dot(c2.Pi * y)).epsilon(1e-14));

  // Scalar p=3: V_3 = 1/2 pi y^2 + (1/6) T3 y^3.
  BilinearSystem sc;
  sc.n = 1;
  sc.A = Matrix::Constant(1, 1, -1.0);
  sc.N = Matrix::Constant(1, 1, 0.5);
  sc.B = Vector::Constant(1, 1.0);
  sc.alpha = 1.0;
  auto ric_sc = hjb::solveRiccati(sc.A, sc.B, Matrix::Identity(1, 1), 1.0);
  auto c_sc = hjb::buildExpansion(sc, 3, ric_sc);
  const double pi = -1.0 + std::sqrt(2.0);
  const double t3 = 2.0 * pi * pi * 1.0 * 0.5 / (1.0 * -std::sqrt(2.0));
  Vector ys(1);
  ys << 0.2;
  CHECK(hjb::evalVp(c_sc, ys) ==
        doctest::Approx(0.5 * pi * 0.04 + t3 * 0.008 / 6.0).epsilon(1e-12));
}

TEST_CASE("gradVp matches central finite differences") {
  FPFixture f;
  auto c4 = hjb::buildExpansion(f.sys, 4, f.ric);
  std::mt19937 rng(62);
  Vector y = 0.1 * randomVector(rng, f.sys.n);
  Vector g = hjb::gradVp(c4, y);
  const double eps = 1e-5;
  for (int i = 0; i < f.sys.n; ++i) {
    Vector yp = y, ym = y;
    yp[i] += eps;
    ym[i] -= eps;
    const double fd = (hjb::evalVp(c4, yp) - hjb::evalVp(c4, ym)) / (2 * eps);
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(hjb::gradVp(c4, Vector::Zero(f.sys.n)).norm() == 0.0);
}

TEST_CASE("gradVp at p=2 is Pi y") {
  FPFixture f;
  auto c2 = hjb::buildExpansion(f.sys, 2, f.ric);
  std::mt19937 rng(63);
  Vector y = randomVector(rng, f.sys.n);
  CHECK((hjb::gradVp(c2, y) - c2.Pi * y).norm() <= 1e-13 * y.norm());
}

TEST_CASE("feedbackUp definition and origin equilibrium") {
  FPFixture f;
  auto c3 = hjb::buildExpansion(f.sys, 3, f.ric);
  std::mt19937 rng(64);
  Vector y = 0.05 * randomVector(rng, f.sys.n);
  const double u = hjb::feedbackUp(c3, f.sys, y);
  const Vector g = hjb::gradVp(c3, y);
  CHECK(u == doctest::Approx(-(1.0 / f.sys.alpha) * g.dot(f.sys.N * y + f.sys.B))
                 .epsilon(1e-13));
  CHECK(hjb::feedbackUp(c3, f.sys, Vector::Zero(f.sys.n)) == 0.0);

  hjb::FeedbackEval fe = hjb::evalFeedback(c3, f.sys, y);
  CHECK(fe.value == u);
  CHECK(fe.Vp == doctest::Approx(hjb::evalVp(c3, y)).epsilon(1e-14));
}

TEST_CASE("residualRp and hjbResidual vanish at the origin and for LQR") {
  FPFixture f;
  auto c3 = hjb::buildExpansion(f.sys, 3, f.ric);
  CHECK(hjb::residualRp(c3, f.sys, Vector::Zero(f.sys.n)) == 0.0);
  CHECK(hjb::hjbResidual(c3, f.sys, Vector::Zero(f.sys.n)) == 0.0);

  BilinearSystem lqr = f.sys;
  lqr.N = Matrix::Zero(f.sys.n, f.sys.n);
  lqr.B = f.sys.B;
  auto ric = hjb::solveRiccati(lqr.A, lqr.B, Matrix::Identity(lqr.n, lqr.n), lqr.alpha);
  auto c = hjb::buildExpansion(lqr, 3, ric);
  std::mt19937 rng(65);
  for (int trial = 0; trial < 10; ++trial) {
    Vector y = 0.1 * randomVector(rng, lqr.n);
    CHECK(hjb::residualRp(c, lqr, y) == 0.0);
    CHECK(std::abs(hjb::hjbResidual(c, lqr, y)) <= 1e-14);
  }
}

TEST_CASE("HJB residual identity on the Fokker-Planck system") {
  FPFixture f;
  std::mt19937 rng(66);
  for (int p : {2, 3, 4}) {
    auto c = hjb::buildExpansion(f.sys, p, f.ric);
    double num = 0.0, den = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      Vector y = randomVector(rng, f.sys.n);
      y *= 0.1 / y.norm();
      const double rp = hjb::residualRp(c, f.sys, y);
      const double hr = hjb::hjbResidual(c, f.sys, y);
      num += (rp - hr) * (rp - hr);
      den += rp * rp;
    }
    CHECK(std::sqrt(num) <= 1e-10 * std::sqrt(den));
  }
}

TEST_CASE("HJB residual degree floor: slope at least p+1") {
  FPFixture f;
  std::mt19937 rng(67);
  Vector d = randomVector(rng, f.sys.n);
  d /= d.norm();
  for (int p : {2, 3}) {
    auto c = hjb::buildExpansion(f.sys, p, f.ric);
    std::vector<double> ls, lr;
    for (double s : {1e-1, 1e-2, 1e-3}) {
      ls.push_back(std::log(s));
      lr.push_back(std::log(std::abs(hjb::hjbResidual(c, f.sys, s * d))));
    }
    const double slope = (lr.front() - lr.back()) / (ls.front() - ls.back());
    CHECK(slope >= p + 1 - 0.1);
  }
}

TEST_CASE("running costs") {
  CHECK(hjb::runningCost(Vector::Zero(3), 0.0, 1.0) == 0.0);
  Vector e1 = Vector::Zero(3);
  e1[0] = 1.0;
  CHECK(hjb::runningCost(e1, 1.0, 2.0) == doctest::Approx(1.5).epsilon(1e-15));

  FPFixture f;
  auto c3 = hjb::buildExpansion(f.sys, 3, f.ric);
  std::mt19937 rng(68);
  Vector y = 0.1 * randomVector(rng, f.sys.n);
  const double u = 0.3;
  CHECK(hjb::runningCostP(c3, f.sys, y, u) - hjb::runningCost(y, u, f.sys.alpha) ==
        doctest::Approx(hjb::residualRp(c3, f.sys, y)).epsilon(1e-12));
}
