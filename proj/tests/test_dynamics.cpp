#include <doctest.h>

#include <cmath>
#include <random>

#include "hjb/dynamics.hpp"
#include "hjb/fokker_planck.hpp"
#include "hjb/valuefn.hpp"

using hjb::BilinearSystem;
using hjb::Matrix;
using hjb::SampledControl;
using hjb::SimOptions;
using hjb::Trajectory;
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
    hjb::FPConfig cfg;
    sys = hjb::buildFPSystem(cfg).reduced;
    ric = hjb::solveRiccati(sys.A, sys.B, Matrix::Identity(sys.n, sys.n), sys.alpha);
  }
};

}  // namespace

TEST_CASE("closed loop from the origin stays at the origin") {
  FPFixture f;
  auto c = hjb::buildExpansion(f.sys, 3, f.ric);
  Trajectory traj = hjb::simulateClosedLoop(f.sys, c, Vector::Zero(f.sys.n));
  for (const auto& y : traj.states) CHECK(y.norm() == 0.0);
  for (double u : traj.controls) CHECK(u == 0.0);
}

TEST_CASE("LQR closed-loop cost equals the Riccati value") {
  FPFixture f;
  BilinearSystem lqr = f.sys;
  lqr.N = Matrix::Zero(lqr.n, lqr.n);
  auto ric = hjb::solveRiccati(lqr.A, lqr.B, Matrix::Identity(lqr.n, lqr.n), lqr.alpha);
  auto c = hjb::buildExpansion(lqr, 2, ric);
  std::mt19937 rng(71);
  Vector y0 = 0.1 * randomVector(rng, lqr.n);
  Trajectory traj = hjb::simulateClosedLoop(lqr, c, y0);
  hjb::CostReport rep = hjb::costJ(traj, lqr, ric.Pi);
  const double want = 0.5 * y0.dot(ric.Pi * y0);
  CHECK(rep.total_J == doctest::Approx(want).epsilon(1e-6));
  CHECK_FALSE(rep.tail_flagged);
  CHECK(traj.terminal_norm <= 1e-8 * std::max(1.0, y0.norm()));
}

TEST_CASE("step halving shows second-order self-convergence") {
  FPFixture f;
  auto c = hjb::buildExpansion(f.sys, 3, f.ric);
  std::mt19937 rng(72);
  Vector y0 = 0.1 * randomVector(rng, f.sys.n);

  auto run = [&](double h) {
    SimOptions opts;
    opts.h = h;
    opts.T_max = 2.0;
    opts.stop_at_tail = false;
    return hjb::simulateClosedLoop(f.sys, c, y0, opts);
  };
  Trajectory t1 = run(4e-3), t2 = run(2e-3), t3 = run(1e-3);
  // Compare terminal states at the shared final time.
  const double e12 = (t1.states.back() - t3.states.back()).norm();
  const double e23 = (t2.states.back() - t3.states.back()).norm();
  // (h^2 - h_f^2) ratio between the two comparisons against the finest grid
  // is (16-1)/(4-1) = 5 for an order-2 scheme.
  CHECK(e12 / e23 == doctest::Approx(5.0).epsilon(0.2));
}

TEST_CASE("open loop with zero control decays like the matrix exponential") {
  BilinearSystem sys;
  sys.n = 1;
  sys.A = Matrix::Constant(1, 1, -1.0);
  sys.N = Matrix::Zero(1, 1);
  sys.B = Vector::Ones(1);
  sys.alpha = 1.0;
  SampledControl u;
  u.T = 5.0;
  u.u.assign(5001, 0.0);
  SimOptions opts;
  opts.h = 1e-3;
  opts.T_max = 5.0;
  opts.stop_at_tail = false;
  Vector y0 = Vector::Ones(1);
  Trajectory traj = hjb::simulateOpenLoop(sys, y0, u, opts);
  double max_rel = 0.0;
  for (size_t i = 0; i < traj.size(); ++i) {
    const double want = std::exp(-traj.times[i]);
    max_rel = std::max(max_rel, std::abs(traj.states[i][0] - want) / want);
  }
  CHECK(max_rel <= 1e-4);
}

TEST_CASE("replaying recorded closed-loop controls reproduces the trajectory") {
  FPFixture f;
  auto c = hjb::buildExpansion(f.sys, 3, f.ric);
  std::mt19937 rng(73);
  Vector y0 = 0.05 * randomVector(rng, f.sys.n);
  SimOptions opts;
  opts.h = 1e-3;
  opts.T_max = 3.0;
  opts.stop_at_tail = false;
  Trajectory closed = hjb::simulateClosedLoop(f.sys, c, y0, opts);
  SampledControl u;
  u.T = closed.times.back();
  u.u = closed.controls;
  Trajectory open = hjb::simulateOpenLoop(f.sys, y0, u, opts);
  REQUIRE(open.size() == closed.size());
  double max_err = 0.0;
  for (size_t i = 0; i < open.size(); ++i)
    max_err = std::max(max_err, (open.states[i] - closed.states[i]).norm());
  CHECK(max_err <= 1e-5 * y0.norm());
}

TEST_CASE("cost of the zero trajectory is zero") {
  FPFixture f;
  auto c = hjb::buildExpansion(f.sys, 2, f.ric);
  Trajectory traj = hjb::simulateClosedLoop(f.sys, c, Vector::Zero(f.sys.n));
  hjb::CostReport rep = hjb::costJp(traj, f.sys, c);
  CHECK(rep.total_J == 0.0);
  CHECK(rep.total_Jp == 0.0);
  CHECK(rep.remainder_cost == 0.0);
}

TEST_CASE("cost report invariants") {
  FPFixture f;
  auto c = hjb::buildExpansion(f.sys, 3, f.ric);
  std::mt19937 rng(74);
  Vector y0 = 0.05 * randomVector(rng, f.sys.n);
  Trajectory traj = hjb::simulateClosedLoop(f.sys, c, y0);
  hjb::CostReport rep = hjb::costJp(traj, f.sys, c);
  CHECK(rep.total_J ==
        doctest::Approx(rep.state_cost + rep.control_cost + rep.tail_estimate)
            .epsilon(1e-14));
  CHECK(rep.total_Jp == doctest::Approx(rep.total_J + rep.remainder_cost).epsilon(1e-14));
}

TEST_CASE("closed-loop cost of the feedback matches Vp for small states") {
  FPFixture f;
  auto c = hjb::buildExpansion(f.sys, 3, f.ric);
  std::mt19937 rng(75);
  Vector y0 = 0.02 * randomVector(rng, f.sys.n);
  // Random states excite the stiff diffusion modes; resolve them with a
  // step well below their time scale so quadrature error stays under 1e-5.
  SimOptions opts = hjb::defaultSimOptions(c);
  opts.h /= 8.0;
  Trajectory traj = hjb::simulateClosedLoop(f.sys, c, y0, opts);
  hjb::CostReport rep = hjb::costJp(traj, f.sys, c);
  const double vp = hjb::evalVp(c, y0);
  CHECK(std::abs(rep.total_Jp - vp) <= 1e-5 * std::max(1e-8, vp));
}

TEST_CASE("quadratic cost bound along a fixed direction") {
  FPFixture f;
  auto c = hjb::buildExpansion(f.sys, 3, f.ric);
  std::mt19937 rng(76);
  Vector d = randomVector(rng, f.sys.n);
  d /= d.norm();
  std::vector<double> ratios;
  for (double s : {1e-2, 1e-3, 1e-4}) {
    Trajectory traj = hjb::simulateClosedLoop(f.sys, c, s * d);
    hjb::CostReport rep = hjb::costJ(traj, f.sys, c.Pi);
    ratios.push_back(rep.total_J / (s * s));
  }
  const double mid = ratios[1];
  for (double r : ratios) CHECK(std::abs(r - mid) <= 0.1 * mid);
}

TEST_CASE("divergence guard aborts on unstable dynamics") {
  BilinearSystem sys;
  sys.n = 1;
  sys.A = Matrix::Constant(1, 1, 3.0);  // unstable open loop
  sys.N = Matrix::Zero(1, 1);
  sys.B = Vector::Ones(1);
  sys.alpha = 1.0;
  SampledControl u;
  u.T = 10.0;
  u.u.assign(10001, 0.0);
  SimOptions opts;
  opts.h = 1e-3;
  opts.T_max = 10.0;
  opts.stop_at_tail = false;
  CHECK_THROWS_AS(
      (void)hjb::simulateOpenLoop(sys, Vector::Ones(1), u, opts), hjb::NumericalError);
}
