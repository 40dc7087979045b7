#include "hjb/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hjb/valuefn.hpp"

namespace hjb {

double SampledControl::at(double t) const {
  if (u.size() < 2 || T <= 0) throw std::invalid_argument("SampledControl: need >= 2 samples");
  if (t <= 0) return u.front();
  if (t >= T) return u.back();
  const double h = step();
  const auto i = static_cast<size_t>(t / h);
  if (i + 1 >= u.size()) return u.back();
  const double w = (t - static_cast<double>(i) * h) / h;
  return (1.0 - w) * u[i] + w * u[i + 1];
}

SimOptions defaultSimOptions(const ExpansionCoeffs& coeffs) {
  SimOptions opts;
  const double a = -coeffs.spectrum.spectralAbscissa();
  if (a <= 0) throw std::invalid_argument("defaultSimOptions: closed loop is not stable");
  opts.h = 1e-3 / a;
  opts.T_max = 40.0 / a;
  return opts;
}

namespace {

struct StepGuards {
  double tail_tol;
  double blowup;
};

StepGuards makeGuards(const SimOptions& opts, const Vector& y0) {
  StepGuards g;
  g.tail_tol = opts.tail_tol_rel * std::max(1.0, y0.norm());
  g.blowup = std::max(opts.blowup_abs, opts.blowup_rel * y0.norm());
  return g;
}

void checkState(const Vector& y, double t, const StepGuards& guards) {
  if (!y.allFinite()) {
    std::ostringstream msg;
    msg << "simulation produced a non-finite state at t = " << t;
    throw NumericalError(msg.str());
  }
  if (y.norm() > guards.blowup) {
    std::ostringstream msg;
    msg << "trajectory diverged at t = " << t << " (||y|| = " << y.norm() << ")";
    throw NumericalError(msg.str());
  }
}

}  // namespace

Trajectory simulateClosedLoop(const BilinearSystem& system, const ExpansionCoeffs& coeffs,
                              const Vector& y0, const SimOptions& opts_in) {
  system.validate();
  if (y0.size() != system.n) throw std::invalid_argument("simulateClosedLoop: y0 size mismatch");
  SimOptions opts = opts_in;
  if (opts.h <= 0 || opts.T_max <= 0) {
    const SimOptions d = defaultSimOptions(coeffs);
    if (opts.h <= 0) opts.h = d.h;
    if (opts.T_max <= 0) opts.T_max = d.T_max;
  }

  const double h = opts.h;
  const Matrix& Api = coeffs.closed_loop;
  const Matrix I = Matrix::Identity(system.n, system.n);
  const Eigen::PartialPivLU<Matrix> implicit_lu(I - 0.5 * h * Api);
  const Matrix M0 = I + 0.5 * h * Api;
  const Matrix BBtPi = (1.0 / system.alpha) * system.B * (system.B.transpose() * coeffs.Pi);

  // F(y) = (Ny+B) u_p(y) + (1/alpha) B B'Pi y, the split of the closed loop
  // around A_Pi.
  auto F = [&](const Vector& y, double& u_out) -> Vector {
    const double u = feedbackUp(coeffs, system, y);
    u_out = u;
    return (system.N * y + system.B) * u + BBtPi * y;
  };

  const StepGuards guards = makeGuards(opts, y0);
  const auto steps = static_cast<size_t>(std::max<long long>(1, std::llround(opts.T_max / h)));

  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.controls.reserve(steps + 1);

  Vector y = y0;
  double u_rec = 0.0;
  Vector f0 = F(y, u_rec);
  traj.times.push_back(0.0);
  traj.states.push_back(y);
  traj.controls.push_back(u_rec);

  for (size_t step = 1; step <= steps; ++step) {
    double u_tmp = 0.0;
    const Vector predictor = implicit_lu.solve(M0 * y + h * f0);
    const Vector f1 = F(predictor, u_tmp);
    y = implicit_lu.solve(M0 * y + 0.5 * h * (f0 + f1));
    const double t = static_cast<double>(step) * h;
    checkState(y, t, guards);
    f0 = F(y, u_rec);
    traj.times.push_back(t);
    traj.states.push_back(y);
    traj.controls.push_back(u_rec);
    if (opts.stop_at_tail && y.norm() <= guards.tail_tol) break;
  }
  traj.terminal_norm = traj.states.back().norm();
  return traj;
}

Trajectory simulateOpenLoop(const BilinearSystem& system, const Vector& y0,
                            const SampledControl& control, const SimOptions& opts_in) {
  system.validate();
  if (y0.size() != system.n) throw std::invalid_argument("simulateOpenLoop: y0 size mismatch");
  SimOptions opts = opts_in;
  if (opts.T_max <= 0) opts.T_max = control.T;
  if (opts.h <= 0) opts.h = control.step();
  if (opts.T_max > control.T + 1e-12)
    throw std::invalid_argument("simulateOpenLoop: control grid does not cover [0, T_max]");

  const double h = opts.h;
  const Matrix I = Matrix::Identity(system.n, system.n);
  const Eigen::PartialPivLU<Matrix> implicit_lu(I - 0.5 * h * system.A);
  const Matrix M0 = I + 0.5 * h * system.A;

  auto f = [&](const Vector& y, double u) -> Vector { return (system.N * y + system.B) * u; };

  const StepGuards guards = makeGuards(opts, y0);
  const auto steps = static_cast<size_t>(std::max<long long>(1, std::llround(opts.T_max / h)));

  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.controls.reserve(steps + 1);

  Vector y = y0;
  traj.times.push_back(0.0);
  traj.states.push_back(y);
  traj.controls.push_back(control.at(0.0));

  for (size_t step = 1; step <= steps; ++step) {
    const double t0 = static_cast<double>(step - 1) * h;
    const double t1 = static_cast<double>(step) * h;
    const double u0 = control.at(t0);
    const double u1 = control.at(t1);
    const Vector f0 = f(y, u0);
    const Vector predictor = implicit_lu.solve(M0 * y + h * f0);
    y = implicit_lu.solve(M0 * y + 0.5 * h * (f0 + f(predictor, u1)));
    checkState(y, t1, guards);
    traj.times.push_back(t1);
    traj.states.push_back(y);
    traj.controls.push_back(u1);
    if (opts.stop_at_tail && y.norm() <= guards.tail_tol) break;
  }
  traj.terminal_norm = traj.states.back().norm();
  return traj;
}

namespace {

CostReport integrateCosts(const Trajectory& traj, const BilinearSystem& system, const Matrix& Pi,
                          const ExpansionCoeffs* coeffs_for_rp, double tail_tol_rel) {
  if (traj.size() < 2) {
    CostReport zero;
    return zero;
  }
  CostReport report;
  double prev_state = 0.5 * traj.states[0].squaredNorm();
  double prev_ctrl = 0.5 * system.alpha * traj.controls[0] * traj.controls[0];
  double prev_rp =
      coeffs_for_rp ? residualRp(*coeffs_for_rp, system, traj.states[0]) : 0.0;
  for (size_t i = 1; i < traj.size(); ++i) {
    const double dt = traj.times[i] - traj.times[i - 1];
    const double cur_state = 0.5 * traj.states[i].squaredNorm();
    const double cur_ctrl = 0.5 * system.alpha * traj.controls[i] * traj.controls[i];
    report.state_cost += 0.5 * dt * (prev_state + cur_state);
    report.control_cost += 0.5 * dt * (prev_ctrl + cur_ctrl);
    if (coeffs_for_rp) {
      const double cur_rp = residualRp(*coeffs_for_rp, system, traj.states[i]);
      report.remainder_cost += 0.5 * dt * (prev_rp + cur_rp);
      prev_rp = cur_rp;
    }
    prev_state = cur_state;
    prev_ctrl = cur_ctrl;
  }
  const Vector& yT = traj.states.back();
  report.tail_estimate = 0.5 * yT.dot(Pi * yT);
  const double tail_tol = tail_tol_rel * std::max(1.0, traj.states.front().norm());
  report.tail_flagged = yT.norm() > tail_tol;
  report.total_J = report.state_cost + report.control_cost + report.tail_estimate;
  report.total_Jp = report.total_J + report.remainder_cost;
  return report;
}

}  // namespace

CostReport costJ(const Trajectory& traj, const BilinearSystem& system, const Matrix& Pi,
                 double tail_tol_rel) {
  return integrateCosts(traj, system, Pi, nullptr, tail_tol_rel);
}

CostReport costJp(const Trajectory& traj, const BilinearSystem& system,
                  const ExpansionCoeffs& coeffs, double tail_tol_rel) {
  return integrateCosts(traj, system, coeffs.Pi, &coeffs, tail_tol_rel);
}

}  // namespace hjb
