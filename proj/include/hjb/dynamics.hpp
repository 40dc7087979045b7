#pragma once

#include <vector>

#include "hjb/lyapchain.hpp"
#include "hjb/system.hpp"

namespace hjb {

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<double> controls;
  double terminal_norm = 0.0;

  size_t size() const { return times.size(); }
};

struct CostReport {
  double state_cost = 0.0;
  double control_cost = 0.0;
  double remainder_cost = 0.0;  // integral of r_p along the trajectory
  double tail_estimate = 0.0;
  double total_J = 0.0;
  double total_Jp = 0.0;
  bool tail_flagged = false;  // terminal state had not decayed to tail_tol
};

// Control sampled on a uniform grid over [0, T], piecewise linear in
// between.
struct SampledControl {
  double T = 0.0;
  std::vector<double> u;

  double step() const { return T / static_cast<double>(u.size() - 1); }
  double at(double t) const;
};

struct SimOptions {
  double T_max = 0.0;       // 0: derive from the spectral abscissa (40/|a|)
  double h = 0.0;           // 0: derive from the spectral abscissa (1e-3/|a|)
  double tail_tol_rel = 1e-8;   // stop when ||y|| <= tail_tol_rel * max(1,||y0||)
  double blowup_abs = 1e3;      // divergence guards
  double blowup_rel = 1e6;
  bool stop_at_tail = true;
};

// Closed loop dy/dt = A_Pi y + F(y) with the Crank-Nicolson/Heun IMEX
// scheme: A_Pi implicit (trapezoidal), the polynomial nonlinearity F
// explicit with a two-stage predictor-corrector.
Trajectory simulateClosedLoop(const BilinearSystem& system, const ExpansionCoeffs& coeffs,
                              const Vector& y0, const SimOptions& opts = {});

// Open loop dy/dt = A y + (N y + B) u(t), A implicit, control term explicit.
Trajectory simulateOpenLoop(const BilinearSystem& system, const Vector& y0,
                            const SampledControl& control, const SimOptions& opts = {});

// Trapezoidal quadrature of the running cost plus the quadratic tail
// 1/2 y(T)' Pi y(T).
CostReport costJ(const Trajectory& traj, const BilinearSystem& system, const Matrix& Pi,
                 double tail_tol_rel = 1e-8);
CostReport costJp(const Trajectory& traj, const BilinearSystem& system,
                  const ExpansionCoeffs& coeffs, double tail_tol_rel = 1e-8);

// Default step/horizon from the closed-loop spectral abscissa.
SimOptions defaultSimOptions(const ExpansionCoeffs& coeffs);

}  // namespace hjb
