#include "hjb/oracle.hpp"

#include <cmath>
#include <deque>
#include <sstream>

#include "hjb/valuefn.hpp"

namespace hjb {

namespace {

// Forward pass of the IMEX trapezoidal/Heun step on the control grid.
// Records the predictor stages, which the discrete adjoint needs.
struct ForwardData {
  std::vector<Vector> states;      // y_0..y_m
  std::vector<Vector> predictors;  // s_0..s_{m-1}
};

struct OracleWorkspace {
  const BilinearSystem* system;
  Matrix Pi;
  double h;
  Eigen::PartialPivLU<Matrix> lu;   // I - h/2 A
  Eigen::PartialPivLU<Matrix> luT;  // (I - h/2 A)'
  Matrix M0;                        // I + h/2 A

  OracleWorkspace(const BilinearSystem& sys, const Matrix& Pi_in, double step)
      : system(&sys), Pi(Pi_in), h(step) {
    const Matrix I = Matrix::Identity(sys.n, sys.n);
    lu.compute(I - 0.5 * step * sys.A);
    luT.compute((I - 0.5 * step * sys.A).transpose());
    M0 = I + 0.5 * step * sys.A;
  }

  Vector f(const Vector& y, double u) const { return (system->N * y + system->B) * u; }

  ForwardData forward(const Vector& y0, const std::vector<double>& u) const {
    const size_t m = u.size() - 1;
    ForwardData data;
    data.states.reserve(m + 1);
    data.predictors.reserve(m);
    Vector y = y0;
    data.states.push_back(y);
    for (size_t n = 0; n < m; ++n) {
      const Vector f0 = f(y, u[n]);
      Vector s = lu.solve(M0 * y + h * f0);
      y = lu.solve(M0 * y + 0.5 * h * (f0 + f(s, u[n + 1])));
      if (!y.allFinite()) throw NumericalError("oracle forward solve diverged");
      data.predictors.push_back(std::move(s));
      data.states.push_back(y);
    }
    return data;
  }

  double objective(const ForwardData& data, const std::vector<double>& u) const {
    const size_t m = u.size() - 1;
    const double alpha = system->alpha;
    double J = 0.0;
    for (size_t n = 0; n <= m; ++n) {
      const double w = (n == 0 || n == m) ? 0.5 * h : h;
      J += w * (0.5 * data.states[n].squaredNorm() + 0.5 * alpha * u[n] * u[n]);
    }
    const Vector& yT = data.states.back();
    J += 0.5 * yT.dot(Pi * yT);
    return J;
  }

  // Exact gradient of the discrete objective: reverse sweep of the
  // trapezoidal/Heun step (the discrete counterpart of the adjoint system
  // p' = -A'p - u N'p - y with terminal condition p(T) = Pi y(T)).
  Vector gradient(const ForwardData& data, const std::vector<double>& u) const {
    const size_t m = u.size() - 1;
    const double alpha = system->alpha;
    const Matrix& N = system->N;
    Vector grad = Vector::Zero(static_cast<Eigen::Index>(m) + 1);
    for (size_t n = 0; n <= m; ++n) {
      const double w = (n == 0 || n == m) ? 0.5 * h : h;
      grad[static_cast<Eigen::Index>(n)] = w * alpha * u[n];
    }
    Vector lambda = h * 0.5 * data.states[m] + Pi * data.states[m];
    for (size_t n = m; n-- > 0;) {
      const Vector& y = data.states[n];
      const Vector& s = data.predictors[n];
      const Vector c = luT.solve(lambda);
      grad[static_cast<Eigen::Index>(n) + 1] += 0.5 * h * c.dot(N * s + system->B);
      const Vector d = luT.solve((0.5 * h * u[n + 1]) * (N.transpose() * c));
      const double wn = (n == 0) ? 0.5 * h : h;
      grad[static_cast<Eigen::Index>(n)] +=
          h * d.dot(N * y + system->B) + 0.5 * h * c.dot(N * y + system->B);
      lambda = M0.transpose() * (c + d) + u[n] * (N.transpose() * (h * d + 0.5 * h * c)) +
               wn * y;
    }
    return grad;
  }
};

}  // namespace

double oracleObjective(const BilinearSystem& system, const Matrix& Pi, const Vector& y0,
                       const SampledControl& control) {
  OracleWorkspace ws(system, Pi, control.step());
  return ws.objective(ws.forward(y0, control.u), control.u);
}

double oracleObjectiveWithGradient(const BilinearSystem& system, const Matrix& Pi,
                                   const Vector& y0, const SampledControl& control,
                                   Vector& grad_out) {
  OracleWorkspace ws(system, Pi, control.step());
  ForwardData data = ws.forward(y0, control.u);
  grad_out = ws.gradient(data, control.u);
  return ws.objective(data, control.u);
}

SampledControl warmStartControl(const BilinearSystem& system, const ExpansionCoeffs& coeffs,
                                const Vector& y0, double horizon, int grid_points) {
  SimOptions opts;
  opts.h = horizon / grid_points;
  opts.T_max = horizon;
  opts.stop_at_tail = false;
  Trajectory traj = simulateClosedLoop(system, coeffs, y0, opts);
  SampledControl ctrl;
  ctrl.T = horizon;
  ctrl.u = traj.controls;
  ctrl.u.resize(static_cast<size_t>(grid_points) + 1, traj.controls.back());
  return ctrl;
}

OracleResult solveOpenLoopOptimal(const BilinearSystem& system, const ExpansionCoeffs& coeffs,
                                  const Vector& y0, double horizon, int grid_points,
                                  const std::optional<SampledControl>& init,
                                  const OracleOptions& opts) {
  system.validate();
  const double abscissa = -coeffs.spectrum.spectralAbscissa();
  if (horizon < 20.0 / abscissa)
    throw std::invalid_argument("solveOpenLoopOptimal: horizon shorter than 20/|abscissa|");
  if (grid_points < 2000)
    throw std::invalid_argument("solveOpenLoopOptimal: need at least 2000 grid points");

  SampledControl ctrl =
      init.value_or(warmStartControl(system, coeffs, y0, horizon, grid_points));
  if (static_cast<int>(ctrl.u.size()) != grid_points + 1 || std::abs(ctrl.T - horizon) > 1e-12)
    throw std::invalid_argument("solveOpenLoopOptimal: init control grid mismatch");

  OracleWorkspace ws(system, coeffs.Pi, horizon / grid_points);

  using ControlVec = Vector;
  ControlVec x = Eigen::Map<const Vector>(ctrl.u.data(), static_cast<Eigen::Index>(ctrl.u.size()));
  auto evalAt = [&](const ControlVec& v, Vector* grad) -> double {
    std::vector<double> u(v.data(), v.data() + v.size());
    ForwardData data = ws.forward(y0, u);
    if (grad) *grad = ws.gradient(data, u);
    return ws.objective(data, u);
  };

  Vector g;
  double fx = evalAt(x, &g);

  // Two-loop L-BFGS with Armijo backtracking.
  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  bool degraded = false;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    if (g.norm() <= opts.grad_tol * std::max(1.0, std::abs(fx))) break;

    Vector q = g;
    std::vector<double> alpha_coef(s_hist.size());
    for (size_t i = s_hist.size(); i-- > 0;) {
      alpha_coef[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha_coef[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha_coef[i] - beta) * s_hist[i];
    }
    Vector dir = -q;
    double slope = g.dot(dir);
    if (slope >= 0) {  // fall back to steepest descent
      dir = -g;
      slope = -g.squaredNorm();
    }

    double t = 1.0;
    double f_new = 0.0;
    ControlVec x_new;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + t * dir;
      f_new = evalAt(x_new, nullptr);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      degraded = true;
      break;
    }

    Vector g_new;
    f_new = evalAt(x_new, &g_new);
    const Vector s_vec = x_new - x;
    const Vector y_vec = g_new - g;
    const double sy = s_vec.dot(y_vec);
    if (sy > 1e-12 * s_vec.norm() * y_vec.norm()) {
      s_hist.push_back(s_vec);
      y_hist.push_back(y_vec);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.lbfgs_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    fx = f_new;
    g = g_new;
  }
  if (iter == opts.max_iterations && g.norm() > opts.grad_tol * std::max(1.0, std::abs(fx)))
    degraded = true;

  OracleResult result;
  result.control.T = horizon;
  result.control.u.assign(x.data(), x.data() + x.size());
  result.value = fx;
  result.gradient_norm_final = g.norm();
  result.iterations = iter;
  result.degraded = degraded;

  ForwardData data = ws.forward(y0, result.control.u);
  const double h = horizon / grid_points;
  result.trajectory.times.resize(data.states.size());
  for (size_t i = 0; i < data.states.size(); ++i)
    result.trajectory.times[i] = static_cast<double>(i) * h;
  result.trajectory.states = std::move(data.states);
  result.trajectory.controls = result.control.u;
  result.trajectory.terminal_norm = result.trajectory.states.back().norm();
  return result;
}

double estimateV(const BilinearSystem& system, const ExpansionCoeffs& coeffs, const Vector& y0,
                 OracleQuality quality, OracleResult* detail) {
  if (y0.norm() == 0.0) {
    if (detail) *detail = OracleResult{};
    return 0.0;
  }
  const double abscissa = -coeffs.spectrum.spectralAbscissa();
  const double T_fast = 40.0 / abscissa;
  const int m_fast = std::max(2000, static_cast<int>(std::llround(T_fast / (2e-3 / abscissa))));

  OracleResult fast = solveOpenLoopOptimal(system, coeffs, y0, T_fast, m_fast);
  if (quality == OracleQuality::fast) {
    if (detail) *detail = fast;
    return fast.value;
  }

  // Reference: double both horizon and grid, warm start from the fast
  // solution padded with zeros.
  const double T_ref = 2.0 * T_fast;
  const int m_ref = 2 * m_fast;
  SampledControl warm;
  warm.T = T_ref;
  warm.u = fast.control.u;
  warm.u.resize(static_cast<size_t>(m_ref) + 1, 0.0);
  OracleResult ref = solveOpenLoopOptimal(system, coeffs, y0, T_ref, m_ref, warm);
  const double denom = std::max({1e-12, std::abs(ref.value), std::abs(fast.value)});
  if (std::abs(ref.value - fast.value) / denom > 1e-6) ref.refinement_flag = true;
  if (detail) *detail = ref;
  return ref.value;
}

}  // namespace hjb
