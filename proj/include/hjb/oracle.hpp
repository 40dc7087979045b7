#pragma once

#include <optional>

#include "hjb/dynamics.hpp"

namespace hjb {

struct OracleResult {
  SampledControl control;          // optimized open-loop control u*
  double value = 0.0;              // discrete objective at u*
  double gradient_norm_final = 0.0;
  int iterations = 0;
  Trajectory trajectory;
  bool degraded = false;           // line search stalled before grad_tol
  bool refinement_flag = false;    // set by estimateV when grids disagree
};

struct OracleOptions {
  double grad_tol = 1e-9;   // relative to max(1, |objective|)
  int max_iterations = 500;
  int lbfgs_memory = 10;
};

// Finite-horizon objective for a sampled control over [0, T]:
//   Jhat(u) = trapz(1/2||y||^2 + alpha/2 u^2) + 1/2 y(T)' Pi y(T),
// with the forward solve on the control grid. Used both for optimization
// and for evaluating candidate controls on a matched discretization.
double oracleObjective(const BilinearSystem& system, const Matrix& Pi, const Vector& y0,
                       const SampledControl& control);

// Same objective plus its exact discrete-adjoint gradient with respect to
// the control samples.
double oracleObjectiveWithGradient(const BilinearSystem& system, const Matrix& Pi,
                                   const Vector& y0, const SampledControl& control,
                                   Vector& grad_out);

// Direct open-loop optimization by limited-memory quasi-Newton descent with
// backtracking. `init` defaults to the u_p closed-loop control (warm start).
OracleResult solveOpenLoopOptimal(const BilinearSystem& system, const ExpansionCoeffs& coeffs,
                                  const Vector& y0, double horizon, int grid_points,
                                  const std::optional<SampledControl>& init = std::nullopt,
                                  const OracleOptions& opts = {});

enum class OracleQuality { fast, reference };

// Value probe with grid/horizon presets derived from the closed-loop
// spectral abscissa; `reference` doubles both and cross-checks.
double estimateV(const BilinearSystem& system, const ExpansionCoeffs& coeffs, const Vector& y0,
                 OracleQuality quality, OracleResult* detail = nullptr);

// Warm-start control: run the u_p closed loop and resample its control onto
// the oracle grid.
SampledControl warmStartControl(const BilinearSystem& system, const ExpansionCoeffs& coeffs,
                                const Vector& y0, double horizon, int grid_points);

}  // namespace hjb
