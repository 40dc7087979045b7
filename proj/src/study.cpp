#include "hjb/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include "hjb/dynamics.hpp"
#include "hjb/valuefn.hpp"

namespace hjb {

std::vector<Vector> studyDirections(const RunConfig& config, int count, unsigned seed) {
  const int n = config.system.n;
  std::vector<Vector> dirs;
  dirs.reserve(static_cast<size_t>(count));

  // Structured direction: Gaussian bump, mean removed.
  if (config.is_fokker_planck) {
    const auto& fp = config.discretization;
    const int m = config.fp.cells;
    const double h = fp.full.cell_width;
    Vector bump(m);
    const double width = 0.15 * (config.fp.x_hi - config.fp.x_lo);
    const double center = config.fp.x_lo + 0.3 * (config.fp.x_hi - config.fp.x_lo);
    for (int i = 0; i < m; ++i) {
      const double x = config.fp.x_lo + (i + 0.5) * h;
      bump[i] = std::exp(-std::pow((x - center) / width, 2));
    }
    Vector c = reduceVector(fp, bump);
    dirs.push_back(c / c.norm());
  } else {
    Vector bump(n);
    const double center = 0.5 * (n - 1);
    const double width = std::max(1.0, n / 4.0);
    for (int i = 0; i < n; ++i) bump[i] = std::exp(-std::pow((i - center) / width, 2));
    bump.array() -= bump.mean();
    if (bump.norm() < 1e-14) bump[0] = 1.0;  // n == 1 has no zero-mean bump
    dirs.push_back(bump / bump.norm());
  }

  for (int d = 1; d < count; ++d) {
    std::mt19937 rng(seed + static_cast<unsigned>(d));
    std::normal_distribution<double> gauss(0.0, 1.0);
    if (config.is_fokker_planck) {
      // Random smooth density perturbation: seeded coefficients on the first
      // few zero-mean cosine modes. Grid-scale noise vectors would load the
      // stiffest eigenmodes of the diffusion operator, whose trajectories the
      // fixed-step integrator cannot resolve below the study's error signals.
      const auto& fp = config.discretization;
      const int m = config.fp.cells;
      const double h = fp.full.cell_width;
      const double L = config.fp.x_hi - config.fp.x_lo;
      const int modes = std::min(4, m - 1);
      Vector v = Vector::Zero(m);
      for (int k = 1; k <= modes; ++k) {
        const double c = gauss(rng);
        for (int i = 0; i < m; ++i) {
          const double x = config.fp.x_lo + (i + 0.5) * h;
          v[i] += c * std::cos(k * M_PI * (x - config.fp.x_lo) / L);
        }
      }
      Vector r = reduceVector(fp, v);
      dirs.push_back(r / r.norm());
    } else {
      Vector v(n);
      for (int i = 0; i < n; ++i) v[i] = gauss(rng);
      if (n > 1) v.array() -= v.mean();
      dirs.push_back(v / v.norm());
    }
  }
  dirs.resize(static_cast<size_t>(count), dirs.front());
  return dirs;
}

namespace {

// Midpoint refinement of a sampled control onto the doubled grid; exact for
// the piecewise-linear interpolant.
SampledControl refineControl(const SampledControl& coarse) {
  SampledControl fine;
  fine.T = coarse.T;
  const size_t m = coarse.u.size() - 1;
  fine.u.resize(2 * m + 1);
  for (size_t i = 0; i < m; ++i) {
    fine.u[2 * i] = coarse.u[i];
    fine.u[2 * i + 1] = 0.5 * (coarse.u[i] + coarse.u[i + 1]);
  }
  fine.u[2 * m] = coarse.u[m];
  return fine;
}

double controlDistance(const SampledControl& a, const SampledControl& b) {
  const double h = a.step();
  double acc = 0.0;
  for (size_t k = 0; k < a.u.size(); ++k) {
    const double w = (k == 0 || k + 1 == a.u.size()) ? 0.5 * h : h;
    const double d = a.u[k] - b.u[k];
    acc += w * d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

StudyRecord evalStudyPoint(const BilinearSystem& system, const ExpansionCoeffs& coeffs,
                           const Vector& direction, double scale) {
  StudyRecord rec;
  rec.system_label = system.label;
  rec.p = coeffs.degree;
  rec.scale = scale;
  const Vector y0 = scale * direction;
  rec.Vp = evalVp(coeffs, y0);

  // Tolerances sized against the smallest resolvable error signal: the
  // optimizer contributes ~|g|^2/(2*alpha*h) to the value and ~|g|/(alpha*h)
  // to the control, both well below the studied scales at grad_tol 1e-10.
  OracleOptions opts;
  opts.grad_tol = 1e-10;
  opts.max_iterations = 600;

  try {
    const double abscissa = -coeffs.spectrum.spectralAbscissa();
    const double T = 20.0 / abscissa;
    const int m = std::max(2000, static_cast<int>(std::llround(T / (4e-3 / abscissa))));

    // Coarse and doubled grids; Richardson step-extrapolation removes the
    // second-order time-discretization bias from both the oracle value and
    // the feedback cost while keeping each pair on a common grid.
    SampledControl warm_c = warmStartControl(system, coeffs, y0, T, m);
    const double J_c = oracleObjective(system, coeffs.Pi, y0, warm_c);
    OracleResult orc_c = solveOpenLoopOptimal(system, coeffs, y0, T, m, warm_c, opts);

    SampledControl warm_f = warmStartControl(system, coeffs, y0, T, 2 * m);
    const double J_f = oracleObjective(system, coeffs.Pi, y0, warm_f);
    OracleResult orc_f =
        solveOpenLoopOptimal(system, coeffs, y0, T, 2 * m, refineControl(orc_c.control), opts);

    rec.V_hat = (4.0 * orc_f.value - orc_c.value) / 3.0;
    rec.J_up = (4.0 * J_f - J_c) / 3.0;
    rec.control_err = controlDistance(orc_f.control, warm_f);
    rec.oracle_degraded = orc_c.degraded || orc_f.degraded;

    Trajectory traj = simulateClosedLoop(system, coeffs, y0);
    CostReport jp = costJp(traj, system, coeffs);
    rec.Jp_up = jp.total_Jp;
    rec.remainder_integral = jp.remainder_cost;
  } catch (const NumericalError&) {
    rec.diverged = true;
  }
  return rec;
}

std::vector<StudyRecord> runStudy(const RunConfig& config, const std::vector<int>& ps,
                                  const std::vector<double>& scales, int directions, int jobs,
                                  unsigned seed) {
  std::vector<Vector> dirs = studyDirections(config, directions, seed);

  struct Point {
    size_t p_idx, d_idx, s_idx;
  };
  std::vector<Point> points;
  for (size_t pi = 0; pi < ps.size(); ++pi)
    for (size_t di = 0; di < dirs.size(); ++di)
      for (size_t si = 0; si < scales.size(); ++si) points.push_back({pi, di, si});

  // Expansion per degree, shared across workers (read-only afterwards).
  std::vector<ExpansionCoeffs> expansions;
  const RiccatiSolution riccati =
      solveRiccati(config.system.A, config.system.B, Matrix::Identity(config.system.n, config.system.n),
                   config.system.alpha);
  for (int p : ps) expansions.push_back(buildExpansion(config.system, p, riccati));

  std::vector<StudyRecord> records(points.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      const Point& pt = points[i];
      records[i] = evalStudyPoint(config.system, expansions[pt.p_idx], dirs[pt.d_idx],
                                  scales[pt.s_idx]);
      records[i].direction = static_cast<int>(pt.d_idx);
      records[i].seed = seed;
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return records;
}

SlopeFit fitSlope(const std::vector<double>& scales, const std::vector<double>& errors,
                  const std::vector<bool>& flagged, double floor) {
  SlopeFit fit;
  std::vector<double> lx, ly;
  bool any_unflagged = false;
  for (size_t i = 0; i < scales.size(); ++i) {
    if (flagged[i]) continue;
    any_unflagged = true;
    if (!(std::abs(errors[i]) > floor)) continue;  // noise floor
    lx.push_back(std::log(scales[i]));
    ly.push_back(std::log(std::abs(errors[i])));
  }
  fit.points = static_cast<int>(lx.size());
  if (fit.points < 3) {
    fit.inconclusive = true;
    fit.floor = any_unflagged;  // usable points existed but sat below the floor
    return fit;
  }
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return fit;
}

void writeStudyCsv(const std::string& path, const std::vector<StudyRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << "system,p,direction,seed,scale,V_hat,Vp,J_up,Jp_up,control_err,"
         "remainder_integral,oracle_degraded,diverged\n";
  out.precision(17);
  for (const auto& r : records) {
    out << r.system_label << "," << r.p << "," << r.direction << "," << r.seed << ","
        << r.scale << "," << r.V_hat << "," << r.Vp << "," << r.J_up << "," << r.Jp_up << ","
        << r.control_err << "," << r.remainder_integral << "," << (r.oracle_degraded ? 1 : 0)
        << "," << (r.diverged ? 1 : 0) << "\n";
  }
}

}  // namespace hjb
