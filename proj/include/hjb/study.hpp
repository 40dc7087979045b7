#pragma once

#include <string>
#include <vector>

#include "hjb/oracle.hpp"
#include "hjb/serialize.hpp"

namespace hjb {

// One convergence-study sample: feedback of degree p applied from y0 =
// scale * direction, compared against the open-loop oracle.
struct StudyRecord {
  std::string system_label;
  int p = 0;
  int direction = 0;
  unsigned seed = 0;
  double scale = 0.0;
  double V_hat = 0.0;        // oracle value estimate (step-extrapolated)
  double Vp = 0.0;           // polynomial value at y0
  double J_up = 0.0;         // cost of the degree-p feedback (same grids)
  double Jp_up = 0.0;        // perturbed cost of the feedback trajectory
  double control_err = 0.0;  // L2 distance between oracle and feedback control
  double remainder_integral = 0.0;
  bool oracle_degraded = false;
  bool diverged = false;
};

struct SlopeFit {
  double slope = 0.0;
  int points = 0;
  bool inconclusive = false;  // fewer than 3 usable points
  bool floor = false;         // all points below the noise floor
};

// Unit-norm study directions: index 0 is a structured Gaussian bump (built
// through the zero-mean reduction for Fokker-Planck configs), the rest are
// seeded random zero-mean vectors.
std::vector<Vector> studyDirections(const RunConfig& config, int count, unsigned seed);

StudyRecord evalStudyPoint(const BilinearSystem& system, const ExpansionCoeffs& coeffs,
                           const Vector& direction, double scale);

// Full sweep over (p, direction, scale), dispatched to `jobs` workers,
// output ordered by (p, direction index, descending scale).
std::vector<StudyRecord> runStudy(const RunConfig& config, const std::vector<int>& ps,
                                  const std::vector<double>& scales, int directions, int jobs,
                                  unsigned seed);

// Least-squares slope of log(err) against log(scale), skipping flagged
// points and points below the noise floor.
SlopeFit fitSlope(const std::vector<double>& scales, const std::vector<double>& errors,
                  const std::vector<bool>& flagged, double floor = 1e-11);

void writeStudyCsv(const std::string& path, const std::vector<StudyRecord>& records);

}  // namespace hjb
