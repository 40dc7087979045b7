#pragma once

#include <string>

#include <json.hpp>

#include "hjb/dynamics.hpp"
#include "hjb/fokker_planck.hpp"
#include "hjb/lyapchain.hpp"
#include "hjb/multilinear.hpp"
#include "hjb/system.hpp"
#include "hjb/types.hpp"

namespace hjb {

// JSON round trips for the core types.  Matrices are stored row-major as
// {"rows": r, "cols": c, "data": [...]}; tensors as
// {"order": k, "dim": n, "entries": [...]} (row-major, last index fastest).
nlohmann::json matrixToJson(const Matrix& M);
Matrix matrixFromJson(const nlohmann::json& j);
nlohmann::json vectorToJson(const Vector& v);
Vector vectorFromJson(const nlohmann::json& j);
nlohmann::json tensorToJson(const SymTensor& t);
SymTensor tensorFromJson(const nlohmann::json& j);

// Content hash of a system + degree, used as the expansion cache key.
std::string systemDigest(const BilinearSystem& system, int degree);

nlohmann::json expansionToJson(const BilinearSystem& system, const ExpansionCoeffs& coeffs);
// Verifies the stored digest against the system; throws IntegrityError on
// mismatch or malformed payloads.
ExpansionCoeffs expansionFromJson(const nlohmann::json& j, const BilinearSystem& system);

struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Run configuration: either a Fokker-Planck preset or explicit matrices.
struct RunConfig {
  std::string label;
  bool is_fokker_planck = false;
  FPConfig fp;
  DiscretizedFP discretization;  // populated when is_fokker_planck
  BilinearSystem system;         // always populated after loading
};

RunConfig loadConfig(const std::string& path);

nlohmann::json costReportToJson(const CostReport& report);

// CSV schema: t,u,y_norm,y0,...,y{n-1}; one row per time step.
void writeTrajectoryCsv(const std::string& path, const Trajectory& traj);

}  // namespace hjb
