#include "hjb/serialize.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include "hjb/spectral.hpp"

namespace hjb {

using nlohmann::json;

json matrixToJson(const Matrix& M) {
  json data = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
  return json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", std::move(data)}};
}

Matrix matrixFromJson(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw IntegrityError("matrix payload size mismatch");
  Matrix M(rows, cols);
  size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = data[k++].get<double>();
  return M;
}

json vectorToJson(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vectorFromJson(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

json tensorToJson(const SymTensor& t) {
  json entries = json::array();
  for (Eigen::Index i = 0; i < t.entries().size(); ++i) entries.push_back(t.entries()[i]);
  return json{{"order", t.order()}, {"dim", t.dim()}, {"entries", std::move(entries)}};
}

SymTensor tensorFromJson(const json& j) {
  const int order = j.at("order").get<int>();
  const int dim = j.at("dim").get<int>();
  const auto data = j.at("entries").get<std::vector<double>>();
  Vector entries = Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
  // Re-symmetrizing restores the bit-exact invariance flag after the round
  // trip (a no-op up to rounding for well-formed payloads).
  return SymTensor::fromEntries(order, dim, entries, /*symmetrize=*/true);
}

namespace {

// FNV-1a over the exact bit patterns of the system data.
void hashBytes(uint64_t& h, const void* ptr, size_t len) {
  const auto* p = static_cast<const unsigned char*>(ptr);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
}

void hashMatrix(uint64_t& h, const Matrix& M) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      const double v = M(i, j);
      hashBytes(h, &v, sizeof v);
    }
}

}  // namespace

std::string systemDigest(const BilinearSystem& system, int degree) {
  uint64_t h = 1469598103934665603ull;
  const int n = system.n;
  hashBytes(h, &n, sizeof n);
  hashBytes(h, &degree, sizeof degree);
  hashBytes(h, &system.alpha, sizeof system.alpha);
  hashMatrix(h, system.A);
  hashMatrix(h, system.N);
  hashMatrix(h, system.B);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json expansionToJson(const BilinearSystem& system, const ExpansionCoeffs& coeffs) {
  json tensors = json::array();
  for (int k = 3; k <= coeffs.degree; ++k) tensors.push_back(tensorToJson(coeffs.tensor(k)));
  return json{{"schema_version", 1},
              {"digest", systemDigest(system, coeffs.degree)},
              {"n", coeffs.n},
              {"degree", coeffs.degree},
              {"alpha", coeffs.alpha},
              {"Pi", matrixToJson(coeffs.Pi)},
              {"tensors", std::move(tensors)}};
}

ExpansionCoeffs expansionFromJson(const json& j, const BilinearSystem& system) {
  ExpansionCoeffs coeffs;
  try {
    coeffs.n = j.at("n").get<int>();
    coeffs.degree = j.at("degree").get<int>();
    coeffs.alpha = j.at("alpha").get<double>();
    coeffs.Pi = matrixFromJson(j.at("Pi"));
    for (const auto& tj : j.at("tensors")) coeffs.tensors.push_back(tensorFromJson(tj));
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("malformed expansion payload: ") + e.what());
  }
  if (j.value("digest", "") != systemDigest(system, coeffs.degree))
    throw IntegrityError("expansion cache digest does not match the system");
  if (coeffs.n != system.n || static_cast<int>(coeffs.tensors.size()) !=
                                  std::max(0, coeffs.degree - 2))
    throw IntegrityError("expansion payload inconsistent with its header");
  for (int k = 3; k <= coeffs.degree; ++k) {
    const SymTensor& t = coeffs.tensor(k);
    if (t.order() != k || t.dim() != coeffs.n || !t.symmetric())
      throw IntegrityError("expansion tensor fails shape or symmetry check");
  }
  coeffs.spectrum = eig(closedLoopMatrix(system.A, system.B, coeffs.Pi, coeffs.alpha));
  coeffs.closed_loop = closedLoopMatrix(system.A, system.B, coeffs.Pi, coeffs.alpha);
  return coeffs;
}

RunConfig loadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  in >> j;
  if (j.value("schema_version", 0) != 1)
    throw std::runtime_error("config schema_version must be 1");

  RunConfig cfg;
  cfg.label = j.value("label", "unnamed");
  const std::string type = j.at("type").get<std::string>();
  if (type == "fokker_planck") {
    FPConfig& fp = cfg.fp;
    fp.x_lo = j.value("x_lo", fp.x_lo);
    fp.x_hi = j.value("x_hi", fp.x_hi);
    fp.cells = j.value("cells", fp.cells);
    fp.nu = j.value("nu", fp.nu);
    fp.potential = j.value("potential", fp.potential);
    fp.kappa = j.value("kappa", fp.kappa);
    fp.x_center = j.value("x_center", fp.x_center);
    fp.control_shape = j.value("control_shape", fp.control_shape);
    fp.alpha_cost = j.value("alpha", fp.alpha_cost);
    fp.validate();
    cfg.is_fokker_planck = true;
    cfg.discretization = buildFPSystem(fp);
    cfg.system = cfg.discretization.reduced;
    cfg.system.label = cfg.label;
  } else if (type == "explicit") {
    cfg.system.A = matrixFromJson(j.at("A"));
    cfg.system.N = matrixFromJson(j.at("N"));
    cfg.system.B = vectorFromJson(j.at("B"));
    cfg.system.alpha = j.value("alpha", 1.0);
    cfg.system.n = static_cast<int>(cfg.system.A.rows());
    cfg.system.label = cfg.label;
    cfg.system.validate();
  } else {
    throw std::runtime_error("config type must be 'fokker_planck' or 'explicit'");
  }
  return cfg;
}

json costReportToJson(const CostReport& report) {
  return json{{"state_cost", report.state_cost},
              {"control_cost", report.control_cost},
              {"remainder_cost", report.remainder_cost},
              {"tail_estimate", report.tail_estimate},
              {"total_J", report.total_J},
              {"total_Jp", report.total_Jp},
              {"tail_flagged", report.tail_flagged}};
}

void writeTrajectoryCsv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
  out << "t,u,y_norm";
  for (Eigen::Index i = 0; i < n; ++i) out << ",y" << i;
  out << "\n";
  out.precision(17);
  for (size_t k = 0; k < traj.times.size(); ++k) {
    out << traj.times[k] << "," << traj.controls[k] << "," << traj.states[k].norm();
    for (Eigen::Index i = 0; i < n; ++i) out << "," << traj.states[k][i];
    out << "\n";
  }
}

}  // namespace hjb
