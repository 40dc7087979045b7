// hjbctl: build polynomial value-function expansions for bilinear control
// systems, simulate the induced feedback, and run convergence studies
// against an open-loop optimization oracle.
//
// Exit codes: 0 success, 2 config/usage error, 3 numerical failure,
// 4 integrity failure (corrupted cache).
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "hjb/dynamics.hpp"
#include "hjb/oracle.hpp"
#include "hjb/serialize.hpp"
#include "hjb/study.hpp"
#include "hjb/valuefn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIntegrity = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<int> parsePList(const std::string& s) {
  std::vector<int> ps;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) ps.push_back(std::stoi(tok));
  if (ps.empty()) throw ConfigError("empty --p list");
  for (int p : ps)
    if (p < 2 || p > 8) throw ConfigError("--p entries must be in [2,8]");
  return ps;
}

std::vector<double> parseScales(const std::string& s) {
  std::vector<double> scales;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) scales.push_back(std::stod(tok));
  if (scales.size() < 4) throw ConfigError("--scales needs at least 4 values");
  for (double v : scales)
    if (!(v > 0)) throw ConfigError("--scales entries must be positive");
  for (size_t i = 1; i + 1 < scales.size(); ++i) {
    const double r1 = scales[i] / scales[i - 1];
    const double r2 = scales[i + 1] / scales[i];
    if (std::abs(r1 - r2) > 1e-9 * std::abs(r1))
      throw ConfigError("--scales must form a geometric sequence");
  }
  return scales;
}

// Cache file name is the content digest, so any system or degree change
// misses the cache instead of hitting a stale entry.
fs::path cachePath(const fs::path& dir, const hjb::BilinearSystem& system, int p) {
  return dir / (hjb::systemDigest(system, p) + ".json");
}

hjb::ExpansionCoeffs loadOrBuild(const hjb::RunConfig& cfg, int p, const fs::path& cache_dir,
                                 bool* cache_hit = nullptr) {
  const fs::path path = cachePath(cache_dir, cfg.system, p);
  if (fs::exists(path)) {
    std::ifstream in(path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw hjb::IntegrityError(std::string("unreadable cache file: ") + e.what());
    }
    if (cache_hit) *cache_hit = true;
    return hjb::expansionFromJson(j, cfg.system);
  }
  const hjb::RiccatiSolution riccati =
      hjb::solveRiccati(cfg.system.A, cfg.system.B,
                        hjb::Matrix::Identity(cfg.system.n, cfg.system.n), cfg.system.alpha);
  hjb::ExpansionCoeffs coeffs = hjb::buildExpansion(cfg.system, p, riccati);
  fs::create_directories(cache_dir);
  std::ofstream out(path);
  out << hjb::expansionToJson(cfg.system, coeffs).dump(2) << "\n";
  if (cache_hit) *cache_hit = false;
  return coeffs;
}

int cmdExpand(const std::string& config_path, int p, const std::string& cache_dir) {
  hjb::RunConfig cfg = hjb::loadConfig(config_path);
  bool hit = false;
  hjb::ExpansionCoeffs coeffs = loadOrBuild(cfg, p, cache_dir, &hit);
  std::cout << "system: " << cfg.label << " (n=" << cfg.system.n << ")\n"
            << "degree: " << p << "\n"
            << "cache:  " << (hit ? "hit" : "miss") << " "
            << cachePath(cache_dir, cfg.system, p).string() << "\n";

  const hjb::Matrix riccati_residual =
      cfg.system.A.transpose() * coeffs.Pi + coeffs.Pi * cfg.system.A +
      hjb::Matrix::Identity(cfg.system.n, cfg.system.n) -
      (1.0 / cfg.system.alpha) * coeffs.Pi * cfg.system.B * cfg.system.B.transpose() * coeffs.Pi;
  std::cout << "riccati residual:        " << riccati_residual.norm() << "\n"
            << "closed-loop abscissa:    " << coeffs.spectrum.spectralAbscissa() << "\n";
  for (int k = 3; k <= p; ++k) {
    const hjb::SymTensor R =
        hjb::assembleR(k, coeffs.Pi, coeffs.tensors, cfg.system.N, cfg.system.B);
    std::cout << "T_" << k << " lyapunov defect:     "
              << hjb::lyapunovResidual(coeffs.tensor(k), R, coeffs.closed_loop, coeffs.alpha,
                                       20, 7u)
              << "\n";
  }
  return 0;
}

hjb::Vector parseY0(const hjb::RunConfig& cfg, const std::string& spec, unsigned seed) {
  // "<direction>:<scale>" with direction = bump | rand<k>.
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("--y0 must be '<direction>:<scale>'");
  const std::string name = spec.substr(0, colon);
  const double scale = std::stod(spec.substr(colon + 1));
  int index = 0;
  if (name == "bump")
    index = 0;
  else if (name.rfind("rand", 0) == 0)
    index = std::stoi(name.substr(4));
  else
    throw ConfigError("unknown direction '" + name + "' (use bump or rand<k>)");
  if (index < 0) throw ConfigError("direction index must be nonnegative");
  auto dirs = hjb::studyDirections(cfg, index + 1, seed);
  return scale * dirs[static_cast<size_t>(index)];
}

int cmdSimulate(const std::string& config_path, int p, const std::string& y0_spec,
                const std::string& out_path, const std::string& cache_dir, unsigned seed) {
  hjb::RunConfig cfg = hjb::loadConfig(config_path);
  hjb::ExpansionCoeffs coeffs = loadOrBuild(cfg, p, cache_dir);
  const hjb::Vector y0 = parseY0(cfg, y0_spec, seed);

  hjb::Trajectory traj = hjb::simulateClosedLoop(cfg.system, coeffs, y0);
  hjb::CostReport report = hjb::costJp(traj, cfg.system, coeffs);
  hjb::writeTrajectoryCsv(out_path, traj);

  json j = hjb::costReportToJson(report);
  j["Vp_y0"] = hjb::evalVp(coeffs, y0);
  j["p"] = p;
  j["y0_spec"] = y0_spec;
  const std::string json_path = out_path + ".json";
  std::ofstream out(json_path);
  out << j.dump(2) << "\n";
  std::cout << "trajectory: " << out_path << "\ncosts:      " << json_path << "\n"
            << "J  = " << report.total_J << "\nJp = " << report.total_Jp << "\n";
  return 0;
}

int cmdStudy(const std::string& config_path, const std::vector<int>& ps,
             const std::vector<double>& scales, int directions, const std::string& out_path,
             int jobs, unsigned seed) {
  hjb::RunConfig cfg = hjb::loadConfig(config_path);
  std::vector<hjb::StudyRecord> records = hjb::runStudy(cfg, ps, scales, directions, jobs, seed);
  hjb::writeStudyCsv(out_path, records);
  std::cout << "records: " << out_path << "\n";

  std::cout << "slopes (log-err vs log-scale):\n";
  for (size_t pi = 0; pi < ps.size(); ++pi) {
    for (int d = 0; d < directions; ++d) {
      std::vector<double> sv, value_err, subopt, ctrl_err;
      std::vector<bool> flagged;
      for (const auto& r : records) {
        if (r.p != ps[pi] || r.direction != d) continue;
        sv.push_back(r.scale);
        value_err.push_back(r.V_hat - r.Vp);
        subopt.push_back(r.J_up - r.V_hat);
        ctrl_err.push_back(r.control_err);
        flagged.push_back(r.oracle_degraded || r.diverged);
      }
      auto report = [&](const char* name, const hjb::SlopeFit& fit) {
        std::cout << "  p=" << ps[pi] << " dir=" << d << " " << name << ": ";
        if (fit.inconclusive)
          std::cout << (fit.floor ? "floor" : "inconclusive") << "\n";
        else
          std::cout << fit.slope << " (" << fit.points << " pts)\n";
      };
      report("value_err ", hjb::fitSlope(sv, value_err, flagged));
      report("subopt    ", hjb::fitSlope(sv, subopt, flagged));
      report("control   ", hjb::fitSlope(sv, ctrl_err, flagged));
    }
  }
  return 0;
}

int cmdCheck(const std::string& config_path, int p, const std::string& cache_dir,
             unsigned seed) {
  hjb::RunConfig cfg = hjb::loadConfig(config_path);
  hjb::ExpansionCoeffs coeffs = loadOrBuild(cfg, p, cache_dir);
  const hjb::BilinearSystem& sys = cfg.system;
  int failures = 0;
  auto check = [&](const char* name, bool ok, double measure) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "  (" << measure << ")\n";
    if (!ok) ++failures;
  };

  const hjb::Matrix riccati_residual =
      sys.A.transpose() * coeffs.Pi + coeffs.Pi * sys.A + hjb::Matrix::Identity(sys.n, sys.n) -
      (1.0 / sys.alpha) * coeffs.Pi * sys.B * sys.B.transpose() * coeffs.Pi;
  check("riccati residual <= 1e-9", riccati_residual.norm() <= 1e-9, riccati_residual.norm());
  check("closed loop stable", coeffs.spectrum.spectralAbscissa() < 0,
        coeffs.spectrum.spectralAbscissa());

  double worst_sym = 0.0, worst_lyap = 0.0;
  for (int k = 3; k <= p; ++k) {
    const hjb::SymTensor& T = coeffs.tensor(k);
    worst_sym = std::max(worst_sym, T.symmetric() ? 0.0 : 1.0);
    const hjb::SymTensor R = hjb::assembleR(k, coeffs.Pi, coeffs.tensors, sys.N, sys.B);
    worst_lyap = std::max(
        worst_lyap, hjb::lyapunovResidual(T, R, coeffs.closed_loop, coeffs.alpha, 20, seed));
  }
  check("tensor symmetry exact", worst_sym == 0.0, worst_sym);
  check("lyapunov defect <= 1e-8", worst_lyap <= 1e-8, worst_lyap);

  if (p >= 3) {
    const hjb::SymTensor R3 = hjb::assembleR(3, coeffs.Pi, coeffs.tensors, sys.N, sys.B);
    const hjb::SymTensor spectral3 = hjb::solveGeneralizedLyapunov(coeffs.spectrum, R3, sys.alpha);
    const hjb::SymTensor quad3 = hjb::quadratureOracle(coeffs.spectrum, R3, sys.alpha);
    double solver_gap = (spectral3.entries() - quad3.entries()).norm() /
                        std::max(1e-300, spectral3.entries().norm());
    if (static_cast<double>(std::pow(sys.n, 3)) <= 4096.0) {
      const hjb::SymTensor kron3 = hjb::kroneckerOracle(coeffs.closed_loop, R3, sys.alpha);
      solver_gap = std::max(solver_gap, (spectral3.entries() - kron3.entries()).norm() /
                                            std::max(1e-300, spectral3.entries().norm()));
    }
    check("three-solver agreement <= 1e-7", solver_gap <= 1e-7, solver_gap);
  }

  // Sample-wise relative l2 error: r_p has interior zeros, so pointwise
  // ratios are ill-posed; an absolute floor covers the identically-zero
  // LQR remainder.
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  hjb::Vector rv(100), hv(100);
  for (int trial = 0; trial < 100; ++trial) {
    hjb::Vector y(sys.n);
    for (int i = 0; i < sys.n; ++i) y[i] = gauss(rng);
    y *= 0.1 / y.norm();
    rv[trial] = hjb::residualRp(coeffs, sys, y);
    hv[trial] = hjb::hjbResidual(coeffs, sys, y);
  }
  const double hjb_rel = (rv - hv).norm() / std::max(1e-300, rv.norm());
  const double hjb_abs = (rv - hv).lpNorm<Eigen::Infinity>();
  const bool hjb_ok = hjb_rel <= 1e-10 || hjb_abs <= 1e-14;
  check("hjb residual identity <= 1e-10", hjb_ok, hjb_rel <= 1e-10 ? hjb_rel : hjb_abs);

  if (cfg.is_fokker_planck) {
    // Mass conservation: columns of the full generator sum to zero.
    const double col_a = cfg.discretization.full.A.colwise().sum().cwiseAbs().maxCoeff();
    const double col_n = cfg.discretization.full.N.colwise().sum().cwiseAbs().maxCoeff();
    check("fp generator conserves mass <= 1e-12", std::max(col_a, col_n) <= 1e-12,
          std::max(col_a, col_n));
    const hjb::Vector steady = cfg.discretization.full.A * cfg.discretization.full.rho_inf;
    check("fp steady state residual <= 1e-10", steady.norm() <= 1e-10, steady.norm());
  }

  std::cout << (failures == 0 ? "all checks passed" : "checks FAILED") << "\n";
  return failures == 0 ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polynomial feedback for bilinear control systems"};
  app.require_subcommand(1);

  std::string config_path, out_path = "out.csv", cache_dir = "cache", y0_spec = "bump:0.05";
  std::string p_list = "3", scales_csv = "0.1,0.05,0.025,0.0125";
  int jobs = 1, directions = 2;
  unsigned seed = 20240901u;

  auto addCommon = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config path")->required();
    sub->add_option("--cache", cache_dir, "expansion cache directory");
    sub->add_option("--seed", seed, "RNG seed");
  };

  CLI::App* expand = app.add_subcommand("expand", "build or load the expansion coefficients");
  addCommon(expand);
  expand->add_option("--p", p_list, "expansion degree");

  CLI::App* simulate = app.add_subcommand("simulate", "closed-loop simulation and cost report");
  addCommon(simulate);
  simulate->add_option("--p", p_list, "expansion degree");
  simulate->add_option("--y0", y0_spec, "initial state '<direction>:<scale>'");
  simulate->add_option("--out", out_path, "trajectory CSV path");

  CLI::App* study = app.add_subcommand("study", "convergence study against the oracle");
  addCommon(study);
  study->add_option("--p", p_list, "comma-separated degrees");
  study->add_option("--scales", scales_csv, "comma-separated geometric scales");
  study->add_option("--directions", directions, "number of study directions");
  study->add_option("--out", out_path, "records CSV path");
  study->add_option("--jobs", jobs, "worker threads");

  CLI::App* checkc = app.add_subcommand("check", "run the invariant suite");
  addCommon(checkc);
  checkc->add_option("--p", p_list, "expansion degree");

  CLI11_PARSE(app, argc, argv);

  try {
    const std::vector<int> ps = parsePList(p_list);
    if (expand->parsed()) return cmdExpand(config_path, ps.front(), cache_dir);
    if (simulate->parsed())
      return cmdSimulate(config_path, ps.front(), y0_spec, out_path, cache_dir, seed);
    if (study->parsed())
      return cmdStudy(config_path, ps, parseScales(scales_csv), directions, out_path, jobs,
                      seed);
    if (checkc->parsed()) return cmdCheck(config_path, ps.front(), cache_dir, seed);
  } catch (const hjb::IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return kExitIntegrity;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hjb::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
