#pragma once

// Command-line driver: verify, equilibrium, simulate.
// Exit codes: 0 pass, 1 verification failure, 2 usage/load error,
// 3 runtime divergence (escape guard, divergence bound, step budget).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "metriplectic/dissipation.hpp"
#include "metriplectic/dynamics.hpp"
#include "metriplectic/integrate.hpp"
#include "metriplectic/stability.hpp"
#include "metriplectic/systems.hpp"

namespace metriplectic::cli {

enum ExitCode : int { kPass = 0, kFail = 1, kUsage = 2, kDiverged = 3 };

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline Vec parse_vector(const std::string& text, const char* what) {
  Vec out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw UsageError(std::string("malformed ") + what + ": '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what);
  return out;
}

struct SystemSource {
  std::string builtin;
  std::string config;
  std::vector<std::string> params;
};

struct Shared {
  SystemSource source;
  std::uint64_t seed = 42;
  std::optional<double> tol;
  std::string out_dir = ".";
};

struct ResolvedSystem {
  SystemDefinition system;
  std::map<std::string, double> overrides;
  std::optional<RigidBodyParams> rigid_body;
  VerificationSettings settings;
};

inline std::map<std::string, double> parse_overrides(const std::vector<std::string>& params) {
  std::map<std::string, double> out;
  for (const auto& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw UsageError("--param expects key=value, got '" + p + "'");
    const Vec v = parse_vector(p.substr(eq + 1), "parameter value");
    if (v.size() != 1) throw UsageError("--param expects a single number: '" + p + "'");
    out[p.substr(0, eq)] = v[0];
  }
  return out;
}

/// Throws SystemLoadError for document problems and UsageError otherwise.
inline ResolvedSystem resolve_system(const SystemSource& src) {
  if (src.builtin.empty() == src.config.empty()) throw UsageError("exactly one of --system or --config is required");
  ResolvedSystem r;
  r.overrides = parse_overrides(src.params);
  if (!src.builtin.empty()) {
    try {
      r.system = builtin_system(src.builtin, r.overrides);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (src.builtin == "rigid-body") {
      RigidBodyParams p;
      for (const auto& [k, v] : r.overrides) {
        if (k == "I1") p.I1 = v;
        if (k == "I2") p.I2 = v;
        if (k == "I3") p.I3 = v;
        if (k == "M0") p.M0 = v;
      }
      r.rigid_body = p;
    }
    return r;
  }
  if (!r.overrides.empty()) throw UsageError("--param applies to built-in systems only");
  std::ifstream in(src.config);
  if (!in) throw UsageError("cannot open config '" + src.config + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SystemLoadError(SystemLoadError::Kind::Schema, std::string("invalid JSON: ") + e.what());
  }
  r.settings = read_verification_settings(doc);
  r.system = load_system(doc);
  return r;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json manifest(const std::string& command, const Shared& shared, const nlohmann::json& extra) {
  nlohmann::json m;
  m["command"] = command;
  m["system"] = shared.source.builtin.empty() ? nlohmann::json{{"config", shared.source.config}}
                                              : nlohmann::json{{"builtin", shared.source.builtin}};
  m["parameters"] = nlohmann::json::object();
  for (const auto& [k, v] : parse_overrides(shared.source.params)) m["parameters"][k] = v;
  m["seed"] = shared.seed;
  m["out_dir"] = shared.out_dir;
  m.update(extra);
  return m;
}

inline nlohmann::json to_json(const DependenceReport& d) {
  nlohmann::json j{{"dependent", d.dependent},
                   {"degenerate", d.degenerate},
                   {"gram_defect", d.gram_defect},
                   {"normalized_defect", d.normalized_defect}};
  j["lambda"] = d.lambda ? nlohmann::json(*d.lambda) : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::optional<std::size_t> samples;
  std::string box;
};

inline int run_verify(const Shared& shared, const VerifyArgs& args, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dir(shared.out_dir);
  std::filesystem::create_directories(dir);
  nlohmann::json report;
  report["command"] = "verify";

  ResolvedSystem resolved;
  try {
    resolved = resolve_system(shared.source);
  } catch (const SystemLoadError& e) {
    if (e.kind() != SystemLoadError::Kind::Casimir) {
      err << "error: " << e.what() << '\n';
      return kUsage;
    }
    report["pass"] = false;
    report["failed_condition"] = "M1";
    report["m1_max"] = e.residual();
    report["m1_worst_point"] = e.worst_point();
    report["message"] = e.what();
    write_json(dir / "verify_report.json", report);
    write_json(dir / "manifest.json", manifest("verify", shared, {{"report", (dir / "verify_report.json").string()}}));
    out << "FAIL (M1): " << e.what() << '\n';
    return kFail;
  }

  VerificationSettings s = resolved.settings;
  s.seed = shared.seed;
  if (shared.tol) s.tolerance = *shared.tol;
  if (args.samples) s.samples = *args.samples;
  if (!args.box.empty()) {
    const Vec b = parse_vector(args.box, "--box");
    if (b.size() != 2 || !(b[1] > b[0])) throw UsageError("--box expects lo,hi with lo < hi");
    s.lo = b[0];
    s.hi = b[1];
  }
  if (s.samples == 0 || !(s.tolerance > 0.0)) throw UsageError("samples and tolerance must be positive");

  const auto points = sample_points(resolved.system.dimension(), s.samples, s.lo, s.hi, s.seed);
  const ConditionReport c = verify_metriplectic_conditions(resolved.system, points, s.tolerance);

  report["system"] = resolved.system.name();
  report["m1_max"] = c.m1_max;
  report["m2_max"] = c.m2_max;
  report["m3_max_positive"] = c.m3_max_positive;
  report["tolerance"] = s.tolerance;
  report["box"] = {s.lo, s.hi};
  report["samples"] = s.samples;
  report["seed"] = s.seed;
  report["pass"] = c.pass;
  if (c.m1_max > s.tolerance) {
    report["failed_condition"] = "M1";
    report["m1_worst_point"] = c.m1_worst_point;
  } else if (c.m2_max > s.tolerance) {
    report["failed_condition"] = "M2";
  } else if (c.m3_max_positive > s.tolerance) {
    report["failed_condition"] = "M3";
  }
  write_json(dir / "verify_report.json", report);
  write_json(dir / "manifest.json",
             manifest("verify", shared,
                      {{"tolerance", s.tolerance},
                       {"samples", s.samples},
                       {"box", {s.lo, s.hi}},
                       {"report", (dir / "verify_report.json").string()}}));
  out << (c.pass ? "PASS" : "FAIL") << " m1=" << c.m1_max << " m2=" << c.m2_max << " m3+=" << c.m3_max_positive
      << " tol=" << s.tolerance << '\n';
  return c.pass ? kPass : kFail;
}

// ----------------------------------------------------------- equilibrium

struct EquilibriumArgs {
  std::string point;
  double pd_tol = kDefaultPdTol;
};

inline int run_equilibrium(const Shared& shared, const EquilibriumArgs& args, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dir(shared.out_dir);
  std::filesystem::create_directories(dir);
  ResolvedSystem resolved;
  try {
    resolved = resolve_system(shared.source);
  } catch (const SystemLoadError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  const SystemDefinition& sys = resolved.system;
  const Vec x = parse_vector(args.point, "--point");
  if (x.size() != sys.dimension()) {
    err << "error: --point has " << x.size() << " components, system has dimension " << sys.dimension() << '\n';
    return kUsage;
  }
  const double tol = shared.tol.value_or(kDefaultEquilibriumTol);
  const EquilibriumReport eq = classify_equilibrium(sys, x, tol);
  const LyapunovReport ly = lyapunov_report(sys, x, args.pd_tol);

  nlohmann::json hess = nlohmann::json::array();
  for (std::size_t i = 0; i < ly.hessian.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < ly.hessian.cols(); ++j) row.push_back(ly.hessian(i, j));
    hess.push_back(row);
  }
  nlohmann::json report{
      {"command", "equilibrium"},
      {"system", sys.name()},
      {"point", x},
      {"equilibrium",
       {{"is_xi_pi_equilibrium", eq.is_xi_pi_equilibrium},
        {"is_xi_equilibrium", eq.is_xi_equilibrium},
        {"xi_pi_norm", eq.conservative_norm},
        {"xi_norm", eq.metriplectic_norm},
        {"threshold", eq.threshold},
        {"dependence", to_json(eq.dependence)}}},
      {"lyapunov",
       {{"grad_norm", ly.grad_norm},
        {"hessian", hess},
        {"eigenvalues", ly.eigenvalues},
        {"positive_definite", ly.positive_definite},
        {"lyapunov_offset", ly.lyapunov_offset},
        {"pd_tol", args.pd_tol},
        {"warning", ly.warning}}},
  };
  write_json(dir / "equilibrium_report.json", report);
  write_json(dir / "manifest.json",
             manifest("equilibrium", shared,
                      {{"point", x},
                       {"tolerance", tol},
                       {"pd_tol", args.pd_tol},
                       {"report", (dir / "equilibrium_report.json").string()}}));
  out << report.dump(2) << '\n';
  return kPass;
}

// -------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string field = "metriplectic";
  std::string x0;
  double t0 = 0.0;
  double t1 = 10.0;
  double h = 1e-3;
  bool adaptive = false;
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  std::size_t max_steps = 100'000'000;
  std::size_t stride = 1;
  double divergence_bound = 1e6;
  std::optional<double> escape_radius;
  bool analyze = false;
  std::string equilibrium;
  double tail_fraction = 0.1;
  double defect_tol = 1e-6;
};

inline void write_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write " + path.string());
  std::string line = "t";
  for (std::size_t i = 0; i < traj.dimension(); ++i) line += ",x" + std::to_string(i + 1);
  line += ",H,phiC,entropy_production,dependence_defect\n";
  std::fputs(line.c_str(), f);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    std::fprintf(f, "%.17g", traj.time(k));
    for (double v : traj.state(k)) std::fprintf(f, ",%.17g", v);
    const auto& d = traj.diagnostics(k);
    std::fprintf(f, ",%.17g,%.17g,%.17g,%.17g\n", d.hamiltonian, d.phi_of_c, d.entropy_production_rate,
                 d.dependence_defect);
  }
  std::fclose(f);
}

inline int run_simulate(const Shared& shared, const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dir(shared.out_dir);
  std::filesystem::create_directories(dir);
  ResolvedSystem resolved;
  try {
    resolved = resolve_system(shared.source);
  } catch (const SystemLoadError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  const SystemDefinition& sys = resolved.system;
  const Vec x0 = parse_vector(args.x0, "--x0");
  if (x0.size() != sys.dimension()) {
    err << "error: --x0 has " << x0.size() << " components, system has dimension " << sys.dimension() << '\n';
    return kUsage;
  }
  FieldKind kind;
  if (args.field == "metriplectic") {
    kind = FieldKind::Metriplectic;
  } else if (args.field == "conservative") {
    kind = FieldKind::Conservative;
  } else {
    throw UsageError("--field must be conservative or metriplectic");
  }

  std::optional<Vec> x_e;
  if (!args.equilibrium.empty()) {
    x_e = parse_vector(args.equilibrium, "--equilibrium");
  } else if (resolved.rigid_body) {
    x_e = Vec{resolved.rigid_body->M0, 0.0, 0.0};
  }
  if (x_e && x_e->size() != sys.dimension()) {
    err << "error: --equilibrium has wrong dimension\n";
    return kUsage;
  }
  if (args.analyze && !x_e) throw UsageError("--analyze needs --equilibrium for this system");

  StepControl control;
  control.mode = args.adaptive ? StepMode::Adaptive : StepMode::Fixed;
  control.h = args.h;
  control.abs_tol = args.abs_tol;
  control.rel_tol = args.rel_tol;
  control.max_steps = args.max_steps;
  Monitors monitors;
  monitors.diagnostics = make_diagnostics(sys);
  monitors.divergence_bound = args.divergence_bound;
  if (args.escape_radius) {
    if (!x_e) throw UsageError("--escape-radius needs --equilibrium for this system");
    monitors.escape = EscapeGuard{*x_e, *args.escape_radius};
  }

  IntegrationResult run;
  try {
    run = integrate(make_field(sys, kind), x0, args.t0, args.t1, control, monitors, args.stride);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const EvaluationError& e) {
    err << "error: " << e.what() << '\n';
    return kDiverged;
  }

  const auto csv_path = dir / "trajectory.csv";
  write_csv(csv_path, run.trajectory);

  const auto& traj = run.trajectory;
  const auto final_state = traj.state(traj.size() - 1);
  nlohmann::json summary{
      {"command", "simulate"},
      {"system", sys.name()},
      {"field", args.field},
      {"status", to_string(run.status)},
      {"message", run.message},
      {"samples", traj.size()},
      {"accepted_steps", run.summary.accepted_steps},
      {"rejected_steps", run.summary.rejected_steps},
      {"t_final", traj.time(traj.size() - 1)},
      {"x_final", Vec(final_state.begin(), final_state.end())},
      {"hamiltonian_drift", run.summary.max_hamiltonian_drift},
      {"phi_monotonicity_violations", run.summary.entropy_increases},
      {"phi_worst_increase", run.summary.worst_entropy_increase},
      {"final_dependence_defect", traj.diagnostics(traj.size() - 1).dependence_defect},
  };
  if (args.analyze) {
    const LaSalleReport l = lasalle_diagnostics(traj, sys, *x_e, args.tail_fraction, args.defect_tol);
    summary["lasalle"] = {{"equilibrium", *x_e},
                          {"monotone_violations", l.monotone_violations},
                          {"worst_increase", l.worst_increase},
                          {"tail_fraction", args.tail_fraction},
                          {"tail_samples", l.tail_states.size()},
                          {"tail_max_defect", l.tail_max_defect},
                          {"tail_spread", l.tail_spread},
                          {"defect_tol", args.defect_tol},
                          {"converged_to_E", l.converged_to_E}};
  }
  write_json(dir / "simulate_summary.json", summary);
  write_json(dir / "manifest.json",
             manifest("simulate", shared,
                      {{"field", args.field},
                       {"x0", x0},
                       {"t_span", {args.t0, args.t1}},
                       {"step_control",
                        {{"mode", args.adaptive ? "adaptive" : "fixed"},
                         {"h", args.h},
                         {"abs_tol", args.abs_tol},
                         {"rel_tol", args.rel_tol},
                         {"max_steps", args.max_steps}}},
                       {"stride", args.stride},
                       {"trajectory", csv_path.string()},
                       {"summary", (dir / "simulate_summary.json").string()}}));
  out << summary.dump(2) << '\n';
  return run.status == IntegrationStatus::Completed ? kPass : kDiverged;
}

// ------------------------------------------------------------------ main

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Metriplectic dynamics toolkit: verify conditions, classify equilibria, simulate"};
  app.require_subcommand(1);

  Shared shared;
  auto add_shared = [&shared](CLI::App* sub) {
    sub->add_option("--system", shared.source.builtin, "Built-in system (rigid-body)");
    sub->add_option("--config", shared.source.config, "System document (JSON)");
    sub->add_option("--param", shared.source.params, "Built-in parameter override key=value (I1, I2, I3, M0)");
    sub->add_option("--seed", shared.seed, "Seed for random sampling");
    sub->add_option("--tol", shared.tol, "Tolerance");
    sub->add_option("--out-dir", shared.out_dir, "Directory for reports and trajectories");
  };

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Check the metriplectic conditions at sampled points");
  add_shared(verify_cmd);
  verify_cmd->add_option("--samples", verify.samples, "Number of sample points");
  verify_cmd->add_option("--box", verify.box, "Sampling box lo,hi (use --box=-2,2)");

  EquilibriumArgs equilibrium;
  auto* eq_cmd = app.add_subcommand("equilibrium", "Classify a point and run the energy-Casimir test");
  add_shared(eq_cmd);
  eq_cmd->add_option("--point", equilibrium.point, "Point, comma separated")->required();
  eq_cmd->add_option("--pd-tol", equilibrium.pd_tol, "Positive-definiteness tolerance");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Integrate the conservative or metriplectic field");
  sim_cmd->set_help_flag("--help", "Print this help message and exit");
  add_shared(sim_cmd);
  sim_cmd->add_option("--field", sim.field, "conservative | metriplectic");
  sim_cmd->add_option("--x0", sim.x0, "Initial state, comma separated")->required();
  sim_cmd->add_option("--t0", sim.t0);
  sim_cmd->add_option("--t1", sim.t1);
  sim_cmd->add_option("--h", sim.h, "Fixed step, or initial step when adaptive");
  sim_cmd->add_flag("--adaptive", sim.adaptive, "Step-doubling error control");
  sim_cmd->add_option("--abs-tol", sim.abs_tol);
  sim_cmd->add_option("--rel-tol", sim.rel_tol);
  sim_cmd->add_option("--max-steps", sim.max_steps);
  sim_cmd->add_option("--stride", sim.stride, "Store every n-th step");
  sim_cmd->add_option("--divergence-bound", sim.divergence_bound);
  sim_cmd->add_option("--escape-radius", sim.escape_radius, "Abort when |x - x_e| exceeds this");
  sim_cmd->add_flag("--analyze", sim.analyze, "Run LaSalle diagnostics on the trajectory");
  sim_cmd->add_option("--equilibrium", sim.equilibrium, "Equilibrium x_e for --analyze / --escape-radius");
  sim_cmd->add_option("--tail-fraction", sim.tail_fraction);
  sim_cmd->add_option("--defect-tol", sim.defect_tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (*verify_cmd) return run_verify(shared, verify, out, err);
    if (*eq_cmd) return run_equilibrium(shared, equilibrium, out, err);
    return run_simulate(shared, sim, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace metriplectic::cli
