#pragma once

// Built-in free rigid body and loading of user-defined systems from JSON
// documents.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "metriplectic/dissipation.hpp"
#include "metriplectic/expr.hpp"
#include "metriplectic/geometry.hpp"

namespace metriplectic {

/// Principal moments of inertia I1 > I2 > I3 > 0 and the equilibrium
/// momentum M0 of the state (M0, 0, 0).
struct RigidBodyParams {
  double I1 = 3.0;
  double I2 = 2.0;
  double I3 = 1.0;
  double M0 = 1.0;

  double a1() const { return 1.0 / I3 - 1.0 / I2; }
  double a2() const { return 1.0 / I1 - 1.0 / I3; }
  double a3() const { return 1.0 / I2 - 1.0 / I1; }

  /// Constant in the dissipative factor |x|^2 - c. Derived from phi'(s)
  /// = 2s - M0^2 - 1/I1, which gives M0^2 + 1/I1.
  double c_phi() const { return M0 * M0 + 1.0 / I1; }

  void validate() const {
    if (!(I1 > I2 && I2 > I3 && I3 > 0.0)) {
      throw std::invalid_argument("rigid body requires I1 > I2 > I3 > 0");
    }
    if (!std::isfinite(I1) || !std::isfinite(M0)) throw std::invalid_argument("rigid body parameters must be finite");
  }
};

/// Euler's equations on R^3 with the minus-Lie-Poisson matrix
///   [[0, -x3, x2], [x3, 0, -x1], [-x2, x1, 0]],
/// H = (x1^2/I1 + x2^2/I2 + x3^2/I3) / 2, C = |x|^2 / 2 and
/// phi(s) = (s - M0^2/2)^2 - s/I1.
inline SystemDefinition rigid_body_system(const RigidBodyParams& p) {
  p.validate();
  using E = Expression;
  const E x1 = E::variable(0), x2 = E::variable(1), x3 = E::variable(2);
  const E zero = E::constant(0.0), half = E::constant(0.5), two = E::constant(2.0);
  PoissonStructure poisson(3, {zero, -x3, x2, x3, zero, -x1, -x2, x1, zero});
  const E h = half * (pow(x1, two) / E::constant(p.I1) + pow(x2, two) / E::constant(p.I2) +
                      pow(x3, two) / E::constant(p.I3));
  const E c = half * (pow(x1, two) + pow(x2, two) + pow(x3, two));
  const E s = E::variable(0);
  const E phi = pow(s - E::constant(0.5 * p.M0 * p.M0), two) - s / E::constant(p.I1);
  return SystemDefinition("rigid-body", std::move(poisson), ScalarField(h, 3), {ScalarField(c, 3)}, phi);
}

/// Hand-written right-hand side of the dissipatively perturbed rigid body;
/// an oracle for metriplectic_field that shares no code with it.
inline Vec rigid_body_perturbed_rhs(const RigidBodyParams& p, std::span<const double> x) {
  if (x.size() != 3) throw std::invalid_argument("rigid body state has 3 components");
  const double a1 = p.a1(), a2 = p.a2(), a3 = p.a3();
  const double x1 = x[0], x2 = x[1], x3 = x[2];
  const double s = x1 * x1 + x2 * x2 + x3 * x3 - p.c_phi();
  return {a1 * x2 * x3 + x1 * s * (-a3 / p.I2 * x2 * x2 + a2 / p.I3 * x3 * x3),
          a2 * x1 * x3 + x2 * s * (a3 / p.I1 * x1 * x1 - a1 / p.I3 * x3 * x3),
          a3 * x1 * x2 + x3 * s * (-a2 / p.I1 * x1 * x1 + a1 / p.I2 * x2 * x2)};
}

/// Sampling box, count and tolerance used to certify Casimirs at load time.
struct VerificationSettings {
  double lo = -2.0;
  double hi = 2.0;
  std::size_t samples = 1000;
  double tolerance = 1e-10;
  std::uint64_t seed = 42;
};

class SystemLoadError : public std::runtime_error {
public:
  enum class Kind { Schema, Parse, Casimir };

  SystemLoadError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  SystemLoadError(Kind kind, const std::string& what, Vec worst_point, double residual)
      : std::runtime_error(what), kind_(kind), worst_point_(std::move(worst_point)), residual_(residual) {}

  Kind kind() const noexcept { return kind_; }
  const Vec& worst_point() const noexcept { return worst_point_; }
  double residual() const noexcept { return residual_; }

private:
  Kind kind_;
  Vec worst_point_;
  double residual_ = 0.0;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw SystemLoadError(SystemLoadError::Kind::Schema, std::string("missing field '") + key + "'");
  return doc.at(key);
}

inline std::string require_string(const nlohmann::json& v, const std::string& where) {
  if (!v.is_string()) throw SystemLoadError(SystemLoadError::Kind::Schema, where + " must be a string");
  return v.get<std::string>();
}

inline Expression parse_field(const nlohmann::json& v, const std::string& where, std::size_t arity,
                              const char* prefix) {
  const std::string text = require_string(v, where);
  try {
    return parse(text, arity, prefix);
  } catch (const ParseError& e) {
    throw SystemLoadError(SystemLoadError::Kind::Parse, where + ": " + e.what() + " in \"" + text + "\"");
  }
}

}  // namespace detail

inline VerificationSettings read_verification_settings(const nlohmann::json& doc) {
  VerificationSettings s;
  if (!doc.is_object() || !doc.contains("verification")) return s;
  const auto& v = doc.at("verification");
  if (!v.is_object()) throw SystemLoadError(SystemLoadError::Kind::Schema, "'verification' must be an object");
  try {
    if (v.contains("box")) {
      const auto& box = v.at("box");
      if (!box.is_array() || box.size() != 2) {
        throw SystemLoadError(SystemLoadError::Kind::Schema, "'verification.box' must be [lo, hi]");
      }
      s.lo = box[0].get<double>();
      s.hi = box[1].get<double>();
      if (!(s.hi > s.lo)) throw SystemLoadError(SystemLoadError::Kind::Schema, "'verification.box' needs lo < hi");
    }
    if (v.contains("samples")) s.samples = v.at("samples").get<std::size_t>();
    if (v.contains("tolerance")) s.tolerance = v.at("tolerance").get<double>();
    if (v.contains("seed")) s.seed = v.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SystemLoadError(SystemLoadError::Kind::Schema, std::string("'verification': ") + e.what());
  }
  if (s.samples == 0 || !(s.tolerance > 0.0)) {
    throw SystemLoadError(SystemLoadError::Kind::Schema, "'verification' needs samples > 0 and tolerance > 0");
  }
  return s;
}

/// Builds a system from a document
///   { "name", "dimension", "poisson": [[expr]], "hamiltonian", "casimirs": [expr],
///     "phi", "verification": {"box", "samples", "tolerance", "seed"} }
/// and rejects it unless every Casimir passes the sampled Casimir check.
inline SystemDefinition load_system(const nlohmann::json& doc) {
  using Kind = SystemLoadError::Kind;
  if (!doc.is_object()) throw SystemLoadError(Kind::Schema, "system document must be an object");

  const auto& dim = detail::require_field(doc, "dimension");
  if (!dim.is_number_integer() || dim.get<long long>() <= 0) {
    throw SystemLoadError(Kind::Schema, "'dimension' must be a positive integer");
  }
  const auto n = static_cast<std::size_t>(dim.get<long long>());
  const std::string name = doc.contains("name") ? detail::require_string(doc.at("name"), "'name'") : "unnamed";

  const auto& rows = detail::require_field(doc, "poisson");
  if (!rows.is_array() || rows.size() != n) {
    throw SystemLoadError(Kind::Schema, "'poisson' must have " + std::to_string(n) + " rows");
  }
  std::vector<Expression> entries;
  entries.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].is_array() || rows[i].size() != n) {
      throw SystemLoadError(Kind::Schema, "'poisson' row " + std::to_string(i + 1) + " must have " +
                                              std::to_string(n) + " entries");
    }
    for (std::size_t j = 0; j < n; ++j) {
      entries.push_back(detail::parse_field(rows[i][j], "poisson[" + std::to_string(i + 1) + "][" +
                                                            std::to_string(j + 1) + "]",
                                            n, "x"));
    }
  }
  PoissonStructure poisson(n, std::move(entries));

  ScalarField hamiltonian(detail::parse_field(detail::require_field(doc, "hamiltonian"), "'hamiltonian'", n, "x"), n);

  std::vector<ScalarField> casimirs;
  if (doc.contains("casimirs")) {
    const auto& list = doc.at("casimirs");
    if (!list.is_array()) throw SystemLoadError(Kind::Schema, "'casimirs' must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      casimirs.emplace_back(detail::parse_field(list[i], "casimirs[" + std::to_string(i + 1) + "]", n, "x"), n);
    }
  }
  const std::size_t k = casimirs.size();
  Expression phi = Expression::constant(0.0);
  if (doc.contains("phi")) {
    phi = detail::parse_field(doc.at("phi"), "'phi'", k, "s");
  } else if (k > 0) {
    throw SystemLoadError(Kind::Schema, "missing field 'phi'");
  }

  const VerificationSettings settings = read_verification_settings(doc);
  const auto points = sample_points(n, settings.samples, settings.lo, settings.hi, settings.seed);
  for (std::size_t i = 0; i < k; ++i) {
    CasimirReport report;
    try {
      report = verify_casimir(poisson, casimirs[i], points, settings.tolerance);
    } catch (const std::exception& e) {
      throw SystemLoadError(Kind::Casimir, "casimirs[" + std::to_string(i + 1) + "]: " + e.what());
    }
    if (!report.pass) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6g", report.max_residual);
      throw SystemLoadError(Kind::Casimir,
                            "casimirs[" + std::to_string(i + 1) + "] fails the Casimir condition (M1): residual " +
                                buf + " at x = " + format_point(report.worst_point),
                            report.worst_point, report.max_residual);
    }
  }
  try {
    return SystemDefinition(name, std::move(poisson), std::move(hamiltonian), std::move(casimirs), std::move(phi));
  } catch (const GeometryError& e) {
    throw SystemLoadError(Kind::Schema, e.what());
  }
}

/// Built-in systems by name. Recognized overrides for "rigid-body": I1, I2, I3, M0.
inline SystemDefinition builtin_system(const std::string& name, const std::map<std::string, double>& overrides = {}) {
  if (name == "rigid-body") {
    RigidBodyParams p;
    for (const auto& [key, value] : overrides) {
      if (key == "I1") p.I1 = value;
      else if (key == "I2") p.I2 = value;
      else if (key == "I3") p.I3 = value;
      else if (key == "M0") p.M0 = value;
      else throw std::invalid_argument("unknown rigid-body parameter '" + key + "'");
    }
    return rigid_body_system(p);
  }
  throw std::invalid_argument("unknown built-in system '" + name + "'");
}

}  // namespace metriplectic
