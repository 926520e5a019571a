#pragma once

// The conservative field Pi grad H, the metriplectic field
// Pi grad H + G grad(phi o C), linear dependence of the two gradients, and
// equilibrium classification.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "metriplectic/dissipation.hpp"
#include "metriplectic/geometry.hpp"
#include "metriplectic/integrate.hpp"
#include "metriplectic/linalg.hpp"

namespace metriplectic {

inline constexpr double kDefaultDependenceTol = 1e-10;
inline constexpr double kDefaultEquilibriumTol = 1e-9;

namespace detail {
inline void require_dimension(const SystemDefinition& sys, std::span<const double> x) {
  if (x.size() != sys.dimension()) {
    throw std::invalid_argument("state has " + std::to_string(x.size()) + " components, system '" + sys.name() +
                                "' has dimension " + std::to_string(sys.dimension()));
  }
}
}  // namespace detail

inline Vec conservative_field(const SystemDefinition& sys, std::span<const double> x) {
  detail::require_dimension(sys, x);
  return sys.poisson().matrix(x) * sys.hamiltonian().gradient(x);
}

inline Vec metriplectic_field(const SystemDefinition& sys, std::span<const double> x) {
  detail::require_dimension(sys, x);
  const Vec gh = sys.hamiltonian().gradient(x);
  Vec xi = sys.poisson().matrix(x) * gh;
  if (sys.casimir_count() == 0) return xi;
  const Vec dissipative = apply_dissipation(gh, sys.entropy().gradient(x));
  for (std::size_t i = 0; i < xi.size(); ++i) xi[i] += dissipative[i];
  return xi;
}

struct DependenceReport {
  bool dependent = false;
  bool degenerate = false;        ///< one of the vectors is numerically zero
  std::optional<double> lambda;   ///< u = lambda v, when dependent and v != 0
  double gram_defect = 0.0;       ///< |u|^2 |v|^2 - (u.v)^2
  double normalized_defect = 0.0; ///< gram_defect / (|u|^2 |v|^2), in [0, 1]
};

inline DependenceReport linear_dependence(std::span<const double> u, std::span<const double> v,
                                          double tol = kDefaultDependenceTol) {
  require_same_size(u, v, "linear_dependence");
  if (!(tol > 0.0)) throw std::invalid_argument("linear_dependence: tolerance must be positive");
  const double uu = norm_sq(u);
  const double vv = norm_sq(v);
  const double uv = dot(u, v);
  DependenceReport r;
  if (uu > 0.0 && vv > 0.0) {
    // Lagrange identity: the Gram defect is the sum of squared 2x2 minors,
    // which stays accurate for nearly parallel vectors.
    const double su = std::sqrt(uu);
    const double sv = std::sqrt(vv);
    double raw = 0.0;
    double normalized = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      for (std::size_t j = i + 1; j < u.size(); ++j) {
        const double m = u[i] * v[j] - u[j] * v[i];
        const double mn = (u[i] / su) * (v[j] / sv) - (u[j] / su) * (v[i] / sv);
        raw += m * m;
        normalized += mn * mn;
      }
    }
    r.gram_defect = raw;
    r.normalized_defect = std::min(1.0, normalized);
    r.dependent = r.normalized_defect <= tol;
  } else {
    r.degenerate = true;
    r.dependent = true;
  }
  if (r.dependent && vv > 0.0) r.lambda = uv / vv;
  return r;
}

/// Normalized Gram defect of (grad H, grad(phi o C)) at x; zero on the set E.
inline double dependence_defect(const SystemDefinition& sys, std::span<const double> x) {
  detail::require_dimension(sys, x);
  if (sys.casimir_count() == 0) return 0.0;
  return linear_dependence(sys.hamiltonian().gradient(x), sys.entropy().gradient(x)).normalized_defect;
}

struct EquilibriumReport {
  Vec point;
  bool is_xi_pi_equilibrium = false;
  bool is_xi_equilibrium = false;
  DependenceReport dependence;
  double conservative_norm = 0.0;  ///< |Pi grad H|_inf
  double metriplectic_norm = 0.0;  ///< |xi|_inf
  double threshold = 0.0;          ///< tol (1 + |x|_2)
};

/// Both fields tested against tol (1 + |x|). An equilibrium of the
/// metriplectic field is always one of the conservative field as well; a
/// violation of that implication is reported as a logic_error.
inline EquilibriumReport classify_equilibrium(const SystemDefinition& sys, std::span<const double> x,
                                              double tol = kDefaultEquilibriumTol,
                                              double dependence_tol = kDefaultDependenceTol) {
  if (!(tol > 0.0)) throw std::invalid_argument("classify_equilibrium: tolerance must be positive");
  detail::require_dimension(sys, x);
  EquilibriumReport r;
  r.point.assign(x.begin(), x.end());
  r.conservative_norm = norm_inf(conservative_field(sys, x));
  r.metriplectic_norm = norm_inf(metriplectic_field(sys, x));
  r.threshold = tol * (1.0 + norm2(x));
  r.is_xi_pi_equilibrium = r.conservative_norm <= r.threshold;
  r.is_xi_equilibrium = r.metriplectic_norm <= r.threshold;
  if (sys.casimir_count() > 0) {
    r.dependence = linear_dependence(sys.hamiltonian().gradient(x), sys.entropy().gradient(x), dependence_tol);
  } else {
    r.dependence.dependent = true;
    r.dependence.degenerate = true;
  }
  if (r.is_xi_equilibrium && !r.is_xi_pi_equilibrium) {
    // Tolerated within a factor 10 of the threshold (rounding at the edge).
    if (r.conservative_norm > 10.0 * r.threshold) {
      throw std::logic_error("equilibrium of xi that is not an equilibrium of xi_Pi at " + format_point(x));
    }
    r.is_xi_pi_equilibrium = true;
  }
  return r;
}

inline DiagnosticsRecord diagnostics_at(const SystemDefinition& sys, std::span<const double> x) {
  DiagnosticsRecord d;
  const Vec gh = sys.hamiltonian().gradient(x);
  d.hamiltonian = sys.hamiltonian().value(x);
  d.phi_of_c = sys.entropy().value(x);
  if (sys.casimir_count() > 0) {
    const Vec gs = sys.entropy().gradient(x);
    d.entropy_production_rate = entropy_production(gh, gs);
    d.dependence_defect = linear_dependence(gh, gs).normalized_defect;
  }
  return d;
}

enum class FieldKind { Conservative, Metriplectic };

inline VectorField make_field(const SystemDefinition& sys, FieldKind kind) {
  if (kind == FieldKind::Conservative) {
    return [&sys](double, std::span<const double> x) { return conservative_field(sys, x); };
  }
  return [&sys](double, std::span<const double> x) { return metriplectic_field(sys, x); };
}

inline DiagnosticsFn make_diagnostics(const SystemDefinition& sys) {
  return [&sys](std::span<const double> x) { return diagnostics_at(sys, x); };
}

}  // namespace metriplectic
