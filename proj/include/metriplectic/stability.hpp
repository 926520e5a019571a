#pragma once

// Energy-Casimir stability checks on H_phi = H + phi(C) and LaSalle-style
// trajectory diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "metriplectic/dynamics.hpp"
#include "metriplectic/geometry.hpp"
#include "metriplectic/integrate.hpp"
#include "metriplectic/linalg.hpp"

namespace metriplectic {

inline constexpr double kDefaultPdTol = 1e-8;

/// H + phi(C_1, ..., C_k), gradient by the chain rule.
inline ScalarField augmented_energy(const SystemDefinition& sys) {
  const ScalarField& h = sys.hamiltonian();
  const ScalarField& s = sys.entropy();
  std::vector<Expression> grad(sys.dimension());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i] = h.gradient_expressions()[i] + s.gradient_expressions()[i];
  }
  return ScalarField(h.expression() + s.expression(), std::move(grad));
}

inline double default_hessian_step(std::span<const double> x) { return 1e-4 * (1.0 + norm_inf(x)); }

/// Central differences of the symbolic gradient, then (M + M^T) / 2.
inline Matrix hessian(const ScalarField& field, std::span<const double> x, std::optional<double> step = {}) {
  const std::size_t n = field.arity();
  if (x.size() != n) throw std::invalid_argument("hessian: point has wrong dimension");
  const double h = step.value_or(default_hessian_step(x));
  if (!(h > 0.0)) throw std::invalid_argument("hessian: step must be positive");
  Matrix m(n, n);
  Vec probe(x.begin(), x.end());
  for (std::size_t i = 0; i < n; ++i) {
    probe[i] = x[i] + h;
    const Vec plus = field.gradient(probe);
    probe[i] = x[i] - h;
    const Vec minus = field.gradient(probe);
    probe[i] = x[i];
    for (std::size_t j = 0; j < n; ++j) m(i, j) = (plus[j] - minus[j]) / (2.0 * h);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = avg;
      m(j, i) = avg;
    }
  }
  return m;
}

struct LyapunovReport {
  Vec equilibrium;
  double grad_norm = 0.0;  ///< |grad H_phi(x_e)|_inf
  Matrix hessian;
  Vec eigenvalues;  ///< ascending
  bool positive_definite = false;
  double lyapunov_offset = 0.0;  ///< H_phi(x_e); L = H_phi - offset
  bool conservative_equilibrium = true;
  std::string warning;
};

inline LyapunovReport lyapunov_report(const SystemDefinition& sys, std::span<const double> x_e,
                                      double pd_tol = kDefaultPdTol, std::optional<double> step = {}) {
  detail::require_dimension(sys, x_e);
  const ScalarField energy = augmented_energy(sys);
  LyapunovReport r;
  r.equilibrium.assign(x_e.begin(), x_e.end());
  r.grad_norm = norm_inf(energy.gradient(x_e));
  r.hessian = hessian(energy, x_e, step);
  r.eigenvalues = symmetric_eigenvalues(r.hessian);
  r.positive_definite = !r.eigenvalues.empty() && r.eigenvalues.front() > pd_tol;
  r.lyapunov_offset = energy.value(x_e);
  const EquilibriumReport eq = classify_equilibrium(sys, x_e);
  r.conservative_equilibrium = eq.is_xi_pi_equilibrium;
  if (!r.conservative_equilibrium) {
    r.warning = "point is not an equilibrium of the conservative field";
  }
  return r;
}

struct LaSalleReport {
  std::size_t monotone_violations = 0;
  double worst_increase = 0.0;  ///< largest per-sample increase of L
  std::vector<Vec> tail_states;
  double tail_max_defect = 0.0;
  double tail_spread = 0.0;  ///< max |x - x_final|_inf over the tail
  bool converged_to_E = false;
};

/// Scans L(t) = H_phi(x(t)) - H_phi(x_e) for increases above
/// slack (1 + |L|) and measures the dependence defect over the final
/// `tail_fraction` of the samples.
inline LaSalleReport lasalle_diagnostics(const Trajectory& traj, const SystemDefinition& sys,
                                         std::span<const double> x_e, double tail_fraction,
                                         double defect_tol, double slack = 1e-10) {
  if (traj.empty()) throw std::invalid_argument("lasalle_diagnostics: empty trajectory");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
    throw std::invalid_argument("lasalle_diagnostics: tail_fraction must be in (0, 1]");
  }
  if (traj.dimension() != sys.dimension()) {
    throw std::invalid_argument("lasalle_diagnostics: trajectory and system dimensions differ");
  }
  detail::require_dimension(sys, x_e);

  const ScalarField energy = augmented_energy(sys);
  const double offset = energy.value(x_e);
  LaSalleReport r;
  double prev = energy.value(traj.state(0)) - offset;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double cur = energy.value(traj.state(i)) - offset;
    const double inc = cur - prev;
    r.worst_increase = std::max(r.worst_increase, inc);
    if (inc > slack * (1.0 + std::fabs(prev))) ++r.monotone_violations;
    prev = cur;
  }

  const auto count = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(traj.size())));
  const std::size_t tail = std::clamp<std::size_t>(count, 1, traj.size());
  const auto last = traj.state(traj.size() - 1);
  for (std::size_t i = traj.size() - tail; i < traj.size(); ++i) {
    const auto x = traj.state(i);
    r.tail_states.emplace_back(x.begin(), x.end());
    r.tail_max_defect = std::max(r.tail_max_defect, dependence_defect(sys, x));
    for (std::size_t j = 0; j < x.size(); ++j) r.tail_spread = std::max(r.tail_spread, std::fabs(x[j] - last[j]));
  }
  r.converged_to_E = r.tail_max_defect <= defect_tol;
  return r;
}

}  // namespace metriplectic
