#pragma once

// The dissipation matrix G built from grad H:
//   G[i][j] = dH_i dH_j (i != j),  G[j][j] = -sum_{i != j} dH_i^2,
// held in the equivalent closed form G = grad H grad H^T - |grad H|^2 I.

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include "metriplectic/geometry.hpp"
#include "metriplectic/linalg.hpp"

namespace metriplectic {

struct DissipationMatrix {
  Matrix matrix;
  Vec source_gradient;
};

inline DissipationMatrix build_dissipation_matrix(std::span<const double> grad_h) {
  if (!all_finite(grad_h)) throw std::invalid_argument("build_dissipation_matrix: non-finite gradient");
  const std::size_t n = grad_h.size();
  const double sq = norm_sq(grad_h);
  DissipationMatrix g{Matrix(n, n), Vec(grad_h.begin(), grad_h.end())};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g.matrix(i, j) = grad_h[i] * grad_h[j];
    g.matrix(i, i) -= sq;
  }
  return g;
}

/// G v = (grad H . v) grad H - |grad H|^2 v, without forming G.
inline Vec apply_dissipation(std::span<const double> grad_h, std::span<const double> v) {
  require_same_size(grad_h, v, "apply_dissipation");
  const double proj = dot(grad_h, v);
  const double sq = norm_sq(grad_h);
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = proj * grad_h[i] - sq * v[i];
  return out;
}

/// grad S^T G grad S as the negated sum of squared 2x2 minors
///   -sum_{i<j} (dS_i dH_j - dS_j dH_i)^2,
/// which is never positive and vanishes iff grad S and grad H are dependent.
inline double entropy_production(std::span<const double> grad_h, std::span<const double> grad_s) {
  require_same_size(grad_h, grad_s, "entropy_production");
  double sum = 0.0;
  for (std::size_t i = 0; i < grad_h.size(); ++i) {
    for (std::size_t j = i + 1; j < grad_h.size(); ++j) {
      const double minor = grad_s[i] * grad_h[j] - grad_s[j] * grad_h[i];
      sum += minor * minor;
    }
  }
  return -sum;
}

struct ConditionReport {
  double m1_max = 0.0;           ///< max |Pi grad C_i|_inf over Casimirs and points
  double m2_max = 0.0;           ///< max |G grad H|_inf
  double m3_max_positive = 0.0;  ///< max(0, grad(phi o C)^T G grad(phi o C))
  Vec m1_worst_point;
  std::size_t m1_worst_casimir = 0;
  bool pass = true;
};

inline ConditionReport verify_metriplectic_conditions(const SystemDefinition& sys, std::span<const Vec> points,
                                                      double tol) {
  if (points.empty()) throw std::invalid_argument("verify_metriplectic_conditions: no sample points");
  ConditionReport report;
  for (const auto& x : points) {
    try {
      const Matrix pi = sys.poisson().matrix(x);
      for (std::size_t i = 0; i < sys.casimir_count(); ++i) {
        const double r = norm_inf(pi * sys.casimirs()[i].gradient(x));
        if (report.m1_worst_point.empty() || r > report.m1_max) {
          report.m1_max = r;
          report.m1_worst_point = x;
          report.m1_worst_casimir = i;
        }
      }
      const Vec gh = sys.hamiltonian().gradient(x);
      report.m2_max = std::max(report.m2_max, norm_inf(apply_dissipation(gh, gh)));
      if (sys.casimir_count() > 0) {
        const Vec gs = sys.entropy().gradient(x);
        report.m3_max_positive = std::max(report.m3_max_positive, dot(gs, apply_dissipation(gh, gs)));
      }
    } catch (const EvaluationError& e) {
      throw EvaluationError(std::string(e.what()) + " at x = " + format_point(x));
    }
  }
  report.pass = report.m1_max <= tol && report.m2_max <= tol && report.m3_max_positive <= tol;
  return report;
}

}  // namespace metriplectic
