#pragma once

// Classical RK4 time stepping, fixed or with step-doubling error control,
// plus per-step monitors for energy drift and entropy monotonicity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "metriplectic/expr.hpp"
#include "metriplectic/linalg.hpp"

namespace metriplectic {

struct DiagnosticsRecord {
  double hamiltonian = 0.0;
  double phi_of_c = 0.0;
  double entropy_production_rate = 0.0;  ///< d/dt phi(C) = grad(phi o C)^T G grad(phi o C)
  double dependence_defect = 0.0;
};

/// Samples (t, x, diagnostics) with strictly increasing t, stored flat.
class Trajectory {
public:
  Trajectory() = default;
  explicit Trajectory(std::size_t dimension) : n_(dimension) {}

  std::size_t dimension() const noexcept { return n_; }
  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }

  void append(double t, std::span<const double> x, const DiagnosticsRecord& diag = {}) {
    if (x.size() != n_) throw std::invalid_argument("trajectory: state dimension changed");
    if (!times_.empty() && !(t > times_.back())) throw std::invalid_argument("trajectory: time not increasing");
    times_.push_back(t);
    states_.insert(states_.end(), x.begin(), x.end());
    diagnostics_.push_back(diag);
  }

  double time(std::size_t i) const { return times_[i]; }
  std::span<const double> state(std::size_t i) const { return {states_.data() + i * n_, n_}; }
  const DiagnosticsRecord& diagnostics(std::size_t i) const { return diagnostics_[i]; }

private:
  std::size_t n_ = 0;
  std::vector<double> times_;
  std::vector<double> states_;
  std::vector<DiagnosticsRecord> diagnostics_;
};

enum class StepMode { Fixed, Adaptive };

struct StepControl {
  StepMode mode = StepMode::Fixed;
  double h = 1e-3;  ///< fixed step, or initial step in adaptive mode
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  std::size_t max_steps = 100'000'000;

  void validate() const {
    if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw std::invalid_argument("tolerances must be positive");
    if (max_steps == 0) throw std::invalid_argument("max_steps must be positive");
  }
};

using VectorField = std::function<Vec(double t, std::span<const double> x)>;
using DiagnosticsFn = std::function<DiagnosticsRecord(std::span<const double> x)>;

struct EscapeGuard {
  Vec center;
  double radius = 1.0;
};

struct Monitors {
  DiagnosticsFn diagnostics;        ///< optional; without it no drift/entropy bookkeeping
  double entropy_slack = 1e-10;     ///< allowed per-step increase of phi(C)
  double divergence_bound = 1e6;    ///< abort when |x|_inf exceeds this
  std::optional<EscapeGuard> escape;
};

enum class IntegrationStatus { Completed, MaxStepsExceeded, Diverged, Escaped };

inline const char* to_string(IntegrationStatus s) {
  switch (s) {
    case IntegrationStatus::Completed: return "completed";
    case IntegrationStatus::MaxStepsExceeded: return "max_steps_exceeded";
    case IntegrationStatus::Diverged: return "diverged";
    case IntegrationStatus::Escaped: return "escaped";
  }
  return "unknown";
}

struct MonitorSummary {
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  double max_hamiltonian_drift = 0.0;
  std::size_t entropy_increases = 0;
  double worst_entropy_increase = 0.0;
};

struct IntegrationResult {
  Trajectory trajectory;
  IntegrationStatus status = IntegrationStatus::Completed;
  MonitorSummary summary;
  std::string message;
};

/// Field evaluation failure inside a Runge-Kutta stage (1..4).
class StageError : public EvaluationError {
public:
  StageError(const std::string& what, int stage)
      : EvaluationError("RK4 stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
  int stage() const noexcept { return stage_; }

private:
  int stage_;
};

inline Vec rk4_step(const VectorField& field, std::span<const double> x, double t, double h) {
  const std::size_t n = x.size();
  auto stage = [&](int index, double ts, std::span<const double> xs) {
    try {
      Vec k = field(ts, xs);
      if (k.size() != n) throw EvaluationError("field returned wrong dimension");
      return k;
    } catch (const EvaluationError& e) {
      throw StageError(e.what(), index);
    }
  };
  Vec tmp(n);
  const Vec k1 = stage(1, t, x);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  const Vec k2 = stage(2, t + 0.5 * h, tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  const Vec k3 = stage(3, t + 0.5 * h, tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  const Vec k4 = stage(4, t + h, tmp);
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

namespace detail {

/// Number of fixed steps covering [t0, t1]; tolerant of h not dividing the span.
inline std::size_t fixed_step_count(double t0, double t1, double h) {
  const double r = (t1 - t0) / h;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(r - 1e-9 * std::max(1.0, r))));
}

class MonitorState {
public:
  MonitorState(const Monitors& monitors, MonitorSummary& summary) : monitors_(monitors), summary_(summary) {}

  DiagnosticsRecord observe(std::span<const double> x) {
    if (!monitors_.diagnostics) return {};
    const DiagnosticsRecord d = monitors_.diagnostics(x);
    if (!started_) {
      h0_ = d.hamiltonian;
      started_ = true;
    } else {
      summary_.max_hamiltonian_drift = std::max(summary_.max_hamiltonian_drift, std::fabs(d.hamiltonian - h0_));
      const double increase = d.phi_of_c - last_phi_;
      if (increase > monitors_.entropy_slack) ++summary_.entropy_increases;
      summary_.worst_entropy_increase = std::max(summary_.worst_entropy_increase, increase);
    }
    last_phi_ = d.phi_of_c;
    return d;
  }

  /// nullopt when the state is admissible.
  std::optional<IntegrationStatus> check(std::span<const double> x, std::string& message) const {
    if (!all_finite(x) || norm_inf(x) > monitors_.divergence_bound) {
      message = "state left the divergence bound";
      return IntegrationStatus::Diverged;
    }
    if (monitors_.escape) {
      const auto& g = *monitors_.escape;
      double d2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - g.center[i]) * (x[i] - g.center[i]);
      if (std::sqrt(d2) > g.radius) {
        message = "trajectory escaped the guard ball";
        return IntegrationStatus::Escaped;
      }
    }
    return std::nullopt;
  }

private:
  const Monitors& monitors_;
  MonitorSummary& summary_;
  bool started_ = false;
  double h0_ = 0.0;
  double last_phi_ = 0.0;
};

}  // namespace detail

/// Integrates x' = field(t, x) over [t0, t1]. Every `stride`-th accepted step
/// and the final state are stored. Divergence, escape and the step budget
/// end the run early with a non-Completed status and a truncated trajectory.
inline IntegrationResult integrate(const VectorField& field, std::span<const double> x0, double t0, double t1,
                                   const StepControl& control, const Monitors& monitors = {},
                                   std::size_t stride = 1) {
  control.validate();
  if (!(t1 > t0)) throw std::invalid_argument("integrate: t1 must exceed t0");
  if (!all_finite(x0)) throw std::invalid_argument("integrate: non-finite initial state");
  if (stride == 0) throw std::invalid_argument("integrate: stride must be positive");
  if (monitors.escape && monitors.escape->center.size() != x0.size()) {
    throw std::invalid_argument("integrate: escape guard center has wrong dimension");
  }

  IntegrationResult result;
  result.trajectory = Trajectory(x0.size());
  detail::MonitorState monitor(monitors, result.summary);

  Vec x(x0.begin(), x0.end());
  double t = t0;
  result.trajectory.append(t, x, monitor.observe(x));

  std::size_t since_stored = 0;
  auto accept = [&](Vec next, double t_next, bool last) -> bool {
    if (auto bad = monitor.check(next, result.message)) {
      result.status = *bad;
      return false;
    }
    x = std::move(next);
    t = t_next;
    ++result.summary.accepted_steps;
    const DiagnosticsRecord d = monitor.observe(x);
    if (++since_stored == stride || last) {
      result.trajectory.append(t, x, d);
      since_stored = 0;
    }
    return true;
  };

  if (control.mode == StepMode::Fixed) {
    const std::size_t steps = detail::fixed_step_count(t0, t1, control.h);
    for (std::size_t k = 0; k < steps; ++k) {
      if (k >= control.max_steps) {
        result.status = IntegrationStatus::MaxStepsExceeded;
        result.message = "step budget exhausted";
        break;
      }
      const bool last = k + 1 == steps;
      const double t_next = last ? t1 : t0 + static_cast<double>(k + 1) * control.h;
      if (!accept(rk4_step(field, x, t, t_next - t), t_next, last)) break;
    }
    return result;
  }

  double h = control.h;
  std::size_t attempts = 0;
  while (t < t1) {
    if (attempts++ >= control.max_steps) {
      result.status = IntegrationStatus::MaxStepsExceeded;
      result.message = "step budget exhausted";
      break;
    }
    bool last = false;
    if (t + h >= t1 || t1 - (t + h) < 1e-12 * std::max(1.0, std::fabs(t1))) {
      h = t1 - t;
      last = true;
    }
    const Vec full = rk4_step(field, x, t, h);
    const Vec half = rk4_step(field, x, t, 0.5 * h);
    Vec two_half = rk4_step(field, half, t + 0.5 * h, 0.5 * h);
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::fabs(full[i] - two_half[i]));
    const double tol = control.abs_tol + control.rel_tol * norm_inf(x);
    double factor = 0.2;
    if (err == 0.0) {
      factor = 5.0;
    } else if (std::isfinite(err)) {
      factor = std::clamp(0.9 * std::pow(tol / err, 0.2), 0.2, 5.0);
    }
    if (std::isfinite(err) && err <= tol) {
      if (!accept(std::move(two_half), last ? t1 : t + h, last)) break;
    } else {
      ++result.summary.rejected_steps;
      last = false;
    }
    h *= factor;
    if (t < t1 && h < 1e-14 * std::max(1.0, std::fabs(t))) {
      result.status = IntegrationStatus::Diverged;
      result.message = "adaptive step size underflow";
      break;
    }
  }
  return result;
}

}  // namespace metriplectic
