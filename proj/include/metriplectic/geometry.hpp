#pragma once

// Poisson structures, scalar fields with symbolic gradients, and the system
// definition tying H, the Casimirs and the entropy shaper together.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "metriplectic/expr.hpp"
#include "metriplectic/linalg.hpp"

namespace metriplectic {

class GeometryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline std::string format_point(std::span<const double> x) {
  std::string s = "(";
  char buf[32];
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", x[i]);
    if (i) s += ", ";
    s += buf;
  }
  return s + ")";
}

/// Antisymmetric, state-dependent matrix Pi(x) with Pi[i][j] = {x_i, x_j}.
class PoissonStructure {
public:
  static constexpr double kAntisymmetryTol = 1e-12;

  PoissonStructure() = default;
  PoissonStructure(std::size_t n, std::vector<Expression> entries) : n_(n), entries_(std::move(entries)) {
    if (entries_.size() != n * n) throw GeometryError("poisson structure needs n*n entries");
    for (const auto& e : entries_) {
      if (e.arity() > n) throw GeometryError("poisson entry references a variable beyond dimension");
    }
  }

  std::size_t dimension() const noexcept { return n_; }
  const Expression& entry(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }

  /// Numeric Pi(x); throws GeometryError if the result is not antisymmetric.
  Matrix matrix(std::span<const double> x) const {
    if (x.size() != n_) throw std::invalid_argument("poisson_matrix: point has wrong dimension");
    Matrix m(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) m(i, j) = entries_[i * n_ + j].evaluate(x);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i; j < n_; ++j) {
        if (std::fabs(m(i, j) + m(j, i)) > kAntisymmetryTol) {
          throw GeometryError("poisson matrix not antisymmetric at entry (" + std::to_string(i + 1) + "," +
                              std::to_string(j + 1) + ") for x = " + format_point(x));
        }
      }
    }
    return m;
  }

private:
  std::size_t n_ = 0;
  std::vector<Expression> entries_;
};

inline Matrix poisson_matrix(const PoissonStructure& structure, std::span<const double> x) {
  return structure.matrix(x);
}

/// A scalar function on R^n together with its gradient expressions.
class ScalarField {
public:
  ScalarField() = default;

  /// Gradient by symbolic differentiation of `value`.
  ScalarField(Expression value, std::size_t arity) : arity_(arity), value_(std::move(value)) {
    if (value_.arity() > arity_) throw GeometryError("scalar field references a variable beyond its arity");
    gradient_.reserve(arity_);
    for (std::size_t i = 0; i < arity_; ++i) gradient_.push_back(value_.derivative(i));
  }

  /// Gradient supplied explicitly (e.g. assembled by the chain rule).
  ScalarField(Expression value, std::vector<Expression> gradient)
      : arity_(gradient.size()), value_(std::move(value)), gradient_(std::move(gradient)) {}

  std::size_t arity() const noexcept { return arity_; }
  const Expression& expression() const noexcept { return value_; }
  const std::vector<Expression>& gradient_expressions() const noexcept { return gradient_; }

  double value(std::span<const double> x) const { return value_.evaluate(x); }

  Vec gradient(std::span<const double> x) const {
    Vec g(arity_);
    for (std::size_t i = 0; i < arity_; ++i) g[i] = gradient_[i].evaluate(x);
    return g;
  }

private:
  std::size_t arity_ = 0;
  Expression value_;
  std::vector<Expression> gradient_;
};

/// phi(C_1(x), ..., C_k(x)) with gradient sum_i dphi/ds_i(C(x)) * grad C_i(x).
inline ScalarField compose_entropy(std::span<const ScalarField> casimirs, const Expression& phi, std::size_t n) {
  const std::size_t k = casimirs.size();
  if (phi.arity() > k) {
    throw GeometryError("phi references s" + std::to_string(phi.arity()) + " but only " + std::to_string(k) +
                        " Casimirs are declared");
  }
  std::vector<Expression> inner;
  inner.reserve(k);
  for (const auto& c : casimirs) {
    if (c.arity() != n) throw GeometryError("Casimir arity differs from system dimension");
    inner.push_back(c.expression());
  }
  const Expression value = phi.substitute(inner);
  std::vector<Expression> gradient(n, Expression::constant(0.0));
  for (std::size_t i = 0; i < k; ++i) {
    const Expression outer = phi.derivative(i).substitute(inner);
    if (outer.is_constant(0.0)) continue;
    const auto& inner_grad = casimirs[i].gradient_expressions();
    for (std::size_t j = 0; j < n; ++j) gradient[j] = gradient[j] + outer * inner_grad[j];
  }
  return ScalarField(value, std::move(gradient));
}

/// n, Pi, H, C_1..C_k and phi. The composed entropy phi o C is built once.
class SystemDefinition {
public:
  SystemDefinition() = default;
  SystemDefinition(std::string name, PoissonStructure poisson, ScalarField hamiltonian,
                   std::vector<ScalarField> casimirs, Expression phi)
      : name_(std::move(name)),
        poisson_(std::move(poisson)),
        hamiltonian_(std::move(hamiltonian)),
        casimirs_(std::move(casimirs)),
        phi_(std::move(phi)) {
    const std::size_t n = poisson_.dimension();
    if (n == 0) throw GeometryError("system dimension must be positive");
    if (hamiltonian_.arity() != n) throw GeometryError("Hamiltonian arity differs from system dimension");
    entropy_ = compose_entropy(casimirs_, phi_, n);
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t dimension() const noexcept { return poisson_.dimension(); }
  std::size_t casimir_count() const noexcept { return casimirs_.size(); }
  const PoissonStructure& poisson() const noexcept { return poisson_; }
  const ScalarField& hamiltonian() const noexcept { return hamiltonian_; }
  const std::vector<ScalarField>& casimirs() const noexcept { return casimirs_; }
  const Expression& phi() const noexcept { return phi_; }
  /// x -> phi(C_1(x), ..., C_k(x)).
  const ScalarField& entropy() const noexcept { return entropy_; }

private:
  std::string name_;
  PoissonStructure poisson_;
  ScalarField hamiltonian_;
  std::vector<ScalarField> casimirs_;
  Expression phi_;
  ScalarField entropy_;
};

inline ScalarField compose_entropy(const SystemDefinition& sys) { return sys.entropy(); }

struct CasimirReport {
  double max_residual = 0.0;
  Vec worst_point;
  bool pass = true;
};

/// Sup-norm of Pi(x) grad c(x), maximized over `points`.
inline CasimirReport verify_casimir(const PoissonStructure& structure, const ScalarField& c,
                                    std::span<const Vec> points, double tol) {
  if (points.empty()) throw std::invalid_argument("verify_casimir: no sample points");
  if (!(tol > 0.0)) throw std::invalid_argument("verify_casimir: tolerance must be positive");
  CasimirReport report;
  for (const auto& x : points) {
    double r = 0.0;
    try {
      r = norm_inf(structure.matrix(x) * c.gradient(x));
    } catch (const EvaluationError& e) {
      throw EvaluationError(std::string(e.what()) + " at x = " + format_point(x));
    }
    if (report.worst_point.empty() || r > report.max_residual) {
      report.max_residual = r;
      report.worst_point = x;
    }
  }
  report.pass = report.max_residual <= tol;
  return report;
}

/// Uniform samples in the box [lo, hi]^n from a seeded generator.
inline std::vector<Vec> sample_points(std::size_t n, std::size_t count, double lo, double hi,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<Vec> pts(count, Vec(n));
  for (auto& p : pts)
    for (auto& v : p) v = dist(rng);
  return pts;
}

}  // namespace metriplectic
