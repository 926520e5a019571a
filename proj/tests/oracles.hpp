#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "metriplectic/linalg.hpp"

namespace oracle {

using metriplectic::Matrix;
using metriplectic::Vec;

/// G assembled entry by entry: off-diagonal dH_i dH_j, diagonal
/// -sum_{i != j} dH_i^2.
inline Matrix entrywise_dissipation(std::span<const double> dh) {
  const std::size_t n = dh.size();
  Matrix g(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j) {
        g(i, j) = dh[i] * dh[j];
      } else {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k)
          if (k != j) s += dh[k] * dh[k];
        g(j, j) = -s;
      }
    }
  }
  return g;
}

/// (grad H . grad S)^2 - |grad H|^2 |grad S|^2.
inline double closed_form_production(std::span<const double> dh, std::span<const double> ds) {
  double hs = 0.0, hh = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < dh.size(); ++i) {
    hs += dh[i] * ds[i];
    hh += dh[i] * dh[i];
    ss += ds[i] * ds[i];
  }
  return hs * hs - hh * ss;
}

inline double quadratic_form(const Matrix& g, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) s += v[i] * g(i, j) * v[j];
  return s;
}

inline double central_difference(const std::function<double(std::span<const double>)>& f,
                                 std::span<const double> x, std::size_t i, double h) {
  Vec p(x.begin(), x.end());
  p[i] = x[i] + h;
  const double fp = f(p);
  p[i] = x[i] - h;
  const double fm = f(p);
  return (fp - fm) / (2.0 * h);
}

/// Random expression text over x1..x3 whose every subterm stays inside the
/// domain of ln, sqrt, division and non-integer powers.
class ExpressionGenerator {
public:
  explicit ExpressionGenerator(std::uint64_t seed) : rng_(seed) {}

  std::string next(int depth = 3) { return gen(depth); }

private:
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  std::string leaf() {
    if (pick(3) == 0) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", std::uniform_real_distribution<double>(0.1, 2.0)(rng_));
      return buf;
    }
    return "x" + std::to_string(pick(3) + 1);
  }

  std::string gen(int depth) {
    if (depth == 0) return leaf();
    const std::string a = gen(depth - 1);
    switch (pick(13)) {
      case 0: return "(" + a + " + " + gen(depth - 1) + ")";
      case 1: return "(" + a + " - " + gen(depth - 1) + ")";
      case 2: return "(" + a + " * " + gen(depth - 1) + ")";
      case 3: return "(" + a + ") / ((" + gen(depth - 1) + ")^2 + 0.5)";
      case 4: return "sin(" + a + ")";
      case 5: return "cos(" + a + ")";
      case 6: return "exp(sin(" + a + "))";
      case 7: return "ln((" + a + ")^2 + 0.5)";
      case 8: return "sqrt((" + a + ")^2 + 0.25)";
      case 9: return "(" + a + ")^" + std::to_string(pick(3) + 2);
      case 10: return "((" + a + ")^2 + 1)^1.5";
      case 11: return "((" + a + ")^2 + 1)^(sin(" + gen(depth - 1) + "))";
      default: return "-" + a;
    }
  }

  std::mt19937_64 rng_;
};

}  // namespace oracle
