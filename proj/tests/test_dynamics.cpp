#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "metriplectic/dynamics.hpp"
#include "metriplectic/systems.hpp"

using namespace metriplectic;

namespace {

const SystemDefinition& rigid() {
  static const SystemDefinition sys = rigid_body_system({3, 2, 1, 1});
  return sys;
}

void expect_vec_near(const Vec& got, const Vec& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "component " << i;
}

}  // namespace

TEST(ConservativeField, RigidBodyValues) {
  expect_vec_near(conservative_field(rigid(), Vec{1, 1, 1}), {0.5, -2.0 / 3.0, 1.0 / 6.0}, 1e-15);
  expect_vec_near(conservative_field(rigid(), Vec{1, 0, 0}), {0, 0, 0}, 0.0);
  expect_vec_near(conservative_field(rigid(), Vec{0, 0, 0}), {0, 0, 0}, 0.0);
  EXPECT_THROW(conservative_field(rigid(), Vec{1, 1}), std::invalid_argument);
}

TEST(MetriplecticField, RigidBodyValues) {
  expect_vec_near(metriplectic_field(rigid(), Vec{1, 1, 1}), {-0.75, -38.0 / 27.0, 103.0 / 108.0}, 1e-14);
  expect_vec_near(metriplectic_field(rigid(), Vec{1, 0, 0}), {0, 0, 0}, 0.0);
  for (double lambda : {-2.0, -0.3, 0.7, 1.9}) {
    expect_vec_near(metriplectic_field(rigid(), Vec{0, lambda, 0}), {0, 0, 0}, 1e-15);
  }
}

TEST(MetriplecticField, NoCasimirsEqualsConservative) {
  SystemDefinition plain("plain", rigid().poisson(), rigid().hamiltonian(), {}, Expression::constant(0.0));
  const Vec x{0.3, -1.1, 0.8};
  EXPECT_EQ(metriplectic_field(plain, x), conservative_field(plain, x));
}

TEST(LinearDependence, Examples) {
  const auto a = linear_dependence(Vec{1, 0, 0}, Vec{2, 0, 0}, 1e-10);
  EXPECT_TRUE(a.dependent);
  ASSERT_TRUE(a.lambda.has_value());
  EXPECT_DOUBLE_EQ(*a.lambda, 0.5);

  const auto b = linear_dependence(Vec{1, 0, 0}, Vec{0, 1, 0}, 1e-10);
  EXPECT_FALSE(b.dependent);
  EXPECT_DOUBLE_EQ(b.normalized_defect, 1.0);
  EXPECT_FALSE(b.lambda.has_value());

  const auto c = linear_dependence(Vec{1.0 / 3.0, 0.5, 0}, Vec{2.0 / 3.0, 2.0 / 3.0, 0}, 1e-10);
  EXPECT_NEAR(c.gram_defect, 1.0 / 81.0, 1e-16);
  EXPECT_NEAR(c.normalized_defect, 1.0 / 26.0, 1e-15);
  EXPECT_FALSE(c.dependent);
}

TEST(LinearDependence, ZeroVectorsAreDependent) {
  const auto a = linear_dependence(Vec{1, 2, 3}, Vec{0, 0, 0}, 1e-10);
  EXPECT_TRUE(a.dependent);
  EXPECT_TRUE(a.degenerate);
  EXPECT_FALSE(a.lambda.has_value());
  const auto b = linear_dependence(Vec{0, 0, 0}, Vec{1, 2, 3}, 1e-10);
  EXPECT_TRUE(b.dependent);
  ASSERT_TRUE(b.lambda.has_value());
  EXPECT_EQ(*b.lambda, 0.0);
  EXPECT_THROW(linear_dependence(Vec{1}, Vec{1, 2}, 1e-10), std::invalid_argument);
}

TEST(LinearDependence, ScaleInvariant) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2, 2);
  std::uniform_real_distribution<double> scale(0.01, 100);
  for (int trial = 0; trial < 500; ++trial) {
    Vec a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
    const double base = linear_dependence(a, b).normalized_defect;
    const double s = scale(rng) * (trial % 2 ? -1.0 : 1.0);
    Vec as = a;
    for (auto& v : as) v *= s;
    EXPECT_NEAR(linear_dependence(as, b).normalized_defect, base, 1e-12);
    EXPECT_NEAR(linear_dependence(b, as).normalized_defect, base, 1e-12);
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 1.0);
  }
}

TEST(DependenceDefect, RigidBodyAxesAndOffAxis) {
  EXPECT_EQ(dependence_defect(rigid(), Vec{1, 0, 0}), 0.0);
  EXPECT_EQ(dependence_defect(rigid(), Vec{0, 0, 1.7}), 0.0);
  EXPECT_EQ(dependence_defect(rigid(), Vec{0, -0.4, 0}), 0.0);
  EXPECT_NEAR(dependence_defect(rigid(), Vec{1, 1, 0}), 1.0 / 26.0, 1e-15);
}

TEST(ClassifyEquilibrium, Examples) {
  const auto axis = classify_equilibrium(rigid(), Vec{1, 0, 0});
  EXPECT_TRUE(axis.is_xi_pi_equilibrium);
  EXPECT_TRUE(axis.is_xi_equilibrium);
  EXPECT_TRUE(axis.dependence.dependent);

  const auto generic = classify_equilibrium(rigid(), Vec{1, 1, 1});
  EXPECT_FALSE(generic.is_xi_pi_equilibrium);
  EXPECT_FALSE(generic.is_xi_equilibrium);
  EXPECT_NEAR(generic.conservative_norm, 2.0 / 3.0, 1e-15);

  const auto origin = classify_equilibrium(rigid(), Vec{0, 0, 0});
  EXPECT_TRUE(origin.is_xi_pi_equilibrium);
  EXPECT_TRUE(origin.is_xi_equilibrium);
  EXPECT_TRUE(origin.dependence.degenerate);
}

TEST(DynamicsProperty, EnergyOrthogonalityAndEntropyDescent) {
  const auto& sys = rigid();
  for (const auto& x : sample_points(3, 1000, -2, 2, 42)) {
    const Vec xi = metriplectic_field(sys, x);
    EXPECT_LE(std::fabs(dot(sys.hamiltonian().gradient(x), xi)), 1e-10);
    EXPECT_LE(dot(sys.entropy().gradient(x), xi), 1e-12);
  }
}

TEST(DynamicsProperty, MetriplecticEquilibriaAreConservativeEquilibria) {
  const auto& sys = rigid();
  const double tol = 1e-9;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  std::uniform_int_distribution<int> axis(0, 2);
  for (int trial = 0; trial < 2000; ++trial) {
    Vec x{u(rng), u(rng), u(rng)};
    if (trial % 2 == 0) {
      // pin near a coordinate axis so equilibria are actually sampled
      const int keep = axis(rng);
      for (int i = 0; i < 3; ++i)
        if (i != keep) x[i] = 0.0;
    }
    const double xi = norm_inf(metriplectic_field(sys, x));
    const double xi_pi = norm_inf(conservative_field(sys, x));
    if (xi <= tol) {
      EXPECT_LE(xi_pi, tol * (1.0 + 10.0));
    }
    const auto report = classify_equilibrium(sys, x);
    if (report.is_xi_equilibrium) {
      EXPECT_TRUE(report.is_xi_pi_equilibrium);
    }
  }
}

TEST(DynamicsProperty, AxesAreEquilibriaOfBothFields) {
  const auto& sys = rigid();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < 100; ++k) {
      Vec x{0, 0, 0};
      x[axis] = u(rng);
      EXPECT_LE(norm_inf(conservative_field(sys, x)), 1e-12);
      EXPECT_LE(norm_inf(metriplectic_field(sys, x)), 1e-12);
      EXPECT_LE(dependence_defect(sys, x), 1e-12);
    }
  }
}

TEST(Diagnostics, RecordMatchesComponents) {
  const Vec x{1, 1, 0};
  const DiagnosticsRecord d = diagnostics_at(rigid(), x);
  EXPECT_NEAR(d.hamiltonian, 1.0 / 6.0 + 1.0 / 4.0, 1e-15);
  // C = 1, phi(1) = 1/4 - 1/3
  EXPECT_NEAR(d.phi_of_c, -1.0 / 12.0, 1e-15);
  EXPECT_NEAR(d.entropy_production_rate, -1.0 / 81.0, 1e-15);
  EXPECT_NEAR(d.dependence_defect, 1.0 / 26.0, 1e-15);
}
