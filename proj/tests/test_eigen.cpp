#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "mindiff/eigen.hpp"
#include "mindiff/error.hpp"
#include "mindiff/presets.hpp"

using namespace mindiff;

namespace {

GridFunction sample(double lo, double hi, int n, double (*f)(double), double slope) {
  GridFunction g;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    g.x.push_back(x);
    g.f.push_back(f(x));
  }
  g.slope = slope;
  return g;
}

double kimura_up(double x) { return 2 * x * x / (1 - x); }
double kimura_down(double x) { return 2 * (1 - x) * (1 - x) / x; }

}  // namespace

TEST(Eigen, LebesgueReflectingCosh) {
  const double x0 = 1.5;
  const EigenSolution sol = solve(lebesgue_speed(0.0, 2.0), x0, 0.5);
  EXPECT_FALSE(sol.left_absorbing);
  EXPECT_FALSE(sol.right_absorbing);
  EXPECT_EQ(sol.left(), 0.0);
  EXPECT_EQ(sol.right(), 2.0);
  double dev = 0.0;
  for (std::size_t k = 0; k < sol.grid.size(); ++k) {
    const double x = sol.grid[k];
    dev = std::max(dev, std::abs(sol.varphi[k] - std::cosh(x) / std::cosh(x0)));
    dev = std::max(dev, std::abs(sol.phi[k] - std::cosh(2 - x) / std::cosh(2 - x0)));
  }
  EXPECT_LT(dev, 1e-6);
  EXPECT_LT(sol.wronskian_spread, 1e-8);
  const double w = std::tanh(x0) + std::tanh(2 - x0);
  EXPECT_NEAR(sol.wronskian, w, 1e-9);
  EXPECT_NEAR(sol.varphi_at(0.3), std::cosh(0.3) / std::cosh(x0), 1e-9);
  EXPECT_NEAR(sol.phi_slope(0.3), -std::sinh(1.7) / std::cosh(0.5), 1e-7);
  EXPECT_THROW(sol.varphi_at(2.5), DomainError);
}

TEST(Eigen, KimuraClosedForms) {
  const SpeedMeasure m = kimura_speed();
  EigenOptions opt;
  opt.eps = 1e-4;
  // The closed forms solve the equation for density 1/(x^2 (1-x)^2); sampled on the solver grid.
  const EigenSolution fine = solve(m, 0.5, 1.0, opt);
  GridFunction up{fine.grid, {}, {}}, down{fine.grid, {}, {}};
  for (double x : fine.grid) {
    up.f.push_back(kimura_up(x));
    down.f.push_back(kimura_down(x));
  }
  const double a = fine.left(), b = 1 - a;
  up.slope = 4 * a / b + 2 * a * a / (b * b);
  down.slope = -4 * a / b - 2 * a * a / (b * b);
  down.anchor_back = true;
  EXPECT_LT(ode_residual(up, m, 1.0), 1e-8);
  EXPECT_LT(ode_residual(down, m, 1.0), 1e-8);

  const EigenSolution sol = solve(m, 0.5, 1.0);
  EXPECT_TRUE(sol.left_absorbing);
  EXPECT_TRUE(sol.right_absorbing);
  EXPECT_NEAR(sol.wronskian, 12.0, 1e-6);
  EXPECT_LT(sol.residual, 1e-8);
  EXPECT_LT(sol.truncation_sensitivity, 1e-6);
  for (double x : {0.1, 0.25, 0.5, 0.7, 0.9}) {
    EXPECT_NEAR(sol.varphi_at(x), kimura_up(x), 1e-6 * std::max(1.0, kimura_up(x))) << x;
    EXPECT_NEAR(sol.phi_at(x), kimura_down(x), 1e-6 * std::max(1.0, kimura_down(x))) << x;
  }
}

TEST(Eigen, InverseBesselEigenfunctions) {
  const EigenSolution sol = solve(inverse_bessel_speed(), 1.0, bessel::kLambda);
  EXPECT_NEAR(sol.wronskian, bessel::wronskian(), 1e-7);
  for (double x : {0.1, 0.3, 0.7, 1.0, 2.0, 10.0, 100.0}) {
    EXPECT_NEAR(sol.varphi_at(x) / bessel::varphi(x), 1.0, 1e-6) << x;
    EXPECT_NEAR(sol.phi_at(x) / bessel::phi(x), 1.0, 1e-6) << x;
  }
  EXPECT_NEAR(hitting_laplace(sol, 2.0, 1.0), 2 * std::sinh(0.5) / std::sinh(1.0), 1e-7);
  EXPECT_NEAR(hitting_laplace(sol, 2.0, 1.0), 0.886819, 1e-6);
  EXPECT_NEAR(hitting_laplace(sol, 0.5, 1.0), 0.5 * std::exp(-1.0), 1e-7);
}

TEST(Eigen, HittingLaplaceReflectedBM) {
  const EigenSolution sol = solve(lebesgue_speed(0.0, 2.0), 1.5, 0.5);
  EXPECT_NEAR(hitting_laplace(sol, 1.0, 1.5), std::cosh(1.0) / std::cosh(1.5), 1e-8);
  EXPECT_NEAR(hitting_laplace(sol, 1.8, 1.5), std::cosh(0.2) / std::cosh(0.5), 1e-8);
  EXPECT_EQ(hitting_laplace(sol, 1.2, 1.2), 1.0);
}

TEST(Eigen, HittingLaplaceMultiplicative) {
  Rng rng(21);
  const EigenSolution a = solve(lebesgue_speed(0.0, 2.0), 0.7, 0.5);
  const EigenSolution b = solve(kimura_speed(), 0.5, 1.0);
  for (const EigenSolution* sol : {&a, &b}) {
    for (int i = 0; i < 200; ++i) {
      double p[3];
      for (double& v : p) v = sol->left() + (sol->right() - sol->left()) * (0.05 + 0.9 * rng.uniform());
      std::sort(p, p + 3);
      const double up = hitting_laplace(*sol, p[0], p[1]) * hitting_laplace(*sol, p[1], p[2]);
      EXPECT_NEAR(up, hitting_laplace(*sol, p[0], p[2]), 1e-12 * std::max(1.0, up));
      const double down = hitting_laplace(*sol, p[2], p[1]) * hitting_laplace(*sol, p[1], p[0]);
      EXPECT_NEAR(down, hitting_laplace(*sol, p[2], p[0]), 1e-12 * std::max(1.0, down));
      EXPECT_LE(hitting_laplace(*sol, p[0], p[2]), 1.0 + 1e-12);
    }
  }
}

TEST(Eigen, ResidualOfWrongEigenvalue) {
  const SpeedMeasure m = lebesgue_speed(0.0, 2.0);
  const GridFunction c = sample(0.0, 2.0, 2000, [](double x) { return std::cosh(x); }, 0.0);
  EXPECT_LT(ode_residual(c, m, 0.5), 1e-9);
  const double wrong = ode_residual(c, m, 1.0);
  EXPECT_GT(wrong, 0.1);
  // Without a given slope it is fitted.
  GridFunction fitted = c;
  fitted.slope.reset();
  EXPECT_LT(ode_residual(fitted, m, 0.5), 1e-8);
}

TEST(Eigen, ShiftFamilyKimura) {
  EigenOptions opt;
  opt.eps = 1e-4;
  const EigenSolution sol = solve(kimura_speed(), 0.5, 1.0, opt);
  for (double delta : {0.0, 1.0, 5.0}) {
    const SpeedMeasure s = shift_family(sol, delta);
    for (double x : {0.05, 0.2, 0.4}) {
      const double sigma2 = (delta / 2 * (1 - x) + x * x) * (1 - x) * (1 - x);
      EXPECT_NEAR(1.0 / s.density(x) / sigma2, 1.0, 1e-6) << delta << " " << x;
    }
    GridFunction g;
    for (int i = 0; i <= 2000; ++i) {
      const double x = 0.02 + (0.5 - 0.02) * i / 2000.0;
      g.x.push_back(x);
      g.f.push_back(kimura_up(x) + delta);
    }
    g.slope = 4 * 0.02 / 0.98 + 2 * 0.02 * 0.02 / (0.98 * 0.98);
    EXPECT_LT(ode_residual(g, s, 1.0), 1e-8) << delta;
    if (delta > 0.0) {
      EXPECT_FALSE(s.infinite_left());
      EXPECT_GT(s.atom_mass(sol.left()), 0.0);
    }
  }
  EXPECT_THROW(shift_family(sol, -0.5), PreconditionError);
}

TEST(Eigen, ShiftFamilyReflectedToMinimal) {
  const double x0 = 1.5;
  const EigenSolution sol = solve(lebesgue_speed(0.0, 2.0), x0, 0.5);
  const double eta = 1.0 / std::cosh(x0);
  const SpeedMeasure s = shift_family(sol, -eta);
  for (double x : {0.05, 0.3, 0.8, 1.2, 1.45}) {
    EXPECT_NEAR(1.0 / s.density(x), 1.0 - 1.0 / std::cosh(x), 1e-6) << x;
  }
  const BoundaryReport r = classify_speed(s, x0);
  EXPECT_FALSE(r.left.entrance);
}

TEST(Eigen, ZeroShiftIsIdentity) {
  const SpeedMeasure m = lebesgue_speed(0.0, 2.0);
  const EigenSolution sol = solve(m, 1.0, 0.5);
  const SpeedMeasure s = shift_family(sol, 0.0);
  for (int i = 0; i <= 100; ++i) {
    const double x = 2.0 * i / 100.0;
    EXPECT_NEAR(s.density(x), m.density(x), 1e-10) << x;
  }
  EXPECT_TRUE(s.atoms().empty());
}

TEST(Eigen, PotentialIsScaledEigenfunction) {
  Rng rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const TargetLaw law = gen::random_law(rng);
    const double x0 = law.hull_left() + (law.hull_right() - law.hull_left()) * (0.2 + 0.6 * rng.uniform());
    const double lambda = 0.5 + rng.uniform();
    const DiffusionSpec spec = make_spec(law, x0, lambda, kappa0(law, x0) * (1.0 + rng.uniform()));
    const EigenSolution sol = solve(spec.speed, x0, lambda);
    EXPECT_NEAR(sol.wronskian, spec.wronskian(), 1e-6 * spec.wronskian());
    for (int i = 0; i < 20; ++i) {
      const double x = sol.left() + (sol.right() - sol.left()) * rng.uniform();
      const double f = x <= x0 ? sol.varphi_at(x) : sol.phi_at(x);
      EXPECT_NEAR(lambda_potential(spec, x), spec.kappa * f, 1e-6 * spec.kappa) << trial << " " << x;
    }
  }
}
