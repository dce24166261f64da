#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "mindiff/eigen.hpp"
#include "mindiff/error.hpp"
#include "mindiff/presets.hpp"
#include "mindiff/speed_measure.hpp"
#include "oracles.hpp"

using namespace mindiff;

namespace {

std::vector<oracle::Site> sites_of(const SpeedMeasure& m) {
  std::vector<oracle::Site> s;
  for (const SpeedAtom& a : m.atoms()) s.push_back({a.x, a.mass, a.infinite});
  return s;
}

}  // namespace

TEST(SpeedMeasure, Jump3AtomsFollowTheCorrespondence) {
  const TargetLaw law = jump3_law();
  for (double W : {4.0, 5.0, 6.0}) {
    const double lambda = 1.0;
    const SpeedMeasure m = from_law(law, 0.5, lambda, 2.0 / W);
    ASSERT_EQ(m.atoms().size(), 3u);
    EXPECT_NEAR(m.atom_mass(0.5), W / (6.0 * lambda), 1e-14);
    if (W < 6.0) {
      EXPECT_NEAR(2.0 * lambda * m.atom_mass(0.0), 2.0 / (6.0 / W - 1.0), 1e-12);
      EXPECT_NEAR(m.atom_mass(0.0), m.atom_mass(1.0), 1e-14);
    } else {
      EXPECT_TRUE(m.infinite_left());
      EXPECT_TRUE(m.infinite_right());
    }
    // Oracle: the birth-death chain with these atoms, stopped at an
    // exponential time, has law (1/3, 1/3, 1/3).
    const auto law_at_t = oracle::atomic_exp_law(sites_of(m), 1, lambda);
    for (double p : law_at_t) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12) << "W=" << W;
  }
}

TEST(SpeedMeasure, PrintedJumpTableDoesNotEmbedUniformLaw) {
  // Atom masses m({1/2}) = W/4, 2m({0}) = 3/(6/W - 1) at lambda = 1, W = 4.
  const double W = 4.0;
  const std::vector<oracle::Site> s{{0.0, 1.5 / (6.0 / W - 1.0), false}, {0.5, W / 4.0, false},
                                    {1.0, 1.5 / (6.0 / W - 1.0), false}};
  const auto p = oracle::atomic_exp_law(s, 1, 1.0);
  EXPECT_GT(std::abs(p[1] - 1.0 / 3.0), 0.05);
}

TEST(SpeedMeasure, KappaBelowKappa0Rejected) {
  EXPECT_THROW(from_law(jump3_law(), 0.5, 1.0, 0.3), PreconditionError);
}

TEST(SpeedMeasure, LambdaPotential) {
  const TargetLaw law = jump3_law();
  const DiffusionSpec w6 = make_spec(law, 0.5, 1.0, 1.0 / 3.0);
  const DiffusionSpec w4 = make_spec(law, 0.5, 1.0, 0.5);
  EXPECT_NEAR(lambda_potential(w6, 0.25), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(lambda_potential(w4, 0.25), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(lambda_potential(w6, 0.5), w6.kappa, 1e-15);
  EXPECT_THROW(lambda_potential(w6, 1.5), DomainError);
}

TEST(SpeedMeasure, ClassifyJump3) {
  const TargetLaw law = jump3_law();
  const BoundaryReport r6 = classify(make_spec(law, 0.5, 1.0, 1.0 / 3.0));
  EXPECT_EQ(r6.left.behaviour, Behaviour::Absorbing);
  EXPECT_EQ(r6.right.behaviour, Behaviour::Absorbing);
  EXPECT_FALSE(r6.left.entrance);
  EXPECT_FALSE(r6.right.entrance);
  EXPECT_TRUE(r6.minimal);
  EXPECT_TRUE(r6.martingale);
  for (double W : {4.0, 5.0}) {
    const BoundaryReport r = classify(make_spec(law, 0.5, 1.0, 2.0 / W));
    EXPECT_EQ(r.left.behaviour, Behaviour::StickyReflecting);
    EXPECT_EQ(r.right.behaviour, Behaviour::StickyReflecting);
    EXPECT_TRUE(r.left.entrance);
    EXPECT_TRUE(r.right.entrance);
    EXPECT_FALSE(r.minimal);
  }
}

TEST(SpeedMeasure, InverseBesselMinimalIsStrictLocalMartingale) {
  const TargetLaw law = inverse_bessel_law();
  const DiffusionSpec spec = minimalize(law, 1.0, bessel::kLambda);
  EXPECT_NEAR(spec.wronskian(), bessel::wronskian(), 1e-6);
  const BoundaryReport r = classify(spec);
  EXPECT_TRUE(r.minimal);
  EXPECT_FALSE(r.martingale);
  EXPECT_TRUE(r.strict_local_martingale);
  EXPECT_TRUE(r.right.entrance);
  EXPECT_FALSE(r.left.entrance);
  // The recovered speed density is x^-4.
  for (double x : {0.1, 0.3, 0.7, 1.0, 1.5, 3.0, 10.0, 40.0}) {
    EXPECT_NEAR(spec.speed.density(x) * std::pow(x, 4), 1.0, 1e-6) << x;
  }
  // The bare speed measure classifies the same way.
  const BoundaryReport b = classify_speed(inverse_bessel_speed(), 1.0);
  EXPECT_TRUE(b.right.entrance);
  EXPECT_FALSE(b.left.entrance);
  EXPECT_FALSE(b.martingale);
}

TEST(SpeedMeasure, InverseBesselMartingaleVersion) {
  const TargetLaw law = inverse_bessel_law();
  const DiffusionSpec spec = martingale_version(law, bessel::kLambda);
  const double xbar = 1.0 - std::exp(-1.0);
  EXPECT_NEAR(spec.x0, xbar, 1e-6);
  for (double x : {0.08, 0.2, 0.4, 0.6}) EXPECT_NEAR(spec.speed.density(x) * std::pow(x, 4), 1.0, 1e-6) << x;
  const double s1 = std::sinh(1.0);
  for (double x : {0.65, 0.8, 0.95}) {
    const double middle = s1 * std::exp(-1.0 / x) / (x * x * x * (s1 * x * std::exp(-1.0 / x) + xbar - x));
    EXPECT_NEAR(spec.speed.density(x) / middle, 1.0, 1e-6) << x;
  }
  for (double x : {1.2, 3.0, 20.0}) {
    const double upper = std::sinh(1.0 / x) / (x * x * x * (x * std::sinh(1.0 / x) - 1.0));
    EXPECT_NEAR(spec.speed.density(x) / upper, 1.0, 1e-6) << x;
  }
  const BoundaryReport r = classify(spec);
  EXPECT_FALSE(r.left.entrance);
  EXPECT_FALSE(r.right.entrance);
  EXPECT_TRUE(r.martingale);
}

TEST(SpeedMeasure, MartingaleVersionRejectsAtomAtMean) {
  EXPECT_THROW(martingale_version(jump3_law(), 1.0), PreconditionError);
}

TEST(SpeedMeasure, SymmetricLawMartingaleVersionIsMinimal) {
  const TargetLaw law(0.0, 1.0, {}, {DensityPiece{{{0.0, 0.0}, {0.5, 2.0}, {1.0, 0.0}}}});
  const DiffusionSpec a = martingale_version(law, 1.0);
  const DiffusionSpec b = minimalize(law, 0.5, 1.0);
  EXPECT_NEAR(a.kappa, b.kappa, 1e-15);
  for (double x : {0.1, 0.3, 0.7, 0.9}) EXPECT_NEAR(a.speed.density(x), b.speed.density(x), 1e-12);
}

TEST(SpeedMeasure, TwoAtomMinimalIsAbsorbingExit) {
  const double h = 0.2;
  const TargetLaw law(0.0, 1.0, {{0.5 - h, 0.5}, {0.5 + h, 0.5}}, {});
  const DiffusionSpec spec = minimalize(law, 0.5, 1.0);
  EXPECT_NEAR(spec.kappa, h, 1e-15);
  EXPECT_TRUE(spec.speed.infinite_left());
  EXPECT_TRUE(spec.speed.infinite_right());
  EXPECT_EQ(spec.speed.left(), 0.5 - h);
  EXPECT_EQ(spec.speed.right(), 0.5 + h);
}

TEST(SpeedMeasure, EntranceCountOnGeneratedLaws) {
  Rng rng(21);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const TargetLaw law = gen::random_law(rng);
    const double x0 = law.hull_left() + (0.2 + 0.6 * rng.uniform()) * (law.hull_right() - law.hull_left());
    if (!(x0 > law.hull_left() && x0 < law.hull_right()) || law.atom_at(x0) > 0.0) continue;
    const double k0 = kappa0(law, x0);
    const BoundaryReport above = classify(make_spec(law, x0, 1.0, k0 * 1.2));
    EXPECT_TRUE(above.left.entrance && above.right.entrance);
    EXPECT_FALSE(above.minimal);
    if (std::abs(x0 - law.mean()) > 1e-3) {
      const BoundaryReport at = classify(make_spec(law, x0, 1.0, k0));
      EXPECT_TRUE(at.minimal);
      EXPECT_EQ(static_cast<int>(at.left.entrance) + static_cast<int>(at.right.entrance), 1);
      const bool put_side = law.put(x0) > law.call(x0);
      EXPECT_EQ(at.left.entrance, !put_side);
    }
    ++checked;
  }
  EXPECT_GT(checked, 30);
}

TEST(SpeedMeasure, PotentialShapeAndMonotonicity) {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const TargetLaw law = gen::random_law(rng);
    const double x0 = 0.5 * (law.hull_left() + law.hull_right());
    if (law.atom_at(x0) > 0.0 || !(x0 > 0.0 && x0 < 1.0)) continue;
    const double k0 = kappa0(law, x0);
    const DiffusionSpec s1 = make_spec(law, x0, 1.0, k0 * 1.1);
    const DiffusionSpec s2 = make_spec(law, x0, 1.0, k0 * 1.5);
    double peak = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double y = i / 200.0;
      const double u = lambda_potential(s1, y);
      peak = std::max(peak, u);
      if (i > 0 && i < 200) {
        const double h = 1.0 / 200.0;
        if (!(y - h < x0 && y + h > x0))
          EXPECT_GE(lambda_potential(s1, y + h) - 2 * u + lambda_potential(s1, y - h), -1e-13);
      }
      if (s1.speed.density(y) > 0.0) EXPECT_GE(s1.speed.density(y), s2.speed.density(y));
    }
    EXPECT_LE(peak, s1.kappa + 1e-14);
    EXPECT_NEAR(lambda_potential(s1, x0), s1.kappa, 1e-15);
  }
}

TEST(SpeedMeasure, ToLawRoundTripJump3) {
  const TargetLaw law = jump3_law();
  for (double kappa : {1.0 / 3.0, 0.5}) {
    const SpeedMeasure m = from_law(law, 0.5, 1.0, kappa);
    const TargetLaw back = to_law(m, 0.5, 1.0);
    for (double x : {0.0, 0.5, 1.0}) EXPECT_NEAR(back.atom_at(x), 1.0 / 3.0, 1e-6);
  }
}

TEST(SpeedMeasure, ToLawLebesgueReflecting) {
  const double x0 = 1.5, lambda = 0.5;
  const TargetLaw law = to_law(lebesgue_speed(), x0, lambda);
  const double W = std::tanh(x0) + std::tanh(2.0 - x0);
  for (double x : {0.0, 0.5, 1.0, 1.5, 1.8, 2.0}) {
    const double u = x <= x0 ? std::cosh(x) / std::cosh(x0) : std::cosh(2.0 - x) / std::cosh(2.0 - x0);
    EXPECT_NEAR(law.density_at(std::min(x, 2.0 - 1e-9)), lambda * 2.0 / W * u, 1e-6) << x;
  }
  EXPECT_TRUE(law.atoms().empty());
}

TEST(SpeedMeasure, ToLawInverseBessel) {
  const TargetLaw law = to_law(inverse_bessel_speed(), 1.0, bessel::kLambda);
  for (double x : {0.2, 0.5, 1.0, 2.0, 5.0}) EXPECT_NEAR(law.density_at(x) / bessel::density(x), 1.0, 1e-4) << x;
  EXPECT_NEAR(law.mean(), 1.0 - std::exp(-1.0), 1e-3);
}

TEST(SpeedMeasure, ReflectedCoshMinimalSigma) {
  const double x0 = 1.5, lambda = 0.5;
  const TargetLaw law = to_law(lebesgue_speed(), x0, lambda);
  const DiffusionSpec spec = minimalize(law, x0, lambda);
  for (double x : {0.1, 0.5, 1.0, 1.4}) EXPECT_NEAR(spec.speed.sigma2(x), 1.0 - 1.0 / std::cosh(x), 1e-4) << x;
  for (double x : {1.6, 1.8, 1.95}) {
    const double s2 = 1.0 - std::cosh(2.0 - x0) / (std::cosh(2.0 - x) * std::cosh(x0));
    EXPECT_NEAR(spec.speed.sigma2(x), s2, 1e-4) << x;
  }
}

TEST(SpeedMeasure, RoundTripSmoothLaw) {
  const TargetLaw law(0.0, 1.0, {}, {DensityPiece{{{0.0, 0.4}, {0.3, 1.2}, {0.7, 1.1}, {1.0, 0.9}}}});
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < law.density()[0].nodes.size(); ++j) {
    const auto& n = law.density()[0].nodes;
    total += 0.5 * (n[j].f + n[j + 1].f) * (n[j + 1].x - n[j].x);
  }
  ASSERT_NEAR(total, 1.0, 1e-12);
  const double x0 = 0.45;
  for (double factor : {1.0, 1.3}) {
    const double kappa = kappa0(law, x0) * factor;
    const TargetLaw back = to_law(from_law(law, x0, 1.0, kappa), x0, 1.0);
    // Binned total variation; the cut end may carry the far tail as an atom.
    double tv = 0.0;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
      const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
      tv += std::abs((back.cdf(hi) - back.cdf(lo)) - (law.cdf(hi) - law.cdf(lo)));
    }
    EXPECT_LT(0.5 * tv, 2e-4) << factor;
  }
}
