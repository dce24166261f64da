#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

#include "generators.hpp"
#include "mindiff/error.hpp"
#include "mindiff/presets.hpp"
#include "mindiff/target_law.hpp"

using namespace mindiff;

namespace {

// Independent route: integrate (y - x)^+ against the law segment by segment.
double call_by_quadrature(const TargetLaw& law, double x) {
  double c = 0.0;
  for (const Atom& a : law.atoms()) c += a.mass * std::max(a.x - x, 0.0);
  for (const DensityPiece& p : law.density()) {
    for (std::size_t j = 0; j + 1 < p.nodes.size(); ++j) {
      const DensityNode n0 = p.nodes[j], n1 = p.nodes[j + 1];
      auto f = [&](double y) {
        const double dens = n0.f + (n1.f - n0.f) * (y - n0.x) / (n1.x - n0.x);
        return std::max(y - x, 0.0) * dens;
      };
      const double lo = std::max(n0.x, x);
      if (n1.x > lo) c += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, lo, n1.x);
    }
  }
  return c;
}

double potential_by_sum(const TargetLaw& law, double x) {
  double u = 0.0;
  for (const Atom& a : law.atoms()) u += a.mass * std::abs(a.x - x);
  for (const DensityPiece& p : law.density()) {
    for (std::size_t j = 0; j + 1 < p.nodes.size(); ++j) {
      const DensityNode n0 = p.nodes[j], n1 = p.nodes[j + 1];
      auto f = [&](double y) {
        return std::abs(y - x) * (n0.f + (n1.f - n0.f) * (y - n0.x) / (n1.x - n0.x));
      };
      using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
      if (x > n0.x && x < n1.x)
        u += GK::integrate(f, n0.x, x) + GK::integrate(f, x, n1.x);
      else
        u += GK::integrate(f, n0.x, n1.x);
    }
  }
  return u;
}

}  // namespace

TEST(TargetLaw, Jump3Values) {
  const TargetLaw law = jump3_law();
  EXPECT_DOUBLE_EQ(mean(law), 0.5);
  EXPECT_NEAR(call_price(law, 0.75), 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(put_price(law, 0.25), 1.0 / 12.0, 1e-15);
  EXPECT_EQ(call_price(law, 1.0), 0.0);
  EXPECT_EQ(put_price(law, 0.0), 0.0);
  EXPECT_NEAR(v_mu(law, 0.5, 0.0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(v_mu(law, 0.5, 1.0), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(v_mu(law, 0.5, 0.5), 0.0);
  EXPECT_NEAR(kappa0(law, 0.5), 1.0 / 3.0, 1e-15);
  for (double x : {0.1, 0.3, 0.6, 0.9}) {
    EXPECT_NEAR(call_price(law, x), 1.0 / 3.0 - x / 3.0 + (x < 0.5 ? (0.5 - x) / 3.0 : 0.0), 1e-15);
  }
}

TEST(TargetLaw, SimpleLaws) {
  const TargetLaw delta(0.0, 1.0, {{0.3, 1.0}}, {});
  EXPECT_DOUBLE_EQ(mean(delta), 0.3);
  const double h = 0.2, x0 = 0.5;
  const TargetLaw two(0.0, 1.0, {{x0 - h, 0.5}, {x0 + h, 0.5}}, {});
  EXPECT_NEAR(kappa0(two, x0), h, 1e-15);
  EXPECT_NEAR(call_price(two, x0), put_price(two, x0), 1e-15);
}

TEST(TargetLaw, InverseBesselMean) {
  const TargetLaw law = inverse_bessel_law();
  EXPECT_NEAR(mean(law), 1.0 - std::exp(-1.0), 1e-6);
  // Quadrature oracle on the analytic density.
  auto f = [](double x) { return x * bessel::density(x); };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double m = GK::integrate(f, 0.0, 1.0, 15, 1e-13) + GK::integrate(f, 1.0, kInf, 15, 1e-13);
  EXPECT_NEAR(m, 1.0 - std::exp(-1.0), 1e-10);
  const double total = GK::integrate(bessel::density, 0.0, 1.0, 15, 1e-13) +
                       GK::integrate(bessel::density, 1.0, kInf, 15, 1e-13);
  EXPECT_NEAR(total, 1.0, 1e-10);
  for (double x : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    EXPECT_NEAR(put_price(law, x), bessel::put(x), 1e-7) << x;
    EXPECT_NEAR(call_price(law, x), bessel::call(x), 1e-7) << x;
  }
  EXPECT_NEAR(put_price(law, 1.0), 1.0 / bessel::wronskian(), 1e-7);
  EXPECT_TRUE(law.discretized());
}

TEST(TargetLaw, CallMatchesQuadratureOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const TargetLaw law = gen::random_law(rng);
    for (int i = 0; i < 20; ++i) {
      const double x = rng.uniform();
      EXPECT_NEAR(call_price(law, x), call_by_quadrature(law, x), 1e-13);
      EXPECT_NEAR(potential(law, x), potential_by_sum(law, x), 1e-13);
    }
  }
}

TEST(TargetLaw, ProfileInvariants) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const TargetLaw law = gen::random_law(rng);
    const PotentialProfile c = call_price(law), p = put_price(law), u = potential(law);
    const double xbar = mean(law);
    double prev_c = kInf, prev_p = -kInf;
    for (int i = 0; i <= 400; ++i) {
      const double x = i / 400.0;
      EXPECT_NEAR(c(x), call_price(law, x), 1e-13);
      EXPECT_NEAR(p(x), put_price(law, x), 1e-13);
      EXPECT_NEAR(u(x), c(x) + p(x), 1e-12);
      EXPECT_NEAR(c(x) - p(x), xbar - x, 1e-12);
      EXPECT_LE(c(x), prev_c + 1e-15);
      EXPECT_GE(p(x), prev_p - 1e-15);
      prev_c = c(x);
      prev_p = p(x);
      if (i > 0 && i < 400) {
        const double h = 1.0 / 400.0;
        EXPECT_GE(call_price(law, x + h) - 2 * c(x) + call_price(law, x - h), -1e-13);
        EXPECT_GE(put_price(law, x + h) - 2 * p(x) + put_price(law, x - h), -1e-13);
      }
    }
    EXPECT_EQ(c(1.0), 0.0);
    EXPECT_EQ(p(0.0), 0.0);
  }
}

TEST(TargetLaw, VFormsAgreeOnGeneratedLaws) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const TargetLaw law = gen::random_law(rng);
    const double x0 = 0.05 + 0.9 * rng.uniform();
    for (int i = 0; i < 200; ++i) {
      const double x = rng.uniform();
      EXPECT_NEAR(v_mu(law, x0, x), v_mu_kernel(law, x0, x), 1e-12);
    }
  }
}

TEST(TargetLaw, Kappa0IsSupOfV) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const TargetLaw law = gen::random_law(rng);
    const double x0 = 0.05 + 0.9 * rng.uniform();
    const double k = kappa0(law, x0);
    EXPECT_GE(k, 0.0);
    double sup = 0.0;
    for (int i = 0; i <= 20000; ++i) sup = std::max(sup, v_mu(law, x0, i / 20000.0));
    EXPECT_NEAR(sup, k, 1e-10);
    EXPECT_NEAR(k, std::max(2 * call_price(law, x0), 2 * put_price(law, x0)), 1e-15);
  }
}

TEST(TargetLaw, QuantileInvertsCdf) {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const TargetLaw law = gen::random_law(rng);
    for (int i = 0; i < 100; ++i) {
      const double u = rng.uniform();
      const double q = law.quantile(u);
      EXPECT_GE(law.cdf(q), u - 1e-12);
      EXPECT_LE(law.cdf_left(q), u + 1e-12);
    }
  }
}

TEST(TargetLaw, Sampling) {
  Rng rng(16);
  const TargetLaw law = jump3_law();
  const int n = 1000000;
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const double x = sample(law, rng);
    counts[x == 0.0 ? 0 : x == 0.5 ? 1 : 2]++;
  }
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 1.0 / 3.0, 0.002);

  const TargetLaw uni(0.0, 1.0, {}, {DensityPiece{{{0.0, 1.0}, {1.0, 1.0}}}});
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sample(uni, rng);
  EXPECT_NEAR(s / n, 0.5, 0.002);

  const TargetLaw delta(-1.0, 1.0, {{0.25, 1.0}}, {});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample(delta, rng), 0.25);
}

TEST(TargetLaw, Errors) {
  const TargetLaw law = jump3_law();
  EXPECT_THROW(call_price(law, 1.5), DomainError);
  EXPECT_THROW(put_price(law, -0.1), DomainError);
  EXPECT_THROW(v_mu(law, 0.0, 0.5), DomainError);
  EXPECT_THROW(TargetLaw(0.0, 1.0, {{0.5, 0.9}}, {}), InputError);
  EXPECT_THROW(TargetLaw(0.0, 1.0, {{1.5, 1.0}}, {}), InputError);
  EXPECT_THROW(TargetLaw(0.0, 1.0, {{0.5, 0.5}, {0.5, 0.5}}, {}), InputError);
  EXPECT_THROW(TargetLaw(0.0, 1.0, {},
                         {DensityPiece{{{0.0, 1.0}, {0.6, 1.0}}}, DensityPiece{{{0.5, 1.0}, {0.9, 1.0}}}}),
               InputError);
  EXPECT_THROW(TargetLaw(0.0, 1.0, {}, {DensityPiece{{{0.0, -1.0}, {1.0, 3.0}}}}), InputError);
  EXPECT_THROW(TargetLaw(1.0, 0.0, {{0.5, 1.0}}, {}), InputError);
}

TEST(TargetLaw, RenormalisesWithinTolerance) {
  const TargetLaw law(0.0, 1.0, {{0.2, 0.5 + 1e-10}, {0.8, 0.5}}, {});
  double total = 0.0;
  for (const Atom& a : law.atoms()) total += a.mass;
  EXPECT_NEAR(total, 1.0, 1e-15);
}
