#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "mindiff/error.hpp"
#include "mindiff/presets.hpp"
#include "mindiff/verify.hpp"

using namespace mindiff;

namespace {

// W1 through the quantile coupling: int_0^1 |F_n^{-1}(u) - F^{-1}(u)| du, midpoint rule.
double w1_by_quantiles(const EmpiricalLaw& e, const TargetLaw& law, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = (i + 0.5) / n;
    const std::size_t k = std::min(e.values.size() - 1, static_cast<std::size_t>(u * static_cast<double>(e.values.size())));
    s += std::abs(e.values[k] - law.quantile(u));
  }
  return s / n;
}

double ks_by_scan(const EmpiricalLaw& e, const TargetLaw& law, double lo, double hi, int n) {
  double d = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    d = std::max(d, std::abs(e.cdf(x) - law.cdf(x)));
  }
  return d;
}

}  // namespace

TEST(Verify, TrivialDistances) {
  const TargetLaw d0(0.0, 1.0, {{0.0, 1.0}}, {});
  const TargetLaw d1(0.0, 1.0, {{1.0, 1.0}}, {});
  const EmpiricalLaw at0 = EmpiricalLaw::from_values(std::vector<double>(100, 0.0));
  EXPECT_EQ(ks_distance(at0, d0), 0.0);
  EXPECT_EQ(wasserstein1(at0, d0), 0.0);
  EXPECT_EQ(ks_distance(at0, d1), 1.0);
  EXPECT_NEAR(wasserstein1(at0, d1), 1.0, 1e-15);
  const TargetLaw c(0.0, 1.0, {{0.3, 1.0}}, {});
  EXPECT_EQ(ks_distance(EmpiricalLaw::from_values({0.3, 0.3, 0.3}), c), 0.0);
}

TEST(Verify, SampleFromLawPassesKs) {
  Rng rng(31);
  for (const TargetLaw& law : {jump3_law(), gen::random_law(rng), gen::random_law(rng)}) {
    std::vector<double> v;
    const int n = 100000;
    for (int i = 0; i < n; ++i) v.push_back(sample(law, rng));
    const EmpiricalLaw e = EmpiricalLaw::from_values(std::move(v));
    EXPECT_LT(ks_distance(e, law), 2 * 1.36 / std::sqrt(n));
    EXPECT_LT(wasserstein1(e, law), 0.01);
  }
}

TEST(Verify, DistancesMatchIndependentRoutes) {
  Rng rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const TargetLaw law = gen::random_law(rng);
    std::vector<double> v;
    for (int i = 0; i < 50; ++i) v.push_back(std::round(rng.uniform() * 40) / 40);
    const EmpiricalLaw e = EmpiricalLaw::from_values(v);
    EXPECT_NEAR(wasserstein1(e, law), w1_by_quantiles(e, law, 200000), 2e-5);
    const double scan = ks_by_scan(e, law, -0.5, 1.5, 200000);
    const double ks = ks_distance(e, law);
    EXPECT_GE(ks + 1e-12, scan);
    EXPECT_LT(ks - scan, 1e-3);
  }
}

TEST(Verify, WassersteinOnUnboundedSupport) {
  const TargetLaw law = inverse_bessel_law();
  const EmpiricalLaw e = EmpiricalLaw::from_values({1.0});
  // W1(delta_1, mu) = E|X - 1| = potential at 1.
  EXPECT_NEAR(wasserstein1(e, law), potential(law, 1.0), 1e-9);
}

TEST(Verify, KolmogorovSurvival) {
  EXPECT_NEAR(kolmogorov_survival(1.36), 0.0494, 1e-4);
  EXPECT_NEAR(kolmogorov_survival(1.0), 0.26999967, 1e-7);
  EXPECT_NEAR(kolmogorov_survival(0.5), 0.96394524, 1e-7);
  EXPECT_NEAR(kolmogorov_survival(1.628), 0.01, 2e-4);
  EXPECT_EQ(kolmogorov_survival(0.0), 1.0);
  // The two series agree where they meet.
  EXPECT_NEAR(kolmogorov_survival(1.0 - 1e-12), kolmogorov_survival(1.0), 1e-10);
  double prev = 1.0;
  for (int i = 1; i <= 300; ++i) {
    const double q = kolmogorov_survival(i / 100.0);
    EXPECT_LE(q, prev + 1e-15);
    prev = q;
  }
}

TEST(Verify, TwoSampleKs) {
  Rng rng(33);
  std::vector<double> a, b;
  for (int i = 0; i < 20000; ++i) {
    a.push_back(rng.uniform());
    b.push_back(rng.uniform());
  }
  const EmpiricalLaw ea = EmpiricalLaw::from_values(a), eb = EmpiricalLaw::from_values(b);
  const TwoSampleTest same = ks_two_sample(ea, ea);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
  EXPECT_GT(ks_two_sample(ea, eb).p_value, 0.001);
  std::vector<double> shifted;
  for (double x : b) shifted.push_back(x + 2.0);
  const TwoSampleTest far = ks_two_sample(ea, EmpiricalLaw::from_values(shifted));
  EXPECT_EQ(far.statistic, 1.0);
  EXPECT_LT(far.p_value, 1e-12);
}

TEST(Verify, ExcessiveCensoringIsRejected) {
  const EmpiricalLaw e = EmpiricalLaw::from_values(std::vector<double>(98, 0.5), 2);
  EXPECT_THROW(ks_distance(e, jump3_law()), VerificationError);
  EXPECT_THROW(wasserstein1(e, jump3_law()), VerificationError);
  EXPECT_NO_THROW(ks_distance(EmpiricalLaw::from_values(std::vector<double>(1000, 0.5), 2), jump3_law()));
}

TEST(Verify, LocalTimeProfile) {
  const double x0 = 0.5, h = 0.2;
  const TargetLaw law(0.0, 1.0, {{x0 - h, 0.5}, {x0 + h, 0.5}}, {});
  WalkConfig cfg;
  cfg.paths = 20000;
  cfg.seed = 34;
  cfg.delta = 0.01;
  cfg.probes = {x0, 0.4, 0.65};
  const Batch b = run_blj(law, x0, h, 1.0, cfg);
  const auto prof = local_time_profile(b, cfg.probes, 2.58);
  ASSERT_EQ(prof.size(), 3u);
  for (const ProbeEstimate& p : prof) EXPECT_TRUE(p.covers(h - v_mu(law, x0, p.x))) << p.x << " " << p.mean;
  EXPECT_THROW(local_time_profile(b, {x0}), InputError);
  WalkConfig small = cfg;
  small.paths = 100;
  EXPECT_THROW(local_time_profile(run_blj(law, x0, h, 1.0, small), cfg.probes), PreconditionError);
}

TEST(Verify, MinimalitySuiteOnJump3) {
  WalkConfig cfg;
  cfg.paths = 100000;
  cfg.seed = 35;
  const TargetLaw law = jump3_law();
  const MinimalityReport r = minimality_suite(law, 0.5, 1.0, {1.0 / 3.0, 0.4, 0.5}, cfg);
  for (const Check& c : r.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.statistic << " vs " << c.expected;
  EXPECT_TRUE(r.pass());
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_NEAR(r.rows[0].mean, 1.0 / 3.0, 0.01);
  EXPECT_THROW(minimality_suite(law, 0.5, 1.0, {0.4, 0.5, 0.6}, cfg), PreconditionError);
  EXPECT_THROW(minimality_suite(law, 0.5, 1.0, {1.0 / 3.0, 0.5}, cfg), PreconditionError);
}

TEST(Verify, MinimalitySuiteTwoAtoms) {
  WalkConfig cfg;
  cfg.paths = 20000;
  cfg.seed = 36;
  cfg.delta = 0.01;
  const double h = 0.2;
  const TargetLaw law(0.0, 1.0, {{0.3, 0.5}, {0.7, 0.5}}, {});
  const MinimalityReport r = minimality_suite(law, 0.5, 1.0, {h, 0.3, 0.5}, cfg, 0.05);
  EXPECT_TRUE(r.pass());
  EXPECT_NEAR(r.rows[0].mean, h, 0.05 * h);
}
