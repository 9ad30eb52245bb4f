#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "covest/spectra.hpp"

using namespace covest;
using std::numbers::pi;

TEST(Eigenvalue, KnownValues) {
  EXPECT_NEAR(Spectrum::brownian_motion().eigenvalue(1), 4.0 / (pi * pi), 1e-15);
  EXPECT_NEAR(Spectrum::brownian_motion().eigenvalue(1), 0.4052847, 1e-7);
  EXPECT_NEAR(Spectrum::brownian_bridge().eigenvalue(1), 0.1013212, 1e-7);
  const double fbm = Spectrum::fractional_bm(0.5).eigenvalue(10);
  EXPECT_NEAR(fbm / std::pow(10 * pi, -2.0), 1.0, 1e-14);
}

TEST(Eigenvalue, RejectsIndexZero) {
  EXPECT_THROW(Spectrum::brownian_motion().eigenvalue(0), ValidationError);
}

TEST(Spectrum, FbmRegimeFlag) {
  EXPECT_THROW(Spectrum::fractional_bm(0.2), ValidationError);
  EXPECT_TRUE(Spectrum::fractional_bm(0.2, true).unvalidated_regime());
  EXPECT_FALSE(Spectrum::fractional_bm(0.7).unvalidated_regime());
  EXPECT_THROW(Spectrum::fractional_bm(1.0, true), ValidationError);
}

TEST(Spectrum, ParseRoundTrip) {
  for (const char* s : {"bm", "bb", "ou:0.5", "fbm:0.7", "ibm:1", "power:1,2"})
    EXPECT_EQ(Spectrum::parse(s).name(), Spectrum::parse(Spectrum::parse(s).name()).name());
  EXPECT_THROW(Spectrum::parse("levy"), ValidationError);
  EXPECT_THROW(Spectrum::parse("fbm:x"), ValidationError);
}

TEST(BalanceIndex, BrownianMotion) {
  EXPECT_NEAR(balance_index(Spectrum::brownian_motion(), 1e4), 100.0 / pi + 0.5, 1e-9);
  EXPECT_NEAR(balance_index(Spectrum::brownian_motion(), 1e4), 32.3310, 1e-4);
}

TEST(BalanceIndex, PowerLaw) {
  EXPECT_NEAR(balance_index(Spectrum::power_law(1.0, 2.0), 1e6), 1000.0, 1e-9);
}

TEST(BalanceIndex, FbmBisectionMatchesClosedForm) {
  const Spectrum s = Spectrum::fractional_bm(0.75);
  const double ch = std::sin(0.75 * pi) * std::tgamma(2.5) / std::pow(pi, 2.5);
  const double closed = std::pow(ch * 1e5, 1.0 / 2.5);
  EXPECT_NEAR(balance_index_bisection(s, 1e5) / closed, 1.0, 1e-9);
  EXPECT_NEAR(balance_index(s, 1e5) / closed, 1.0, 1e-12);
}

TEST(BalanceIndex, SolvesDefiningEquation) {
  for (const char* name : {"bm", "bb", "ou:2", "fbm:0.3", "ibm:2", "power:3,1.5"}) {
    const Spectrum s = Spectrum::parse(name);
    for (double n : {1e3, 1e6, 1e9}) EXPECT_NEAR(s(balance_index(s, n)) * n, 1.0, 1e-9) << name << " n=" << n;
  }
}

TEST(Rate, BrownianMotion) {
  const RateInfo r = rate_and_zeta(Spectrum::brownian_motion(), 1e6);
  EXPECT_NEAR(r.r_n, std::pow(1e6, -0.25), 1e-15);
  EXPECT_NEAR(r.zeta_limit, 1.0 / pi, 1e-15);
  ASSERT_EQ(r.convergence.size(), 3u);
  EXPECT_LT(std::abs(rate_and_zeta(Spectrum::brownian_motion(), 1e8).zeta - 1.0 / pi), 1e-4);
  // zeta(n) approaches the limit monotonically along n, 10n, 100n
  EXPECT_GT(std::abs(r.convergence[0].zeta - 1.0 / pi), std::abs(r.convergence[2].zeta - 1.0 / pi));
}

TEST(Rate, PowerLawZetaExact) {
  for (double n : {10.0, 1e4, 1e7}) EXPECT_NEAR(rate_and_zeta(Spectrum::power_law(1.0, 2.0), n).zeta, 1.0, 1e-12);
}

TEST(Rate, IntegratedBm) {
  EXPECT_NEAR(rate_and_zeta(Spectrum::integrated_bm(1), 1e8).r_n, std::pow(1e8, -1.0 / 8.0), 1e-15);
}

TEST(RegularVariation, BrownianMotion) {
  const RegVarReport rep = check_regular_variation(Spectrum::brownian_motion(), {0.5, 2.0, 5.0}, 1e6, 1e-3);
  EXPECT_TRUE(rep.all_pass());
  EXPECT_NEAR(rep.checks[1].ratio, 0.25, 1e-3);
  EXPECT_NEAR(rep.checks[1].ratio_squared, std::pow(2.0, -4.0), 1e-3);
}

TEST(RegularVariation, PurePowerLawExact) {
  const Spectrum s = Spectrum::power_law(2.5, 3.0);
  const RegVarReport rep = check_regular_variation(s, {0.5, 2.0, 3.0}, 1000.0, 1e-12);
  for (const auto& c : rep.checks) EXPECT_NEAR(c.ratio / c.expected, 1.0, 1e-13);
}

TEST(RegularVariation, AllBuiltins) {
  for (const char* name : {"bb", "ou", "fbm:0.6", "ibm:1"})
    EXPECT_TRUE(check_regular_variation(Spectrum::parse(name), {0.5, 2.0, 5.0}, 1e6, 1e-3).all_pass()) << name;
}

TEST(Spectrum, BmBbRatioBound) {
  const Spectrum bm = Spectrum::brownian_motion();
  const Spectrum bb = Spectrum::brownian_bridge();
  // p = 1 has ratio 4, so the bound is asserted from p = 2 on.
  for (long long p = 2; p <= 100000; p = p * 3 / 2 + 1)
    EXPECT_LT(std::abs(bm.eigenvalue(p) / bb.eigenvalue(p) - 1.0), 2.0 / static_cast<double>(p)) << p;
}

TEST(Spectrum, TabulatedMonotoneAndTail) {
  const Spectrum t = Spectrum::tabulated({1.0, 0.5, 0.2}, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(t.eigenvalue(2), 0.5);
  EXPECT_DOUBLE_EQ(t.eigenvalue(10), 0.01);
  for (double p = 1.0; p < 8.0; p += 0.25) EXPECT_GE(t(p), t(p + 0.25));
  EXPECT_THROW(Spectrum::tabulated({1.0, 2.0}, 1.0, 2.0), ValidationError);
}
