#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "sonic/phase_plane.hpp"

using namespace sonic;

namespace {

GasParams canonical() { return GasParams(3.0, 1.0 / 3.0, 1.0, 0.5); }

// Independent oracle: adaptive Gauss-Kronrod on the defining integral.
double H_quadrature(const GasParams& p, double u) {
  const double us = p.u_sonic();
  auto integrand = [&](double t) {
    return std::pow(t, -(p.gamma() + 1.0)) * (std::pow(t, p.gamma() + 1.0) - p.us_pow()) *
           (p.u_bar() - t);
  };
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, us, u, 12, 1e-13, &err);
  return (p.J() / p.u_bar()) * v;
}

// Root of H above u_bar computed with mpmath (30 digits) from the closed-form antiderivative.
constexpr double kUStarCanonical = 2.77406566349048132;

}  // namespace

TEST(GasParams, DerivedQuantities) {
  const auto p = canonical();
  EXPECT_NEAR(p.u_sonic(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.u_bar(), 2.0);
  EXPECT_DOUBLE_EQ(p.zeta0(), p.u_bar() / p.u_sonic());
}

TEST(GasParams, RejectsInvalidConstants) {
  EXPECT_THROW(GasParams(1.0, 1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(GasParams(0.9, 1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(GasParams(2.0, 0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(GasParams(2.0, 1.0, -1.0, 1.0), DomainError);
  EXPECT_THROW(GasParams(2.0, 1.0, 1.0, 0.0), DomainError);
  try {
    GasParams(0.9, 1.0, 1.0, 1.0);
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma > 1"), std::string::npos);
  }
}

TEST(Enthalpy, CanonicalValues) {
  const auto p = canonical();
  EXPECT_EQ(enthalpy_H(p, 1.0), 0.0);
  EXPECT_NEAR(enthalpy_H(p, 2.0), 7.0 / 48.0, 1e-15);
  EXPECT_NEAR(enthalpy_dH(p, 2.0), 0.0, 1e-15);
  EXPECT_NEAR(enthalpy_d2H_sonic(p), 2.0, 1e-14);
}

TEST(Enthalpy, RejectsNonPositiveVelocity) {
  const auto p = canonical();
  EXPECT_THROW(enthalpy_H(p, 0.0), DomainError);
  EXPECT_THROW(enthalpy_H(p, -1.0), DomainError);
}

TEST(Enthalpy, ClosedFormMatchesQuadrature) {
  for (const auto& p : {canonical(), GasParams(1.4, 0.7, 0.8, 0.3), GasParams(1.5, 1.0, 2.0, 1.0)}) {
    const double lo = std::log(0.01 * p.u_sonic());
    const double hi = std::log(10.0 * p.u_bar());
    for (int i = 0; i < 200; ++i) {
      const double u = std::exp(lo + (hi - lo) * i / 199.0);
      const double ref = H_quadrature(p, u);
      const double got = enthalpy_H(p, u);
      // Relative accuracy, except near the zeros of H where the natural scale is H' * du.
      const double scale = (p.J() / p.u_bar()) * std::max(u, p.u_sonic()) * std::max(u, p.u_sonic());
      EXPECT_LE(std::abs(got - ref), 1e-10 * std::max(std::abs(ref), 1e-4 * scale)) << "u=" << u;
    }
  }
}

TEST(Enthalpy, ContinuousAcrossLocalBand) {
  const auto p = GasParams(1.4, 0.7, 0.8, 0.3);
  const double edge = p.u_sonic() * (1.0 + 1e-2);
  const double inside = enthalpy_H(p, std::nextafter(edge, 0.0));
  const double outside = enthalpy_H(p, std::nextafter(edge, 10.0));
  EXPECT_NEAR(inside, outside, 1e-14 * p.J() / p.u_bar() * p.u_sonic() * p.u_sonic());
}

TEST(Enthalpy, DerivativeSignPattern) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double gamma = 1.05 + 3.0 * dist(rng);
    const GasParams p(gamma, 0.2 + dist(rng), 0.2 + 2.0 * dist(rng), 0.1 + 0.5 * dist(rng));
    if (!(p.zeta0() > 1.0)) continue;
    for (int k = 0; k < 40; ++k) {
      const double u = 0.01 * p.u_sonic() + dist(rng) * 5.0 * p.u_bar();
      const double d = enthalpy_dH(p, u);
      if (u < p.u_sonic()) EXPECT_LT(d, 0.0);
      else if (u < p.u_bar()) EXPECT_GT(d, 0.0);
      else if (u > p.u_bar()) EXPECT_LT(d, 0.0);
    }
  }
}

TEST(CriticalE, CanonicalValues) {
  const auto p = canonical();
  EXPECT_EQ(critical_E(p, 1.0, Branch::accelerating), 0.0);
  EXPECT_NEAR(critical_E(p, 2.0, Branch::accelerating), std::sqrt(7.0 / 24.0), 1e-15);
  EXPECT_NEAR(critical_E(p, 2.0, Branch::decelerating), -std::sqrt(7.0 / 24.0), 1e-15);
  const double e09 = critical_E(p, 0.9, Branch::accelerating);
  EXPECT_LT(e09, 0.0);
  EXPECT_NEAR(e09, -std::sqrt(2.0 * H_quadrature(p, 0.9)), 1e-13);
  EXPECT_GT(critical_E(p, 0.9, Branch::decelerating), 0.0);
}

TEST(CriticalE, RejectsNegativeEnthalpy) {
  const auto p = canonical();
  EXPECT_THROW(critical_E(p, 3.0, Branch::accelerating), ConfigurationError);
}

TEST(CriticalE, LiesOnCriticalSet) {
  const auto p = GasParams(1.7, 0.5, 1.3, 0.4);
  const double ustar = find_u_star(p);
  for (int i = 1; i < 400; ++i) {
    const double u = 0.05 * p.u_sonic() + (ustar - 0.05 * p.u_sonic()) * i / 400.0;
    for (auto b : {Branch::accelerating, Branch::decelerating}) {
      const double E = critical_E(p, u, b);
      EXPECT_NEAR(0.5 * E * E, enthalpy_H(p, u), 1e-14 * std::max(1.0, enthalpy_H(p, u)));
      EXPECT_TRUE(classify_state(p, {u, E}, 1e-12).on_critical) << u;
      EXPECT_GE((u - p.u_sonic()) * E * (b == Branch::accelerating ? 1.0 : -1.0), 0.0);
    }
  }
}

TEST(UStar, CanonicalRoot) {
  const auto p = canonical();
  const double ub = find_u_star(p, RootMethod::brent);
  const double ui = find_u_star(p, RootMethod::bisection);
  EXPECT_NEAR(ub, kUStarCanonical, 1e-10);
  EXPECT_NEAR(ub, ui, 1e-10);
  EXPECT_GT(ub, p.u_bar());
  EXPECT_LE(std::abs(enthalpy_H(p, ub)), 1e-12);
  EXPECT_LT(enthalpy_dH(p, ub), 0.0);
}

TEST(UStar, RequiresZetaAboveOne) {
  const GasParams p(2.0, 1.0, 1.0, 2.0);  // u_bar = 0.5 < u_sonic
  EXPECT_THROW(find_u_star(p), ConfigurationError);
}

TEST(UStar, RandomParametersAgree) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  int checked = 0;
  while (checked < 30) {
    const GasParams p(1.05 + 3.0 * dist(rng), 0.2 + dist(rng), 0.2 + 2.0 * dist(rng),
                      0.1 + 0.5 * dist(rng));
    if (!(p.zeta0() > 1.05)) continue;
    const double a = find_u_star(p, RootMethod::brent);
    const double b = find_u_star(p, RootMethod::bisection);
    EXPECT_NEAR(a, b, 1e-10 * a);
    EXPECT_GT(a, p.u_bar());
    ++checked;
  }
}

TEST(Classify, CanonicalExamples) {
  const auto p = canonical();
  auto c = classify_state(p, {1.0, 0.0}, 1e-10);
  EXPECT_TRUE(c.on_critical);
  EXPECT_EQ(c.regime, Regime::sonic);
  EXPECT_EQ(c.branch, TrajectoryBranch::both);

  c = classify_state(p, {2.0, std::sqrt(7.0 / 24.0)}, 1e-10);
  EXPECT_TRUE(c.on_critical);
  EXPECT_EQ(c.regime, Regime::supersonic);
  EXPECT_EQ(c.branch, TrajectoryBranch::accelerating);

  c = classify_state(p, {2.0, 0.0}, 1e-10);
  EXPECT_FALSE(c.on_critical);
  EXPECT_EQ(c.branch, TrajectoryBranch::off_critical);
  EXPECT_NEAR(c.residual, -7.0 / 48.0, 1e-15);

  c = classify_state(p, {0.9, std::sqrt(2.0 * enthalpy_H(p, 0.9))}, 1e-10);
  EXPECT_EQ(c.regime, Regime::subsonic);
  EXPECT_EQ(c.branch, TrajectoryBranch::decelerating);
}

TEST(Classify, SonicBandWidth) {
  const auto p = canonical();
  EXPECT_EQ(classify_state(p, {1.0 + 0.5e-9, 0.0}, 1e-10).regime, Regime::sonic);
  EXPECT_EQ(classify_state(p, {1.0 + 2e-9, 0.0}, 1e-10).regime, Regime::supersonic);
  EXPECT_EQ(classify_state(p, {1.0 - 2e-9, 0.0}, 1e-10).regime, Regime::subsonic);
}

TEST(DxDu, SonicLimit) {
  const auto p = canonical();
  const double lim = dxdu_critical(p, 1.0, Branch::accelerating);
  EXPECT_NEAR(lim, 4.0 / std::sqrt(2.0), 1e-15);
  // Two-sided cross-check of the removable singularity.
  for (double d : {1e-6, -1e-6}) {
    EXPECT_NEAR(dxdu_critical(p, 1.0 + d, Branch::accelerating), lim, 1e-5);
  }
  EXPECT_NEAR(dxdu_critical(p, 1.0, Branch::decelerating), -lim, 1e-15);
}
