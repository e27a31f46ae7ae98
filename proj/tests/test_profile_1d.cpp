#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "sonic/profile_1d.hpp"

using namespace sonic;

namespace {

GasParams canonical() { return GasParams(3.0, 1.0 / 3.0, 1.0, 0.5); }

constexpr double kUStarCanonical = 2.77406566349048132;

InletData acc_inlet(const GasParams& p, double u0) {
  return {u0, critical_E(p, u0, Branch::accelerating)};
}
InletData dec_inlet(const GasParams& p, double u0) {
  return {u0, critical_E(p, u0, Branch::decelerating)};
}

// Oracle: H in long double from its own antiderivative, and |dx/du| on the critical branch.
struct Oracle {
  long double g, J, ub, us, A;
  explicit Oracle(const GasParams& p)
      : g(p.gamma()), J(p.J()), ub(p.J() / p.rho_ion()), us(0), A(0) {
    us = std::pow(static_cast<long double>(p.gamma() * p.S0()) * std::pow((long double)J, g - 1),
                  1 / (g + 1));
    A = std::pow(us, g + 1);
  }
  long double F(long double t) const {
    return ub * t - t * t / 2 + A * ub * std::pow(t, -g) / g - A * std::pow(t, 1 - g) / (g - 1);
  }
  long double H(long double u) const {
    if (std::abs(u - us) < 0.05L * us) {
      // Local quadrature of H' avoids the cancellation in F(u) - F(us).
      auto dH = [&](long double t) { return (1 - std::pow(us / t, g + 1)) * (ub - t); };
      return J / ub *
             boost::math::quadrature::gauss_kronrod<long double, 31>::integrate(dH, us, u, 0, 0.0L);
    }
    return J / ub * (F(u) - F(us));
  }
  // u^g H(u), arranged to stay finite as u -> 0.
  long double G(long double u) const {
    const long double ug = std::pow(u, g);
    return J / ub * (ub * ug * u - ug * u * u / 2 + A * ub / g - A * u / (g - 1) - ug * F(us));
  }
  long double dxdu_abs(long double u) const {
    return std::abs(std::pow(u, g + 1) - A) / (std::sqrt(2 * H(u)) * std::pow(u, g));
  }
};

double oracle_ls(const GasParams& p, double u0) {
  Oracle o(p);
  auto f = [&](double u) { return static_cast<double>(o.dxdu_abs(u)); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, std::min(u0, (double)o.us),
                                                                       std::max(u0, (double)o.us), 15,
                                                                       1e-13);
}

// Accelerating l_max: the part beyond u_s in w = sqrt(u* - u), with H re-based at u* so the
// square-root endpoint stays resolved.
double oracle_lmax_canonical(double u0) {
  const auto p = canonical();
  Oracle o(p);
  const long double ustar = kUStarCanonical;
  auto part2 = [&](double w) {
    const long double u = ustar - (long double)w * w;
    const long double H = o.H(u) - o.H(ustar);
    return static_cast<double>(2 * w * (std::pow(u, o.g + 1) - o.A) /
                               (std::sqrt(2 * H) * std::pow(u, o.g)));
  };
  const double W = std::sqrt(kUStarCanonical - 1.0);
  return oracle_ls(p, u0) +
         boost::math::quadrature::gauss_kronrod<double, 61>::integrate(part2, 0.0, W, 15, 1e-13);
}

// Decelerating x-extent for gamma < 2: integral in s = ln(u_s/u) up to S plus the leading-order
// tail sqrt(A g / (2 J)) eps^(1-g/2)/(1-g/2), eps = u_s e^-S.
double oracle_dec_extent(const GasParams& p, double u0) {
  Oracle o(p);
  const double us = static_cast<double>(o.us);
  auto dxds = [&](double s) {
    const long double u = o.us * std::exp(-(long double)s);
    return static_cast<double>(std::abs(o.A - std::pow(u, o.g + 1)) * std::pow(u, 1 - o.g / 2) /
                               std::sqrt(2 * o.G(u)));
  };
  const double S = 60.0;
  const double head = oracle_ls(p, u0);
  const double body =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(dxds, 0.0, S, 20, 1e-13);
  const double eps = us * std::exp(-S);
  const double g = p.gamma();
  const double tail = std::sqrt(static_cast<double>(o.A) * g / (2.0 * p.J())) *
                      std::pow(eps, 1.0 - g / 2.0) / (1.0 - g / 2.0);
  return head + body + tail;
}

}  // namespace

TEST(IntegrateProfile, CanonicalConservationThroughSonicPoint) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95));
  double worst = 0.0;
  for (const auto& s : prof.samples()) worst = std::max(worst, std::abs(0.5 * s.E * s.E - enthalpy_H(p, s.u)));
  EXPECT_LE(worst, 1e-8);
  EXPECT_EQ(prof.termination(), Termination::l_max);
  ASSERT_TRUE(prof.l_s().has_value());

  bool found = false;
  for (const auto& s : prof.samples()) {
    if (s.u == 1.0) {
      found = true;
      EXPECT_NEAR(1.0 / s.du_dx, 2.0 * std::sqrt(2.0), 1e-12);
      EXPECT_EQ(s.E, 0.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(IntegrateProfile, ConservationWithinTenTolerances) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  IntegratorOptions opt;
  for (int k = 0; k < 5; ++k) {
    const GasParams p(1.2 + 2.0 * d(rng), 0.3 + d(rng), 0.5 + d(rng), 0.3 + 0.2 * d(rng));
    if (!(p.zeta0() > 1.1)) continue;
    const auto prof = integrate_profile(p, acc_inlet(p, (0.5 + 0.4 * d(rng)) * p.u_sonic()), {}, opt);
    const double scale = p.J() / p.u_bar() * p.u_sonic() * p.u_sonic();
    for (const auto& s : prof.samples()) {
      EXPECT_LE(std::abs(0.5 * s.E * s.E - enthalpy_H(p, s.u)), 10.0 * opt.rtol * scale);
    }
  }
}

TEST(IntegrateProfile, RejectsExactlySonicInlet) {
  const auto p = canonical();
  EXPECT_THROW(integrate_profile(p, {1.0, 0.0}), DomainError);
}

TEST(IntegrateProfile, OffCriticalDataCannotCross) {
  const auto p = canonical();
  const auto in = acc_inlet(p, 0.95);
  try {
    integrate_profile(p, {in.u0, in.E0 - 1e-3});
    FAIL() << "expected SonicBlowup";
  } catch (const SonicBlowup& e) {
    EXPECT_NE(std::string(e.what()).find("sonic blow-up"), std::string::npos);
  }
}

TEST(IntegrateProfile, OffCriticalStopsBeforeSonicPoint) {
  const auto p = canonical();
  const auto in = acc_inlet(p, 0.95);
  const auto prof = integrate_profile(p, {in.u0, in.E0 + 1e-3}, {std::optional<double>(50.0), {}});
  EXPECT_EQ(prof.branch(), TrajectoryBranch::off_critical);
  for (const auto& s : prof.samples()) EXPECT_LT(s.u, p.u_sonic());
  EXPECT_FALSE(prof.l_s().has_value());
}

TEST(IntegrateProfile, StopRules) {
  const auto p = canonical();
  const auto in = acc_inlet(p, 0.95);
  const auto a = integrate_profile(p, in, {std::optional<double>(0.5), {}});
  EXPECT_EQ(a.termination(), Termination::x_max);
  EXPECT_NEAR(a.x_end(), 0.5, 1e-12);
  const auto b = integrate_profile(p, in, {{}, std::optional<double>(1.5)});
  EXPECT_EQ(b.termination(), Termination::u_target);
  EXPECT_NEAR(b.samples().back().u, 1.5, 1e-10);
  // Targets inside the sonic band and the terminal layer.
  const auto c = integrate_profile(p, in, {{}, std::optional<double>(1.0 + 2e-4)});
  EXPECT_EQ(c.termination(), Termination::u_target);
  EXPECT_NEAR(c.samples().back().u, 1.0 + 2e-4, 1e-14);
  const auto d = integrate_profile(p, in, {{}, std::optional<double>(2.77)});
  EXPECT_EQ(d.termination(), Termination::u_target);
  EXPECT_NEAR(d.samples().back().u, 2.77, 1e-12);
  // x_max falling inside the sonic band.
  const double ls = *integrate_profile(p, in).l_s();
  const auto e = integrate_profile(p, in, {std::optional<double>(ls + 1e-5), {}});
  EXPECT_NEAR(e.x_end(), ls + 1e-5, 1e-12);
}

TEST(LocateSonic, CanonicalAccelerating) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95));
  const double ls = locate_sonic(prof);
  EXPECT_GT(ls, 0.0);
  EXPECT_NEAR(prof.at(ls).u, 1.0, 1e-9);
  EXPECT_NEAR(ls, oracle_ls(p, 0.95), 1e-8);
  for (const auto& s : prof.samples()) {
    if (s.x1 < ls) EXPECT_LT(s.u, 1.0);
    if (s.x1 > ls) EXPECT_GT(s.u, 1.0);
  }
}

TEST(LocateSonic, TruncatedProfileHasNoCrossing) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95), {{}, std::optional<double>(0.99)});
  try {
    locate_sonic(prof);
    FAIL() << "expected NotFound";
  } catch (const NotFound& e) {
    EXPECT_NE(std::string(e.what()).find("no sonic crossing"), std::string::npos);
  }
}

TEST(LocateSonic, DeceleratingOrder) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, dec_inlet(p, 1.05));
  const double ls = locate_sonic(prof);
  EXPECT_NEAR(ls, oracle_ls(p, 1.05), 1e-8);
  for (const auto& s : prof.samples()) {
    if (s.x1 < ls) EXPECT_GT(s.u, 1.0);
    if (s.x1 > ls) EXPECT_LT(s.u, 1.0);
  }
}

TEST(LocateLmax, CanonicalAccelerating) {
  const auto p = canonical();
  const auto in = acc_inlet(p, 0.95);
  const auto rep = locate_lmax(p, in);
  EXPECT_TRUE(rep.finite);
  EXPECT_NEAR(rep.value, oracle_lmax_canonical(0.95), 1e-8);
  const auto prof = integrate_profile(p, in);
  ASSERT_TRUE(prof.l_max().has_value());
  EXPECT_NEAR(*prof.l_max(), rep.value, 1e-8);
  EXPECT_NEAR(prof.samples().back().u, kUStarCanonical, 1e-6);
  EXPECT_NEAR(prof.samples().back().E, 0.0, 1e-6);
}

TEST(LocateLmax, DeceleratingFiniteBelowTwo) {
  const GasParams p(1.5, 0.8, 1.0, 0.4);
  ASSERT_GT(p.zeta0(), 1.0);
  const double u0 = 1.05 * p.u_sonic();
  const auto rep = locate_lmax(p, dec_inlet(p, u0));
  EXPECT_TRUE(rep.finite);
  EXPECT_NEAR(rep.value, oracle_dec_extent(p, u0), 1e-6 * rep.value);
}

TEST(LocateLmax, DeceleratingInfiniteFromTwo) {
  const auto p3 = canonical();
  const auto r3 = locate_lmax(p3, dec_inlet(p3, 1.05));
  EXPECT_FALSE(r3.finite);
  EXPECT_TRUE(std::isinf(r3.value));
  EXPECT_EQ(r3.decided_by, "horizon");
  ASSERT_GE(r3.trend.size(), 2u);
  // u keeps decreasing and E keeps growing along the trend record.
  for (std::size_t i = 1; i < r3.trend.size(); ++i) {
    EXPECT_LT(r3.trend[i].log_u, r3.trend[i - 1].log_u);
    EXPECT_GT(r3.trend[i].log_E, r3.trend[i - 1].log_E);
  }
  const GasParams p2(2.0, 0.5, 1.0, 0.5);
  const auto r2 = locate_lmax(p2, dec_inlet(p2, 1.05 * p2.u_sonic()));
  EXPECT_FALSE(r2.finite);
}

TEST(LocateLmax, TrendRateMatchesExponent) {
  for (double g : {1.3, 1.5, 1.8}) {
    const GasParams p(g, 1.0 / g, 1.0, 0.5);
    const auto r = locate_lmax(p, dec_inlet(p, 1.05 * p.u_sonic()));
    ASSERT_TRUE(r.finite);
    EXPECT_NEAR(r.trend.back().kappa, 1.0 - g / 2.0, 1e-6);
  }
}

TEST(LocateLmax, RequiresCriticalInlet) {
  const auto p = canonical();
  EXPECT_THROW(locate_lmax(p, {0.95, 0.0}), ConfigurationError);
}

TEST(ReconstructFields, DirectFormulas) {
  const auto p = canonical();
  std::vector<ProfileSample> s(2);
  s[0] = {0.0, 2.0, 0.1, 0.0, 0.0};
  s[1] = {1.0, 2.0, 0.1, 0.0, 0.0};
  const Profile1D raw(p, {2.0, 0.1}, TrajectoryBranch::off_critical, s, Termination::x_max, {}, {});
  const auto prof = reconstruct_fields(p, raw);
  EXPECT_DOUBLE_EQ(prof.samples()[0].rho, 0.5);
  EXPECT_DOUBLE_EQ(prof.samples()[0].p, 1.0 / 24.0);
  const double Phi0 = 0.5 * 4.0 + (3.0 * (1.0 / 3.0) / 2.0) * std::pow(0.5, 2.0);
  EXPECT_DOUBLE_EQ(prof.samples()[0].Phi, Phi0);
  EXPECT_DOUBLE_EQ(prof.samples()[0].phi_bar, 0.0);
  EXPECT_DOUBLE_EQ(prof.samples()[1].phi_bar, 2.0);
}

TEST(ReconstructFields, BernoulliAndPotentials) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95));
  const auto& s = prof.samples();
  EXPECT_EQ(s.front().phi_bar, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_LE(std::abs(bernoulli_defect(p, s[i])), 1e-6);
    EXPECT_DOUBLE_EQ(s[i].rho, p.J() / s[i].u);
    EXPECT_NEAR(s[i].p, p.S0() * std::pow(s[i].rho, p.gamma()), 1e-15);
    if (i > 0) {
      EXPECT_GT(s[i].x1, s[i - 1].x1);
      EXPECT_GE(s[i].phi_bar, s[i - 1].phi_bar);
    }
  }
  // Phi' = E by central differences of the interpolated potential.
  const double h = 1e-4;
  for (double x = 0.2; x < prof.x_end() - 0.2; x += 0.37) {
    const double d = (prof.at(x + h).Phi - prof.at(x - h).Phi) / (2.0 * h);
    EXPECT_NEAR(d, prof.at(x).E, 1e-6) << x;
  }
}

TEST(KZ, CoefficientExamples) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95));
  for (const auto& s : prof.samples()) {
    if (std::abs(s.u - 2.0) < 0.05) {
      const auto c = kz_coefficients(p, prof, s.x1);
      EXPECT_NEAR(c.alpha11, 1.0 - std::pow(s.u, 4.0), 1e-12);
    }
  }
  const auto at2 = integrate_profile(p, acc_inlet(p, 0.95), {{}, std::optional<double>(2.0)});
  EXPECT_NEAR(kz_coefficients(p, at2, at2.x_end()).alpha11, -15.0, 1e-9);

  const double ls = *prof.l_s();
  const auto c = kz_coefficients(p, prof, ls);
  EXPECT_EQ(c.alpha11, 0.0);
  const double up = 1.0 / (2.0 * std::sqrt(2.0));
  for (int m = 0; m < 4; ++m) {
    EXPECT_NEAR(kz_quantity(p, m, 1.0, up), 4.0 * (2 * m + 1) * up, 1e-14);
    EXPECT_NEAR(kz_quantity_direct(p, prof, m, prof.at(ls)), 4.0 * (2 * m + 1) * up, 1e-7);
  }
  EXPECT_THROW(kz_coefficients(p, prof, prof.x_end() + 1.0), DomainError);
}

TEST(KZ, AlphaChangesSignOnceAtSonicPoint) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95));
  int changes = 0;
  double prev = 0.0;
  for (const auto& s : prof.samples()) {
    const double a = kz_coefficients(p, prof, s.x1).alpha11;
    if (s.u < 1.0) EXPECT_GT(a, 0.0);
    if (s.u > 1.0) EXPECT_LT(a, 0.0);
    if (prev != 0.0 && a != 0.0 && (a > 0.0) != (prev > 0.0)) ++changes;
    if (a != 0.0) prev = a;
  }
  EXPECT_EQ(changes, 1);
}

TEST(KZ, DichotomyAndRepresentation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  int done = 0;
  while (done < 6) {
    const GasParams p(1.2 + 2.5 * d(rng), 0.3 + d(rng), 0.5 + d(rng), 0.3 + 0.2 * d(rng));
    if (!(p.zeta0() > 1.1)) continue;
    const auto acc = integrate_profile(p, acc_inlet(p, (0.6 + 0.35 * d(rng)) * p.u_sonic()));
    const auto cut = truncate_profile(p, acc, 0.5 * (*acc.l_s() + *acc.l_max()));
    const auto ka = kz_check(p, cut);
    EXPECT_TRUE(ka.holds);
    EXPECT_GT(ka.lambda_L, 0.0);
    EXPECT_LE(ka.max_rel_discrepancy, 1e-6);

    const double ustar = find_u_star(p);
    const double u0 = p.u_sonic() + (0.1 + 0.8 * d(rng)) * (ustar - p.u_sonic());
    const auto dec = integrate_profile(p, dec_inlet(p, u0));
    const auto kd = kz_check(p, dec);
    EXPECT_FALSE(kd.holds);
    for (double q : kd.q_min) EXPECT_LT(q, 0.0);
    for (const auto& s : dec.samples()) {
      for (int m = 0; m < 4; ++m) EXPECT_LT(kz_quantity(p, m, s.u, profile_slope(dec, s.u, s.E)), 0.0);
    }
    EXPECT_LE(kd.max_rel_discrepancy, 1e-6);
    ++done;
  }
}

TEST(KZ, FullAcceleratingProfileDegeneratesAtTerminalPoint) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95));
  const auto r = kz_check(p, prof);
  EXPECT_EQ(r.lambda_L, 0.0);
  EXPECT_FALSE(r.holds);
}

TEST(PotentialOde, CanonicalResidual) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95));
  EXPECT_LE(potential_ode_residual(p, prof), 1e-8);
}

TEST(PotentialOde, ResidualVanishesAtSonicSample) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95));
  const auto& s = prof.samples();
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i].u != 1.0) continue;
    std::vector<ProfileSample> three(s.begin() + i - 1, s.begin() + i + 2);
    const Profile1D local(p, {three[0].u, three[0].E}, prof.branch(), three, Termination::x_max, {}, {});
    const auto filled = reconstruct_fields(p, local);
    EXPECT_LE(potential_ode_residual(p, filled), 1e-14);
  }
}

TEST(PotentialOde, CorruptedPotentialIsDetected) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95));
  auto s = prof.samples();
  for (auto& smp : s) smp.phi_bar *= 1.2;
  EXPECT_GT(potential_ode_residual(p, prof.with_samples(s)), 1e-2);
}

TEST(VerifyLemma, CanonicalAccelerating) {
  const auto p = canonical();
  const auto rep = verify_lemma(p, acc_inlet(p, 0.95));
  for (const auto& c : rep.claims) EXPECT_TRUE(c.passed) << c.id << " " << c.detail;
  EXPECT_EQ(rep.claims.size(), 5u);
}

TEST(VerifyLemma, DeceleratingGammaThree) {
  const auto p = canonical();
  const auto rep = verify_lemma(p, dec_inlet(p, 1.05));
  EXPECT_TRUE(rep.all_passed());
  ASSERT_TRUE(rep.lmax.has_value());
  EXPECT_FALSE(rep.lmax->finite);
}

TEST(VerifyLemma, OffCriticalFailsCoverage) {
  const auto p = canonical();
  const auto in = acc_inlet(p, 0.95);
  for (double dE : {1e-3, -1e-3}) {
    const auto rep = verify_lemma(p, {in.u0, in.E0 + dE});
    ASSERT_NE(rep.find("coverage"), nullptr);
    EXPECT_FALSE(rep.find("coverage")->passed);
    EXPECT_FALSE(rep.all_passed());
  }
}

TEST(VerifyLemma, RandomAcceleratingInlets) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  int done = 0;
  while (done < 8) {
    const GasParams p(1.1 + 2.5 * d(rng), 0.2 + d(rng), 0.3 + 1.5 * d(rng), 0.2 + 0.4 * d(rng));
    if (!(p.zeta0() > 1.05)) continue;
    const auto rep = verify_lemma(p, acc_inlet(p, (0.2 + 0.79 * d(rng)) * p.u_sonic()));
    for (const auto& c : rep.claims) EXPECT_TRUE(c.passed) << c.id << " " << c.detail;
    ++done;
  }
}

TEST(VerifyLemma, RejectsWrongSide) {
  const auto p = canonical();
  EXPECT_THROW(verify_lemma(p, acc_inlet(p, 1.5)), ConfigurationError);
}

TEST(Invariants, MonotoneAndContinuouslyDifferentiableAcrossSonic) {
  const auto p = canonical();
  for (const auto& in : {acc_inlet(p, 0.95), dec_inlet(p, 1.05)}) {
    const auto prof = integrate_profile(p, in);
    const double dir = in.u0 < 1.0 ? 1.0 : -1.0;
    const auto& s = prof.samples();
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(dir * (s[i].u - s[i - 1].u), 0.0);
    const double ls = *prof.l_s();
    const double ul = prof.at(ls).u;
    for (double h : {1e-3, 1e-4}) {
      const double left = (ul - prof.at(ls - h).u) / h;
      const double right = (prof.at(ls + h).u - ul) / h;
      EXPECT_LE(std::abs(left - right), 10.0 * h) << h;
    }
  }
}

TEST(Invariants, RefinementConvergence) {
  // Global error of a locally controlled integrator is a small multiple of rtol, so the
  // allowance is ten tolerances relative to max(1, |l|).
  const auto p = canonical();
  const auto in = acc_inlet(p, 0.95);
  for (double rtol : {1e-8, 1e-10}) {
    IntegratorOptions coarse;
    coarse.rtol = rtol;
    coarse.atol = rtol / 100.0;
    IntegratorOptions fine = coarse;
    fine.rtol *= 0.5;
    fine.atol *= 0.5;
    const auto a = integrate_profile(p, in, {}, coarse);
    const auto b = integrate_profile(p, in, {}, fine);
    EXPECT_LT(std::abs(*a.l_s() - *b.l_s()), 10.0 * rtol * std::max(1.0, *a.l_s()));
    EXPECT_LT(std::abs(*a.l_max() - *b.l_max()), 10.0 * rtol * std::max(1.0, *a.l_max()));
  }
}

TEST(Profile1D, ConcurrentRunsAgree) {
  const auto p = canonical();
  const auto in = acc_inlet(p, 0.9);
  std::vector<std::string> out(4);
  std::vector<std::thread> pool;
  for (int k = 0; k < 4; ++k) {
    pool.emplace_back([&, k] {
      std::ostringstream os;
      write_profile_csv(os, integrate_profile(p, in));
      out[k] = os.str();
    });
  }
  for (auto& t : pool) t.join();
  for (int k = 1; k < 4; ++k) EXPECT_EQ(out[k], out[0]);
}

TEST(Profile1D, CsvRoundTrip) {
  const auto p = canonical();
  const auto prof = integrate_profile(p, acc_inlet(p, 0.95));
  std::ostringstream os;
  write_profile_csv(os, prof);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "x1,u,E,rho,p,Phi,phi_bar");
  const auto t = csv::parse(text);
  ASSERT_EQ(t.rows.size(), prof.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(t.rows[i][0], prof.samples()[i].x1);
    EXPECT_EQ(t.rows[i][1], prof.samples()[i].u);
    EXPECT_EQ(t.rows[i][6], prof.samples()[i].phi_bar);
  }
}
