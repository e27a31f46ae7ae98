#pragma once

// Steady potential-flow shock polar and the uniform self-similar state near a
// pseudo-sonic arc. Sound speed c^2 = rho^(gamma-1); Bernoulli
// |q|^2/2 + (rho^(gamma-1) - 1)/(gamma-1) = B0.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

#include "sonic/core/csv.hpp"
#include "sonic/core/error.hpp"
#include "sonic/core/roots.hpp"

namespace sonic {

class UpstreamState {
 public:
  UpstreamState(double gamma, double rho_inf, double q_inf) : gamma_(gamma), rho_(rho_inf), q_(q_inf) {
    if (!(gamma > 1.0) || !std::isfinite(gamma)) {
      std::ostringstream msg;
      msg << "gamma must satisfy gamma > 1 (got " << gamma << ")";
      throw DomainError(msg.str());
    }
    if (!(rho_inf > 0.0) || !std::isfinite(rho_inf)) throw DomainError("rho_inf must be positive");
    if (!(q_inf > 0.0) || !std::isfinite(q_inf)) throw DomainError("q_inf must be positive");
  }

  double gamma() const { return gamma_; }
  double rho_inf() const { return rho_; }
  double q_inf() const { return q_; }
  double B0() const { return 0.5 * q_ * q_ + (std::pow(rho_, gamma_ - 1.0) - 1.0) / (gamma_ - 1.0); }
  double sound_speed() const { return std::pow(rho_, 0.5 * (gamma_ - 1.0)); }
  bool supersonic() const { return q_ > sound_speed(); }
  /// Mach angle asin(c/q).
  double mach_angle() const { return std::asin(std::min(1.0, sound_speed() / q_)); }

 private:
  double gamma_, rho_, q_;
};

/// Density from the steady Bernoulli law at the given speed.
inline double bernoulli_density(const UpstreamState& s, double speed) {
  const double g = s.gamma();
  const double arg = 1.0 + (g - 1.0) * (s.B0() - 0.5 * speed * speed);
  if (arg < 0.0 || !std::isfinite(arg)) {
    std::ostringstream msg;
    msg << "cavitation: speed " << speed << " exceeds the limit speed " << std::sqrt(2.0 * (s.B0() + 1.0 / (g - 1.0)));
    throw DomainError(msg.str());
  }
  return std::pow(arg, 1.0 / (g - 1.0));
}

/// Downstream state behind a straight shock; sigma is the shock inclination to the upstream flow.
struct ShockState {
  double sigma = 0.0;
  double u1 = 0.0;
  double u2 = 0.0;
  double rho = 0.0;
  double residual = 0.0;  // max of the relative mass, tangential and Bernoulli defects

  double speed() const { return std::hypot(u1, u2); }
  double deflection() const { return std::atan2(u2, u1); }
};

/// Relative Rankine-Hugoniot defect of a downstream state.
inline double rh_residual(const UpstreamState& s, double sigma, double u1, double u2, double rho) {
  const double ts = std::cos(sigma), tn = std::sin(sigma);
  const double qn = s.q_inf() * tn, qt = s.q_inf() * ts;
  const double un = u1 * tn - u2 * ts;
  const double ut = u1 * ts + u2 * tn;
  const double scale = s.rho_inf() * s.q_inf();
  const double mass = std::abs(rho * un - s.rho_inf() * qn) / scale;
  const double tang = std::abs(ut - qt) / s.q_inf();
  const double g = s.gamma();
  const double bern = std::abs(0.5 * (u1 * u1 + u2 * u2) + (std::pow(rho, g - 1.0) - 1.0) / (g - 1.0) - s.B0()) /
                      std::max(1.0, std::abs(s.B0()));
  return std::max({mass, tang, bern});
}

namespace detail {

// Subsonic normal component behind an oblique shock with inclination sigma.
inline ShockState oblique_state(const UpstreamState& s, double sigma) {
  const double g = s.gamma();
  const double qn = s.q_inf() * std::sin(sigma), qt = s.q_inf() * std::cos(sigma);
  // the normal mass flux rho(un) un peaks where un equals the sound speed
  const double unc = std::sqrt(2.0 * (1.0 + (g - 1.0) * (s.B0() - 0.5 * qt * qt)) / (g + 1.0));
  double un;
  if (std::abs(qn - unc) <= 1e-14 * s.q_inf()) {
    un = qn;
  } else if (qn < unc) {
    std::ostringstream msg;
    msg << "no subsonic root at shock angle " << sigma << ": upstream normal component is not supersonic";
    throw DomainError(msg.str());
  } else {
    const double m = s.rho_inf() * qn;
    auto F = [&](double v) { return bernoulli_density(s, std::hypot(v, qt)) * v - m; };
    try {
      un = roots::brent(F, 0.0, unc, 0.0);
    } catch (const NotFound&) {
      std::ostringstream msg;
      msg << "normal relation has no root at shock angle " << sigma;
      throw SolverFailure(msg.str());
    }
  }
  ShockState st;
  st.sigma = sigma;
  st.u1 = qt * std::cos(sigma) + un * std::sin(sigma);
  st.u2 = qt * std::sin(sigma) - un * std::cos(sigma);
  st.rho = bernoulli_density(s, std::hypot(un, qt));
  st.residual = rh_residual(s, sigma, st.u1, st.u2, st.rho);
  return st;
}

}  // namespace detail

/// Normal shock: subsonic root of rho(u) u = rho_inf q_inf.
inline ShockState normal_shock(const UpstreamState& s) {
  if (s.q_inf() < s.sound_speed() * (1.0 - 1e-14)) {
    std::ostringstream msg;
    msg << "no subsonic root: upstream speed " << s.q_inf() << " is below the sound speed " << s.sound_speed();
    throw DomainError(msg.str());
  }
  auto st = detail::oblique_state(s, 0.5 * std::numbers::pi);
  st.u2 = 0.0;
  st.residual = rh_residual(s, st.sigma, st.u1, st.u2, st.rho);
  if (st.residual > 1e-12) {
    std::ostringstream msg;
    msg << "normal shock residual " << st.residual << " above 1e-12";
    throw SolverFailure(msg.str());
  }
  return st;
}

struct PolarSample {
  double sigma, u1, u2, rho, deflection, speed, sound_speed, residual;
};

struct ShockPolarCurve {
  UpstreamState upstream{2.0, 1.0, 2.0};
  std::vector<PolarSample> samples;  // upper half, from the vanishing shock to the normal shock
  double theta_d = 0.0;              // refined detachment angle
  double sigma_d = 0.0;
  double theta_d_sampled = 0.0;      // vertex of the parabola through the three largest-deflection samples
  double theta_sonic = 0.0;
  double sigma_sonic = 0.0;
  ShockState normal_state;
  std::size_t rejected = 0;  // samples dropped by the compressive filter

  /// Closed curve including the mirror image u2 -> -u2.
  std::vector<std::array<double, 2>> full_curve() const {
    std::vector<std::array<double, 2>> c;
    for (const auto& s : samples) c.push_back({s.u1, s.u2});
    for (auto it = samples.rbegin(); it != samples.rend(); ++it) c.push_back({it->u1, -it->u2});
    return c;
  }

  void write_csv(std::ostream& os) const {
    csv::Writer w(os, {"sigma", "u1", "u2", "rho", "deflection", "speed", "sound_speed", "residual"});
    for (const auto& s : samples) w.row({s.sigma, s.u1, s.u2, s.rho, s.deflection, s.speed, s.sound_speed, s.residual});
  }
};

namespace detail {

// maximum of the parabola through three points
inline double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
  const double c2 = (d12 - d01) / (x2 - x0);
  if (!(c2 < 0.0)) return std::max({y0, y1, y2});
  const double xv = 0.5 * (x0 + x1) - d01 / (2.0 * c2);
  return y1 + d01 * (xv - x1) + c2 * (xv - x0) * (xv - x1);
}

}  // namespace detail

inline double polar_deflection(const UpstreamState& s, double sigma) {
  return detail::oblique_state(s, sigma).deflection();
}

inline ShockPolarCurve compute_polar(const UpstreamState& s, std::size_t n_samples = 2048) {
  if (!s.supersonic()) throw DomainError("shock polar needs a supersonic upstream state");
  if (n_samples < 8) throw DomainError("shock polar needs at least 8 samples");
  ShockPolarCurve c;
  c.upstream = s;
  const double mu = s.mach_angle(), half = 0.5 * std::numbers::pi;
  const double g = s.gamma();
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double sigma = k + 1 == n_samples ? half : mu + (half - mu) * static_cast<double>(k) / (n_samples - 1);
    ShockState st;
    if (k == 0) {
      st = {sigma, s.q_inf(), 0.0, s.rho_inf(), 0.0};
    } else {
      try {
        st = detail::oblique_state(s, sigma);
      } catch (const Error& e) {
        std::ostringstream msg;
        msg << "polar sample " << k << " (shock angle " << sigma << "): " << e.what();
        throw SolverFailure(msg.str());
      }
    }
    if (k + 1 == n_samples) st.u2 = 0.0;
    if (st.rho < s.rho_inf()) {
      ++c.rejected;
      continue;
    }
    c.samples.push_back({sigma, st.u1, st.u2, st.rho, st.deflection(), st.speed(),
                         std::pow(st.rho, 0.5 * (g - 1.0)), rh_residual(s, sigma, st.u1, st.u2, st.rho)});
  }
  c.normal_state = normal_shock(s);

  std::size_t kd = 0;
  for (std::size_t k = 0; k < c.samples.size(); ++k)
    if (c.samples[k].deflection > c.samples[kd].deflection) kd = k;
  if (kd == 0 || kd + 1 == c.samples.size()) throw SolverFailure("deflection maximum at a polar endpoint");
  {
    const auto &a = c.samples[kd - 1], &b = c.samples[kd], &e = c.samples[kd + 1];
    const auto w = detail::parabola_vertex(a.sigma, a.deflection, b.sigma, b.deflection, e.sigma, e.deflection);
    c.theta_d_sampled = w;
  }
  const auto [sd, td] = roots::golden_max([&](double sg) { return polar_deflection(s, sg); },
                                          c.samples[kd - 1].sigma, c.samples[kd + 1].sigma);
  c.sigma_d = sd;
  c.theta_d = td;

  auto sonic = [&](double sg) {
    const auto st = detail::oblique_state(s, sg);
    return st.speed() * st.speed() - std::pow(st.rho, g - 1.0);
  };
  for (std::size_t k = 1; k < c.samples.size(); ++k) {
    const auto& a = c.samples[k - 1];
    const auto& b = c.samples[k];
    if ((a.speed > a.sound_speed) != (b.speed > b.sound_speed)) {
      c.sigma_sonic = roots::brent(sonic, a.sigma, b.sigma, 0.0);
      c.theta_sonic = polar_deflection(s, c.sigma_sonic);
      break;
    }
  }
  return c;
}

namespace detail {

inline ShockState polar_branch(const ShockPolarCurve& c, double theta_w, bool weak) {
  if (!(theta_w >= 0.0) || !std::isfinite(theta_w)) throw DomainError("wedge angle must be nonnegative");
  if (theta_w > c.theta_d + 1e-12) {
    std::ostringstream msg;
    msg << "detached: no attached shock state (theta_w = " << theta_w << " > theta_d = " << c.theta_d << ")";
    throw NotFound(msg.str());
  }
  const auto& s = c.upstream;
  if (theta_w >= c.theta_d - 1e-12) return oblique_state(s, c.sigma_d);
  if (theta_w == 0.0) {
    if (weak) return {s.mach_angle(), s.q_inf(), 0.0, s.rho_inf(), 0.0};
    return c.normal_state;
  }
  const double mu = s.mach_angle(), half = 0.5 * std::numbers::pi;
  const double lo = weak ? mu : c.sigma_d, hi = weak ? c.sigma_d : half;
  const double sg = roots::brent([&](double x) { return polar_deflection(s, x) - theta_w; }, lo, hi, 0.0);
  return oblique_state(s, sg);
}

}  // namespace detail

/// Weak-branch (larger u1) downstream state for flow deflection theta_w.
inline ShockState weak_state(const ShockPolarCurve& c, double theta_w) { return detail::polar_branch(c, theta_w, true); }

/// Strong-branch alternative at the same deflection.
inline ShockState strong_state(const ShockPolarCurve& c, double theta_w) {
  return detail::polar_branch(c, theta_w, false);
}

struct SelfSimilarState {
  double gamma = 2.0;
  std::array<double, 2> u0{0.0, 0.0};
  double rho0 = 1.0;
  double k = 0.0;

  double radius() const { return std::pow(rho0, 0.5 * (gamma - 1.0)); }
  double phi(const std::array<double, 2>& xi) const {
    return -0.5 * (xi[0] * xi[0] + xi[1] * xi[1]) + u0[0] * xi[0] + u0[1] * xi[1] + k;
  }
  std::array<double, 2> grad_phi(const std::array<double, 2>& xi) const { return {u0[0] - xi[0], u0[1] - xi[1]}; }
};

enum class Configuration { reflection, wedge_flow };

inline const char* to_string(Configuration c) { return c == Configuration::reflection ? "reflection" : "wedge-flow"; }

/// Circle |xi - u0| = rho0^((gamma-1)/2) and the local coordinates (x, y) near it.
class SonicGeometry {
 public:
  SonicGeometry(SelfSimilarState st, double theta_w, Configuration cfg) : st_(st), theta_w_(theta_w), cfg_(cfg) {
    if (!(st.gamma > 1.0) || !(st.rho0 > 0.0)) throw DomainError("self-similar state needs gamma > 1 and rho0 > 0");
    if (!std::isfinite(theta_w)) throw DomainError("wedge angle must be finite");
  }

  const SelfSimilarState& state() const { return st_; }
  double theta_w() const { return theta_w_; }
  Configuration configuration() const { return cfg_; }
  std::array<double, 2> center() const { return st_.u0; }
  double radius() const { return st_.radius(); }
  double phi(const std::array<double, 2>& xi) const { return st_.phi(xi); }

  /// xi -> (x, y); y is reduced to (-pi, pi].
  std::array<double, 2> to_local(const std::array<double, 2>& xi) const {
    const double d1 = xi[0] - st_.u0[0], d2 = xi[1] - st_.u0[1];
    const double r = std::hypot(d1, d2), th = std::atan2(d2, d1);
    const double y = cfg_ == Configuration::reflection ? th - theta_w_ : std::numbers::pi + theta_w_ - th;
    return {radius() - r, wrap(y)};
  }

  std::array<double, 2> to_xi(const std::array<double, 2>& xy) const {
    const double r = radius() - xy[0];
    const double th = cfg_ == Configuration::reflection ? xy[1] + theta_w_ : std::numbers::pi + theta_w_ - xy[1];
    return {st_.u0[0] + r * std::cos(th), st_.u0[1] + r * std::sin(th)};
  }

  /// Point of the circle at polar angle theta about u0.
  std::array<double, 2> arc_point(double theta) const {
    return {st_.u0[0] + radius() * std::cos(theta), st_.u0[1] + radius() * std::sin(theta)};
  }

  /// n points of the arc between polar angles theta0 and theta1.
  std::vector<std::array<double, 2>> arc(double theta0, double theta1, std::size_t n) const {
    if (n < 2) throw DomainError("arc needs at least 2 points");
    std::vector<std::array<double, 2>> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = arc_point(theta0 + (theta1 - theta0) * static_cast<double>(i) / (n - 1));
    return pts;
  }

  void write_arc_csv(std::ostream& os, double theta0, double theta1, std::size_t n) const {
    csv::Writer w(os, {"theta", "xi1", "xi2", "x", "y"});
    for (std::size_t i = 0; i < n; ++i) {
      const double th = theta0 + (theta1 - theta0) * static_cast<double>(i) / (n - 1);
      const auto p = arc_point(th);
      const auto xy = to_local(p);
      w.row({th, p[0], p[1], xy[0], xy[1]});
    }
  }

 private:
  static double wrap(double a) {
    const double tp = 2.0 * std::numbers::pi;
    a = std::remainder(a, tp);
    return a <= -std::numbers::pi ? a + tp : a;
  }

  SelfSimilarState st_;
  double theta_w_;
  Configuration cfg_;
};

inline SonicGeometry pseudo_sonic_geometry(const SelfSimilarState& st, double theta_w, Configuration cfg) {
  return SonicGeometry(st, theta_w, cfg);
}

/// Uniform state behind the weak shock for deflection theta_w.
inline SelfSimilarState self_similar_state(const ShockPolarCurve& c, double theta_w, double k = 0.0) {
  const auto w = weak_state(c, theta_w);
  return {c.upstream.gamma(), {w.u1, w.u2}, w.rho, k};
}

}  // namespace sonic
