#pragma once

// Phase-plane algebra of the one-dimensional steady Euler-Poisson system
//
//   u' = E u^g / (u^(g+1) - us^(g+1)),   E' = J/u - rho_i,
//
// whose first integral is E^2/2 - H(u). All quantities are nondimensional.

#include <cmath>
#include <limits>
#include <sstream>

#include "sonic/core/error.hpp"
#include "sonic/core/quadrature.hpp"
#include "sonic/core/roots.hpp"

namespace sonic {

/// Polytropic gas constants (gamma, S0), momentum density J and background ion density.
class GasParams {
 public:
  GasParams(double gamma, double S0, double J, double rho_ion)
      : gamma_(gamma), S0_(S0), J_(J), rho_ion_(rho_ion) {
    if (!(gamma > 1.0) || !std::isfinite(gamma)) {
      std::ostringstream msg;
      msg << "gamma must satisfy gamma > 1 (got " << gamma << ")";
      throw DomainError(msg.str());
    }
    if (!(S0 > 0.0) || !std::isfinite(S0)) throw DomainError("S0 must be positive");
    if (!(J > 0.0) || !std::isfinite(J)) throw DomainError("J must be positive");
    if (!(rho_ion > 0.0) || !std::isfinite(rho_ion)) throw DomainError("rho_ion must be positive");
    u_sonic_ = std::pow(gamma * S0 * std::pow(J, gamma - 1.0), 1.0 / (gamma + 1.0));
    u_bar_ = J / rho_ion;
    us_pow_ = std::pow(u_sonic_, gamma + 1.0);
    F_sonic_ = antiderivative(u_sonic_);
  }

  double gamma() const { return gamma_; }
  double S0() const { return S0_; }
  double J() const { return J_; }
  double rho_ion() const { return rho_ion_; }

  /// Sonic speed (gamma S0 J^(gamma-1))^(1/(gamma+1)).
  double u_sonic() const { return u_sonic_; }
  /// J / rho_ion.
  double u_bar() const { return u_bar_; }
  double zeta0() const { return u_bar_ / u_sonic_; }
  /// u_sonic^(gamma+1), used throughout.
  double us_pow() const { return us_pow_; }

  /// Antiderivative of (u_bar - t) - us^(g+1) u_bar t^(-g-1) + us^(g+1) t^(-g).
  double antiderivative(double t) const {
    const double g = gamma_;
    return u_bar_ * t - 0.5 * t * t + us_pow_ * u_bar_ * std::pow(t, -g) / g -
           us_pow_ * std::pow(t, 1.0 - g) / (g - 1.0);
  }
  double antiderivative_at_sonic() const { return F_sonic_; }

 private:
  double gamma_;
  double S0_;
  double J_;
  double rho_ion_;
  double u_sonic_ = 0.0;
  double u_bar_ = 0.0;
  double us_pow_ = 0.0;
  double F_sonic_ = 0.0;
};

enum class Branch { accelerating, decelerating };

/// A point (u, E) of the phase plane.
struct PhaseState {
  double u;
  double E;
};

enum class TrajectoryBranch { accelerating, decelerating, both, off_critical };
enum class Regime { subsonic, sonic, supersonic };

struct TrajectoryClass {
  bool on_critical = false;
  TrajectoryBranch branch = TrajectoryBranch::off_critical;
  Regime regime = Regime::subsonic;
  double residual = 0.0;  // E^2/2 - H(u)
};

inline const char* to_string(Branch b) {
  return b == Branch::accelerating ? "accelerating" : "decelerating";
}

inline const char* to_string(TrajectoryBranch b) {
  switch (b) {
    case TrajectoryBranch::accelerating: return "accelerating";
    case TrajectoryBranch::decelerating: return "decelerating";
    case TrajectoryBranch::both: return "both";
    case TrajectoryBranch::off_critical: return "off-critical";
  }
  return "?";
}

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::subsonic: return "subsonic";
    case Regime::sonic: return "sonic";
    case Regime::supersonic: return "supersonic";
  }
  return "?";
}

/// |u - u_s| <= kSonicBand * u_s classifies a state as sonic.
inline constexpr double kSonicBand = 1e-9;

namespace detail {

// Inside this relative distance from u_s, H is evaluated by Gauss-Legendre on the
// cancellation-free integrand instead of the difference of antiderivatives.
inline constexpr double kEnthalpyLocalBand = 1e-2;

/// 1 - (u_s/t)^(g+1), accurate near t = u_s.
inline double sonic_factor(const GasParams& p, double t) {
  return -std::expm1((p.gamma() + 1.0) * std::log(p.u_sonic() / t));
}

inline double check_velocity(double u) {
  if (!(u > 0.0) || !std::isfinite(u)) {
    std::ostringstream msg;
    msg << "velocity must be positive and finite (got " << u << ")";
    throw DomainError(msg.str());
  }
  return u;
}

}  // namespace detail

/// Integrand (J/u_bar) (1 - (u_s/t)^(g+1)) (u_bar - t) of H, i.e. H'(t).
inline double enthalpy_dH(const GasParams& p, double u) {
  detail::check_velocity(u);
  return (p.J() / p.u_bar()) * detail::sonic_factor(p, u) * (p.u_bar() - u);
}

/// H''(u_s) = (J/u_bar)(g+1)(u_bar - u_s)/u_s.
inline double enthalpy_d2H_sonic(const GasParams& p) {
  return (p.J() / p.u_bar()) * (p.gamma() + 1.0) * (p.u_bar() - p.u_sonic()) / p.u_sonic();
}

/// H(u) = (J/u_bar) * integral_{u_s}^{u} t^-(g+1) (t^(g+1) - u_s^(g+1)) (u_bar - t) dt.
inline double enthalpy_H(const GasParams& p, double u) {
  detail::check_velocity(u);
  const double us = p.u_sonic();
  if (u == us) return 0.0;
  const double scale = p.J() / p.u_bar();
  if (std::abs(u - us) <= detail::kEnthalpyLocalBand * us) {
    auto integrand = [&](double t) { return detail::sonic_factor(p, t) * (p.u_bar() - t); };
    return scale * quad::gauss_legendre(integrand, us, u);
  }
  return scale * (p.antiderivative(u) - p.antiderivative_at_sonic());
}

/// u^g H(u); finite as u -> 0 where H itself overflows.
inline double scaled_enthalpy_G(const GasParams& p, double u) {
  detail::check_velocity(u);
  if (u > 0.5 * p.u_sonic()) return std::pow(u, p.gamma()) * enthalpy_H(p, u);
  const double g = p.gamma();
  const double ug = std::pow(u, g);
  const double A = p.us_pow();
  const double ugF = p.u_bar() * ug * u - 0.5 * ug * u * u + A * p.u_bar() / g - A * u / (g - 1.0);
  return (p.J() / p.u_bar()) * (ugF - ug * p.antiderivative_at_sonic());
}

/// Field value on the critical trajectory E^2/2 = H(u), signed by branch.
inline double critical_E(const GasParams& p, double u, Branch branch) {
  const double H = enthalpy_H(p, u);
  const double us = p.u_sonic();
  const double tol = 1e-12 * (p.J() / p.u_bar()) * std::max(u, us) * std::max(u, us);
  if (H < -tol) {
    std::ostringstream msg;
    msg << "critical_E: H(" << u << ") = " << H << " < 0, no critical state at this velocity";
    throw ConfigurationError(msg.str());
  }
  if (u == us) return 0.0;
  const double mag = std::sqrt(2.0 * std::max(H, 0.0));
  const double side = (u > us) ? 1.0 : -1.0;
  return (branch == Branch::accelerating ? side : -side) * mag;
}

/// u^(g+1) - u_s^(g+1) without cancellation near u_s.
inline double sonic_gap(const GasParams& p, double u) {
  return p.us_pow() * std::expm1((p.gamma() + 1.0) * std::log(u / p.u_sonic()));
}

/// dx/du along the critical branch; the removable singularity at u_s is filled
/// with its limit +-(g+1)/sqrt(H''(u_s)).
inline double dxdu_critical(const GasParams& p, double u, Branch branch) {
  detail::check_velocity(u);
  if (u == p.u_sonic()) {
    const double lim = (p.gamma() + 1.0) / std::sqrt(enthalpy_d2H_sonic(p));
    return branch == Branch::accelerating ? lim : -lim;
  }
  const double E = critical_E(p, u, branch);
  return sonic_gap(p, u) / (E * std::pow(u, p.gamma()));
}

/// Right-hand side of the singular system in x. Returns NaN outside u > 0.
inline PhaseState phase_rhs(const GasParams& p, double u, double E) {
  if (!(u > 0.0)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  return {E * std::pow(u, p.gamma()) / sonic_gap(p, u), p.J() / u - p.rho_ion()};
}

enum class RootMethod { bisection, brent };

/// Second zero u* > u_bar of H (accelerating-branch endpoint, where E returns to 0).
inline double find_u_star(const GasParams& p, RootMethod method = RootMethod::brent) {
  if (!(p.zeta0() > 1.0)) {
    throw ConfigurationError("find_u_star requires zeta0 = u_bar/u_sonic > 1");
  }
  auto H = [&](double u) { return enthalpy_H(p, u); };
  roots::Bracket br{};
  try {
    br = roots::expand_upward(H, p.u_bar(), 10.0 * p.u_bar());
  } catch (const NotFound&) {
    throw ConfigurationError("find_u_star: no sign change of H above u_bar");
  }
  return method == RootMethod::brent ? roots::brent(H, br.lo, br.hi, 0.0)
                                     : roots::bisection(H, br.lo, br.hi, 0.0);
}

/// Places a phase-plane state relative to the critical trajectory and the sonic line.
inline TrajectoryClass classify_state(const GasParams& p, PhaseState s, double tol) {
  detail::check_velocity(s.u);
  TrajectoryClass c;
  const double us = p.u_sonic();
  c.residual = 0.5 * s.E * s.E - enthalpy_H(p, s.u);
  c.on_critical = std::abs(c.residual) <= tol;
  if (std::abs(s.u - us) <= kSonicBand * us) {
    c.regime = Regime::sonic;
  } else {
    c.regime = s.u < us ? Regime::subsonic : Regime::supersonic;
  }
  if (!c.on_critical) {
    c.branch = TrajectoryBranch::off_critical;
  } else if (c.regime == Regime::sonic || 0.5 * s.E * s.E <= tol) {
    c.branch = TrajectoryBranch::both;
  } else {
    c.branch = ((s.u - us) * s.E > 0.0) ? TrajectoryBranch::accelerating
                                         : TrajectoryBranch::decelerating;
  }
  return c;
}

}  // namespace sonic
