#pragma once

// Transonic profiles of the one-dimensional Euler-Poisson system: integration
// through the sonic point, field reconstruction, terminal-point analysis and
// the sign diagnostics used by the linearized two-dimensional operator.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sonic/core/csv.hpp"
#include "sonic/core/error.hpp"
#include "sonic/core/ode.hpp"
#include "sonic/core/quadrature.hpp"
#include "sonic/core/roots.hpp"
#include "sonic/phase_plane.hpp"

namespace sonic {

struct InletData {
  double u0;
  double E0;
};

struct IntegratorOptions {
  // tight by default: near the saddle the level-set distance grows like sqrt(drift)
  double rtol = 1e-12;
  double atol = 1e-14;
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 2'000'000;
  double sonic_switch = 1e-3;  // half-width of the u-parametrized band, relative to u_s
  int band_samples = 16;       // samples per band leg
  double critical_tol = 1e-7;  // |E^2/2 - H| in units of (J/u_bar) u_s^2
  double horizon = 1e3;        // X_big
  double u_floor = 1e-6;       // relative to u_s
};

/// Optional early stops. Without either, a run continues to its natural end.
struct StopRule {
  std::optional<double> x_max;
  std::optional<double> u_target;
};

enum class Termination { l_max, x_max, horizon, u_target, u_floor };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::l_max: return "l_max";
    case Termination::x_max: return "x_max";
    case Termination::horizon: return "horizon";
    case Termination::u_target: return "u_target";
    case Termination::u_floor: return "u_floor";
  }
  return "?";
}

struct ProfileSample {
  double x1 = 0.0;
  double u = 0.0;
  double E = 0.0;
  double du_dx = 0.0;
  double dE_dx = 0.0;
  double rho = 0.0;
  double p = 0.0;
  double Phi = 0.0;
  double phi_bar = 0.0;
};

/// A sampled profile. Immutable; operations that change samples return a new object.
class Profile1D {
 public:
  Profile1D(GasParams params, InletData inlet, TrajectoryBranch branch,
            std::vector<ProfileSample> samples, Termination termination,
            std::optional<double> l_s, std::optional<double> l_max)
      : params_(params),
        inlet_(inlet),
        branch_(branch),
        samples_(std::move(samples)),
        termination_(termination),
        l_s_(l_s),
        l_max_(l_max) {
    if (samples_.empty()) throw DomainError("profile needs at least one sample");
  }

  const GasParams& params() const { return params_; }
  const InletData& inlet() const { return inlet_; }
  TrajectoryBranch branch() const { return branch_; }
  bool critical() const { return branch_ != TrajectoryBranch::off_critical; }
  const std::vector<ProfileSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  Termination termination() const { return termination_; }
  std::optional<double> l_s() const { return l_s_; }
  /// Terminal location, set only when the run ended there.
  std::optional<double> l_max() const { return l_max_; }
  double x_begin() const { return samples_.front().x1; }
  double x_end() const { return samples_.back().x1; }

  Profile1D with_samples(std::vector<ProfileSample> s) const {
    return Profile1D(params_, inlet_, branch_, std::move(s), termination_, l_s_, l_max_);
  }

  /// Hermite interpolation of every field; derivatives come from the same interpolant.
  ProfileSample at(double x) const {
    if (!(x >= x_begin() && x <= x_end())) {
      std::ostringstream msg;
      msg << "x1=" << x << " outside profile range [" << x_begin() << ", " << x_end() << "]";
      throw DomainError(msg.str());
    }
    auto it = std::upper_bound(samples_.begin(), samples_.end(), x,
                               [](double v, const ProfileSample& s) { return v < s.x1; });
    if (it == samples_.begin()) return samples_.front();
    if (it == samples_.end()) return samples_.back();
    const ProfileSample& a = *(it - 1);
    const ProfileSample& b = *it;
    if (x == a.x1) return a;
    ode::Node<4> na{a.x1, {a.u, a.E, a.phi_bar, a.Phi}, {a.du_dx, a.dE_dx, a.u, a.E}};
    ode::Node<4> nb{b.x1, {b.u, b.E, b.phi_bar, b.Phi}, {b.du_dx, b.dE_dx, b.u, b.E}};
    const auto y = ode::hermite<4>(na, nb, x);
    const auto dy = ode::hermite_derivative<4>(na, nb, x);
    ProfileSample s;
    s.x1 = x;
    s.u = y[0];
    s.E = y[1];
    s.phi_bar = y[2];
    s.Phi = y[3];
    s.du_dx = dy[0];
    s.dE_dx = dy[1];
    s.rho = params_.J() / s.u;
    s.p = params_.S0() * std::pow(s.rho, params_.gamma());
    return s;
  }

 private:
  GasParams params_;
  InletData inlet_;
  TrajectoryBranch branch_;
  std::vector<ProfileSample> samples_;
  Termination termination_;
  std::optional<double> l_s_;
  std::optional<double> l_max_;
};

namespace detail {

/// Natural size of H, used to make phase-plane tolerances scale free.
inline double enthalpy_scale(const GasParams& p) {
  return p.J() / p.u_bar() * p.u_sonic() * p.u_sonic();
}

// Within this relative distance of u_s the quotient E u^g / (u^(g+1) - u_s^(g+1)) loses
// digits to cancellation; critical profiles use the desingularized slope there.
inline constexpr double kSlopeBand = 5e-2;

inline Branch branch_of(const GasParams& p, const InletData& in) {
  const double side = in.u0 - p.u_sonic();
  if (side * in.E0 > 0.0) return Branch::accelerating;
  if (side * in.E0 < 0.0) return Branch::decelerating;
  return side > 0.0 ? Branch::decelerating : Branch::accelerating;
}

inline TrajectoryBranch as_trajectory(Branch b) {
  return b == Branch::accelerating ? TrajectoryBranch::accelerating
                                   : TrajectoryBranch::decelerating;
}

/// Corrected trapezoid rule using endpoint derivatives (fourth order).
inline double hermite_trapezoid(double h, double fa, double fb, double dfa, double dfb) {
  return 0.5 * h * (fa + fb) + h * h / 12.0 * (dfa - dfb);
}

/// Composite Gauss-Legendre, doubling panels until two levels agree.
template <class F>
double panel_integral(F&& f, double a, double b) {
  if (a == b) return 0.0;
  double prev = quad::gauss_legendre(f, a, b);
  for (int n = 2; n <= 4096; n *= 2) {
    double cur = 0.0;
    const double w = (b - a) / n;
    for (int k = 0; k < n; ++k) {
      const double lo = a + w * k;
      const double hi = (k + 1 == n) ? b : a + w * (k + 1);
      cur += quad::gauss_legendre(f, lo, hi);
    }
    if (std::abs(cur - prev) <= 1e-15 * std::abs(cur)) return cur;
    prev = cur;
  }
  return prev;
}

inline constexpr double kTerminalBand = 1e-2;

/// E on the critical branch, with H re-anchored at u* when u is close to it, where the
/// closed form loses relative accuracy.
inline double critical_E_anchored(const GasParams& p, double u, Branch b, double ustar) {
  if (std::isfinite(ustar) && std::abs(u - ustar) < kTerminalBand * ustar) {
    if (u == ustar) return 0.0;
    auto dH = [&](double t) { return enthalpy_dH(p, t); };
    const double H = quad::gauss_legendre(dH, ustar, u);
    const double side = u > p.u_sonic() ? 1.0 : -1.0;
    return (b == Branch::accelerating ? side : -side) * std::sqrt(2.0 * std::max(H, 0.0));
  }
  return critical_E(p, u, b);
}

/// dx/dw for u = a - w^2 near an anchor a with known H(a) (a = u* gives the terminal layer).
/// H is integrated over the offset w^2 itself, which is not representable as a - u once w
/// is small.
inline double dxdw_anchored(const GasParams& p, double w, Branch b, double a, double Ha) {
  const double d = w * w;
  const double u = a - d;
  auto dH = [&](double tau) { return -enthalpy_dH(p, a - tau); };
  const double H = Ha + quad::gauss_legendre(dH, 0.0, d);
  const double side = u > p.u_sonic() ? 1.0 : -1.0;
  const double E = (b == Branch::accelerating ? side : -side) * std::sqrt(2.0 * std::max(H, 0.0));
  return 2.0 * w * sonic_gap(p, u) / (E * std::pow(u, p.gamma()));
}

inline double dxdw_terminal(const GasParams& p, double w, Branch b, double ustar) {
  return dxdw_anchored(p, w, b, ustar, 0.0);
}

inline double dxdu_anchored(const GasParams& p, double u, Branch b, double ustar) {
  if (std::isfinite(ustar) && u != ustar && std::abs(u - ustar) < kTerminalBand * ustar) {
    return sonic_gap(p, u) / (critical_E_anchored(p, u, b, ustar) * std::pow(u, p.gamma()));
  }
  return dxdu_critical(p, u, b);
}

class ProfileRunner {
 public:
  ProfileRunner(const GasParams& p, const InletData& in, const StopRule& stop,
                const IntegratorOptions& o)
      : p_(p), in_(in), stop_(stop), o_(o) {}

  Profile1D run() {
    const double us = p_.u_sonic();
    const double u0 = in_.u0;
    const double E0 = in_.E0;
    if (!(u0 > 0.0) || !std::isfinite(u0) || !std::isfinite(E0)) {
      throw DomainError("inlet requires u0 > 0 and finite E0");
    }
    const double crit_abs = o_.critical_tol * enthalpy_scale(p_);
    if (std::abs(u0 - us) <= kSonicBand * us && std::abs(E0) <= std::sqrt(2.0 * crit_abs)) {
      throw DomainError("degenerate inlet: (u0, E0) is the sonic equilibrium (u_sonic, 0)");
    }
    const double res = 0.5 * E0 * E0 - enthalpy_H(p_, u0);
    critical_ = std::abs(res) <= crit_abs;
    branch_ = branch_of(p_, in_);
    band_ = o_.sonic_switch * us;
    if (critical_ && p_.zeta0() > 1.0) ustar_ = find_u_star(p_);
    x_limit_ = std::min(stop_.x_max.value_or(o_.horizon), o_.horizon);
    limit_term_ = (stop_.x_max && *stop_.x_max <= o_.horizon) ? Termination::x_max
                                                              : Termination::horizon;

    bool in_band = std::abs(u0 - us) <= band_;
    Stop s;
    if (in_band && critical_) {
      push({0.0, u0, E0, 1.0 / dxdu_critical(p_, u0, branch_), p_.J() / u0 - p_.rho_ion()});
      s = Stop::band;
    } else {
      if (in_band) {
        const auto r = phase_rhs(p_, u0, E0);
        if ((us - u0) * r.u >= 0.0) blowup(res);
      }
      s = run_x(0.0, u0, E0);
    }
    while (s == Stop::band) {
      const ProfileSample last = out_.back();
      const double r = 0.5 * last.E * last.E - enthalpy_H(p_, last.u);
      if (!critical_ || std::abs(r) > crit_abs) blowup(r);
      const double dir = branch_ == Branch::accelerating ? 1.0 : -1.0;
      if (cross_band(last.x1, last.u, dir)) break;
      const double ue = us + dir * band_;
      s = run_x(out_.back().x1, ue, critical_E(p_, ue, branch_));
    }
    if (s == Stop::terminal) terminal_leg(out_.back().x1, out_.back().u);

    std::optional<double> l_max;
    if (term_ == Termination::l_max) {
      ProfileSample& e = out_.back();
      e.E = 0.0;
      e.du_dx = 0.0;
      e.dE_dx = p_.J() / e.u - p_.rho_ion();
      l_max = e.x1;
    }
    return Profile1D(p_, in_, critical_ ? as_trajectory(branch_) : TrajectoryBranch::off_critical,
                     std::move(out_), term_, l_s_, l_max);
  }

 private:
  enum class Stop { band, terminal, limit, u_target, u_floor };

  [[noreturn]] void blowup(double residual) const {
    std::ostringstream msg;
    msg << "sonic blow-up: off-critical data cannot cross (E^2/2 - H = " << residual << ")";
    throw SonicBlowup(msg.str());
  }

  void push(const ProfileSample& s) {
    if (!out_.empty() && !(s.x1 > out_.back().x1)) return;
    out_.push_back(s);
  }

  Stop run_x(double x0, double u0, double E0) {
    const double us = p_.u_sonic();
    auto rhs = [this](double, const ode::State<2>& y) -> ode::State<2> {
      const auto r = phase_rhs(p_, y[0], y[1]);
      return {r.u, r.E};
    };
    std::vector<ode::EventFn<2>> ev;
    std::vector<Stop> kind;
    const double lo = us - band_;
    const double hi = us + band_;
    if (u0 < lo) {
      ev.push_back([lo](double, const ode::State<2>& y) { return lo - y[0]; });
      kind.push_back(Stop::band);
    } else if (u0 > hi) {
      ev.push_back([hi](double, const ode::State<2>& y) { return y[0] - hi; });
      kind.push_back(Stop::band);
    }
    if (critical_ && branch_ == Branch::accelerating && u0 > us) {
      const double ut = ustar_ * (1.0 - kTerminalBand);
      if (u0 >= ut) {
        if (out_.empty()) push(terminal_sample(x0, u0));
        return Stop::terminal;
      }
      ev.push_back([ut](double, const ode::State<2>& y) { return ut - y[0]; });
      kind.push_back(Stop::terminal);
    }
    if (stop_.u_target && *stop_.u_target != u0) {
      const double ut = *stop_.u_target;
      const double sg = u0 < ut ? -1.0 : 1.0;
      ev.push_back([ut, sg](double, const ode::State<2>& y) { return sg * (y[0] - ut); });
      kind.push_back(Stop::u_target);
    }
    const double uf = o_.u_floor * us;
    if (u0 > uf) {
      ev.push_back([uf](double, const ode::State<2>& y) { return y[0] - uf; });
      kind.push_back(Stop::u_floor);
    }

    if (x0 >= x_limit_) {
      if (out_.empty()) push(sample(x0, u0, E0));
      term_ = limit_term_;
      return Stop::limit;
    }
    ode::Options opts;
    opts.rtol = o_.rtol;
    opts.atol = o_.atol;
    opts.h_max = o_.h_max;
    opts.max_steps = o_.max_steps;
    auto res = ode::integrate<2>(rhs, x0, ode::State<2>{u0, E0}, x_limit_, opts, ev);
    for (const auto& n : res.nodes) push({n.t, n.y[0], n.y[1], n.dy[0], n.dy[1]});
    if (res.event < 0) {
      term_ = limit_term_;
      return Stop::limit;
    }
    const Stop s = kind[static_cast<std::size_t>(res.event)];
    if (s == Stop::u_target) term_ = Termination::u_target;
    if (s == Stop::u_floor) term_ = Termination::u_floor;
    return s;
  }

  ProfileSample sample(double x, double u, double E) const {
    const auto r = phase_rhs(p_, u, E);
    return {x, u, E, r.u, r.E};
  }

  ProfileSample band_sample(double x, double u) const {
    return {x, u, critical_E(p_, u, branch_), 1.0 / dxdu_critical(p_, u, branch_),
            p_.J() / u - p_.rho_ion()};
  }

  ProfileSample terminal_sample(double x, double u) const {
    const double E = critical_E_anchored(p_, u, branch_, ustar_);
    const double up = u == ustar_ ? 0.0 : 1.0 / dxdu_anchored(p_, u, branch_, ustar_);
    return {x, u, E, up, p_.J() / u - p_.rho_ion()};
  }

  /// Final approach to u* in w = sqrt(u* - u), where dx/dw stays bounded.
  void terminal_leg(double x0, double u0) {
    auto dxdw = [this](double w) { return dxdw_terminal(p_, w, branch_, ustar_); };
    const double W = std::sqrt(std::max(ustar_ - u0, 0.0));
    double w_end = 0.0;
    bool hit_target = false;
    if (stop_.u_target && *stop_.u_target > u0 && *stop_.u_target < ustar_) {
      w_end = std::sqrt(ustar_ - *stop_.u_target);
      hit_target = true;
    }
    const int n = std::max(1, o_.band_samples);
    double x = x0;
    double w_prev = W;
    for (int k = 1; k <= n; ++k) {
      const double wk = (k == n) ? w_end : W + (w_end - W) * k / n;
      const double dx = quad::gauss_legendre(dxdw, wk, w_prev);
      if (x + dx >= x_limit_) {
        const double xl = x_limit_;
        const double xs = x;
        const double wp = w_prev;
        auto g = [&](double w) { return xs + quad::gauss_legendre(dxdw, w, wp) - xl; };
        const double wl = roots::brent(g, wk, wp, 0.0);
        push(terminal_sample(xl, ustar_ - wl * wl));
        term_ = limit_term_;
        return;
      }
      x += dx;
      push(terminal_sample(x, (k == n && !hit_target) ? ustar_ : ustar_ - wk * wk));
      w_prev = wk;
    }
    term_ = hit_target ? Termination::u_target : Termination::l_max;
  }

  /// Crosses the sonic band in the u-parametrization. Returns true if the run ended inside.
  bool cross_band(double x0, double u0, double dir) {
    const double us = p_.u_sonic();
    double target = us + dir * band_;
    bool hit_target = false;
    if (stop_.u_target) {
      const double ut = *stop_.u_target;
      if (dir * (ut - u0) > 0.0 && dir * (target - ut) >= 0.0) {
        target = ut;
        hit_target = true;
      }
    }
    std::vector<std::pair<double, double>> legs;
    if ((u0 - us) * (target - us) < 0.0) {
      legs = {{u0, us}, {us, target}};
    } else {
      legs = {{u0, target}};
    }
    auto dxdu = [this](double u) { return dxdu_critical(p_, u, branch_); };
    double x = x0;
    double u_prev = u0;
    const int n = std::max(1, o_.band_samples);
    for (const auto& [a, b] : legs) {
      for (int k = 1; k <= n; ++k) {
        const double uk = (k == n) ? b : a + (b - a) * k / n;
        const double dx = quad::gauss_legendre(dxdu, u_prev, uk);
        if (x + dx >= x_limit_) {
          const double xl = x_limit_;
          const double xs = x;
          const double up = u_prev;
          auto g = [&](double u) { return xs + quad::gauss_legendre(dxdu, up, u) - xl; };
          const double ul = roots::brent(g, std::min(up, uk), std::max(up, uk), 0.0);
          push(band_sample(xl, ul));
          term_ = limit_term_;
          return true;
        }
        x += dx;
        push(band_sample(x, uk));
        if (uk == us) l_s_ = x;
        u_prev = uk;
      }
    }
    if (hit_target) {
      term_ = Termination::u_target;
      return true;
    }
    return false;
  }

  const GasParams& p_;
  const InletData& in_;
  const StopRule& stop_;
  const IntegratorOptions& o_;
  bool critical_ = false;
  Branch branch_ = Branch::accelerating;
  double band_ = 0.0;
  double ustar_ = std::numeric_limits<double>::infinity();
  double x_limit_ = 0.0;
  Termination limit_term_ = Termination::horizon;
  Termination term_ = Termination::horizon;
  std::vector<ProfileSample> out_;
  std::optional<double> l_s_;
};

}  // namespace detail

/// Fills rho, p, Phi and phi_bar. Integrals use the derivative-corrected trapezoid rule.
inline Profile1D reconstruct_fields(const GasParams& p, const Profile1D& prof) {
  std::vector<ProfileSample> s = prof.samples();
  const double g = p.gamma();
  const double u0 = s.front().u;
  const double Phi0 = 0.5 * u0 * u0 + g * p.S0() / (g - 1.0) * std::pow(p.J() / u0, g - 1.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i].rho = p.J() / s[i].u;
    s[i].p = p.S0() * std::pow(s[i].rho, g);
    if (i == 0) {
      s[i].Phi = Phi0;
      s[i].phi_bar = 0.0;
      continue;
    }
    const auto& a = s[i - 1];
    auto& b = s[i];
    const double h = b.x1 - a.x1;
    b.Phi = a.Phi + detail::hermite_trapezoid(h, a.E, b.E, a.dE_dx, b.dE_dx);
    b.phi_bar = a.phi_bar + detail::hermite_trapezoid(h, a.u, b.u, a.du_dx, b.du_dx);
  }
  return prof.with_samples(std::move(s));
}

/// Integrates the profile from the inlet. Critical data are carried through the sonic
/// point in the u-parametrization; off-critical data reaching the sonic band throw SonicBlowup.
inline Profile1D integrate_profile(const GasParams& p, const InletData& inlet,
                                   const StopRule& stop = {}, const IntegratorOptions& opts = {}) {
  detail::ProfileRunner runner(p, inlet, stop, opts);
  return reconstruct_fields(p, runner.run());
}

/// ½u² + γS₀ρ^(γ-1)/(γ-1) - Φ; zero along exact solutions.
inline double bernoulli_defect(const GasParams& p, const ProfileSample& s) {
  const double g = p.gamma();
  return 0.5 * s.u * s.u + g * p.S0() * std::pow(s.rho, g - 1.0) / (g - 1.0) - s.Phi;
}

/// u'(x) at a state of the profile: the ODE right-hand side, or the desingularized
/// critical slope 1/(dx/du) near the sonic point.
inline double profile_slope(const Profile1D& prof, double u, double E) {
  const auto& p = prof.params();
  if (prof.critical() && std::abs(u - p.u_sonic()) <= detail::kSlopeBand * p.u_sonic()) {
    const Branch b = prof.branch() == TrajectoryBranch::accelerating ? Branch::accelerating
                                                                      : Branch::decelerating;
    return 1.0 / dxdu_critical(p, u, b);
  }
  return phase_rhs(p, u, E).u;
}

/// Restriction of a profile to [x_begin, L].
inline Profile1D truncate_profile(const GasParams& p, const Profile1D& prof, double L) {
  if (!(L > prof.x_begin() && L <= prof.x_end())) throw DomainError("truncation point outside profile");
  std::vector<ProfileSample> s;
  for (const auto& smp : prof.samples()) {
    if (smp.x1 < L) s.push_back(smp);
  }
  ProfileSample e = prof.at(L);
  e.du_dx = profile_slope(prof, e.u, e.E);
  e.dE_dx = p.J() / e.u - p.rho_ion();
  s.push_back(e);
  std::optional<double> ls = prof.l_s();
  if (ls && *ls > L) ls.reset();
  Profile1D cut(p, prof.inlet(), prof.branch(), std::move(s), Termination::x_max, ls, std::nullopt);
  return reconstruct_fields(p, cut);
}

/// Sonic location from the sign change of u - u_s.
inline double locate_sonic(const Profile1D& prof) {
  const auto& s = prof.samples();
  const double us = prof.params().u_sonic();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].u == us && i > 0 && i + 1 < s.size()) return s[i].x1;
    if (i + 1 == s.size()) break;
    const double a = s[i].u - us;
    const double b = s[i + 1].u - us;
    if (a * b < 0.0) {
      auto f = [&](double x) { return prof.at(x).u - us; };
      return roots::brent(f, s[i].x1, s[i + 1].x1, 0.0);
    }
  }
  throw NotFound("no sonic crossing in profile");
}

struct LmaxOptions {
  double horizon = 1e3;
  double kappa_min = 1e-3;
  double tail_rtol = 1e-14;
  double s_cap = 700.0;
  double ds = 0.25;
};

/// One point of the u -> 0 march in s = ln(u_b/u).
struct LmaxTrendPoint {
  double s;
  double log_u;
  double x;
  double dxds;
  double kappa;  // -d ln(dx/ds)/ds
  double log_E;
};

struct LmaxReport {
  Branch branch = Branch::accelerating;
  bool finite = true;
  double value = 0.0;  // +inf when not finite
  std::string decided_by;
  double u_end = 0.0;
  std::vector<LmaxTrendPoint> trend;
};

/// Terminal location of the critical trajectory through the inlet, from the x-extent integral.
inline LmaxReport locate_lmax(const GasParams& p, const InletData& inlet, const LmaxOptions& opt = {}) {
  const double us = p.u_sonic();
  const double u0 = inlet.u0;
  if (!(u0 > 0.0)) throw DomainError("inlet requires u0 > 0");
  if (std::abs(u0 - us) <= kSonicBand * us && inlet.E0 == 0.0) {
    throw DomainError("degenerate inlet: (u0, E0) is the sonic equilibrium (u_sonic, 0)");
  }
  const double res = 0.5 * inlet.E0 * inlet.E0 - enthalpy_H(p, u0);
  if (std::abs(res) > 1e-7 * detail::enthalpy_scale(p)) {
    throw ConfigurationError("locate_lmax requires an inlet on the critical trajectory");
  }
  LmaxReport rep;
  rep.branch = detail::branch_of(p, inlet);
  const Branch b = rep.branch;
  double ustar = std::numeric_limits<double>::infinity();
  if (p.zeta0() > 1.0) ustar = find_u_star(p);

  if (b == Branch::accelerating) {
    double x = 0.0;
    if (u0 < us) {
      x += detail::panel_integral([&](double u) { return dxdu_critical(p, u, b); }, u0, us);
    }
    const double a = std::max(u0, us);
    const double W = std::sqrt(std::max(ustar - a, 0.0));
    const double w_split = std::min(W, std::sqrt(detail::kTerminalBand * ustar));
    x += detail::panel_integral([&](double w) { return detail::dxdw_terminal(p, w, b, ustar); },
                                0.0, w_split);
    x += detail::panel_integral(
        [&](double w) { return 2.0 * w * dxdu_critical(p, ustar - w * w, b); }, w_split, W);
    rep.finite = true;
    rep.value = x;
    rep.decided_by = "quadrature";
    rep.u_end = ustar;
    return rep;
  }

  double x = 0.0;
  if (u0 > us) {
    const double W = std::sqrt(u0 - us);
    const double w_split = std::min(W, std::sqrt(detail::kTerminalBand * u0));
    const double H0 = std::isfinite(ustar) && u0 == ustar ? 0.0 : enthalpy_H(p, u0);
    x += detail::panel_integral(
        [&](double w) { return -detail::dxdw_anchored(p, w, b, u0, H0); }, 0.0, w_split);
    x += detail::panel_integral([&](double w) { return -2.0 * w * dxdu_critical(p, u0 - w * w, b); },
                                w_split, W);
  }
  const double ub = std::min(u0, 0.5 * us);
  if (ub < std::min(u0, us)) {
    x += detail::panel_integral([&](double u) { return -dxdu_critical(p, u, b); }, ub,
                                std::min(u0, us));
  }
  const double g = p.gamma();
  const double A = p.us_pow();
  const double lnub = std::log(ub);
  auto dxds = [&](double s) {
    const double lnu = lnub - s;
    const double u = std::exp(lnu);
    const double G = scaled_enthalpy_G(p, u);
    return (A - std::pow(u, g + 1.0)) * std::exp((1.0 - 0.5 * g) * lnu) / std::sqrt(2.0 * G);
  };
  auto log_E = [&](double s) {
    const double lnu = lnub - s;
    return 0.5 * std::log(2.0 * scaled_enthalpy_G(p, std::exp(lnu))) - 0.5 * g * lnu;
  };
  double s = 0.0;
  double prev = dxds(0.0);
  rep.trend.push_back({0.0, lnub, x, prev, std::nan(""), log_E(0.0)});
  for (long k = 1;; ++k) {
    x += quad::gauss_legendre(dxds, s, s + opt.ds);
    s += opt.ds;
    const double cur = dxds(s);
    const double kappa = (cur > 0.0 && prev > 0.0) ? -(std::log(cur) - std::log(prev)) / opt.ds
                                                   : std::numeric_limits<double>::infinity();
    prev = cur;
    const bool done_h = x > opt.horizon;
    const bool converged = kappa > opt.kappa_min && cur / kappa <= opt.tail_rtol * x;
    const bool capped = s >= opt.s_cap;
    if (k % 4 == 0 || done_h || converged || capped) {
      rep.trend.push_back({s, lnub - s, x, cur, kappa, log_E(s)});
    }
    rep.u_end = std::exp(lnub - s);
    if (done_h) {
      rep.finite = false;
      rep.value = std::numeric_limits<double>::infinity();
      rep.decided_by = "horizon";
      return rep;
    }
    if (converged) {
      rep.finite = true;
      rep.value = x + (std::isfinite(kappa) ? cur / kappa : 0.0);
      rep.decided_by = "convergence";
      return rep;
    }
    if (capped) {
      rep.finite = kappa > opt.kappa_min;
      rep.value = rep.finite ? x + cur / kappa : std::numeric_limits<double>::infinity();
      rep.decided_by = "trend";
      return rep;
    }
  }
}

/// Normalized coefficients of the linearized operator at x1.
struct KZCoefficients {
  double alpha11;
  double beta1;
};

inline double kz_alpha(const GasParams& p, double u) {
  return -std::expm1((p.gamma() + 1.0) * std::log(u / p.u_sonic()));
}

inline KZCoefficients kz_coefficients(const GasParams& p, const Profile1D& prof, double x1) {
  const ProfileSample s = prof.at(x1);
  const double up = profile_slope(prof, s.u, s.E);
  const double beta = (s.E - (p.gamma() + 1.0) * up * s.u) * std::pow(s.u, p.gamma() - 1.0) / p.us_pow();
  return {kz_alpha(p, s.u), beta};
}

/// Closed representation of -2 beta1 - (2m-1) d(alpha11)/dx.
inline double kz_quantity(const GasParams& p, int m, double u, double du_dx) {
  const double g = p.gamma();
  const double A = p.us_pow();
  return (du_dx / A) * ((2.0 * m * (g + 1.0) + g - 1.0) * std::pow(u, g) + 2.0 * A / u);
}

namespace detail {

/// d(alpha11)/dx at a state of a critical profile, by Richardson-extrapolated central
/// differences; u(x +- h) comes from RK4 on the autonomous critical slope equation.
inline double kz_alpha_derivative_fd(const GasParams& p, Branch b, double u, double du_dx) {
  auto f = [&](double v) { return 1.0 / dxdu_critical(p, v, b); };
  auto advance = [&](double v, double h) {
    const int n = 4;
    const double k = h / n;
    for (int i = 0; i < n; ++i) {
      const double k1 = f(v);
      const double k2 = f(v + 0.5 * k * k1);
      const double k3 = f(v + 0.5 * k * k2);
      const double k4 = f(v + k * k3);
      v += k / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return v;
  };
  const double scale = std::abs(du_dx) > 0.0 ? std::abs(u / du_dx) : 1.0;
  const double h = 1e-3 * std::min(scale, 1.0);
  auto central = [&](double hh) {
    return (kz_alpha(p, advance(u, hh)) - kz_alpha(p, advance(u, -hh))) / (2.0 * hh);
  };
  const double d1 = central(h);
  const double d2 = central(0.5 * h);
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace detail

/// -2 beta1 - (2m-1) d(alpha11)/dx from beta1 and a finite-difference derivative of alpha11.
inline double kz_quantity_direct(const GasParams& p, const Profile1D& prof, int m,
                                 const ProfileSample& s) {
  if (!prof.critical()) throw ConfigurationError("direct KZ evaluation needs a critical profile");
  const Branch b = prof.branch() == TrajectoryBranch::accelerating ? Branch::accelerating
                                                                    : Branch::decelerating;
  const double up = profile_slope(prof, s.u, s.E);
  const double beta = (s.E - (p.gamma() + 1.0) * up * s.u) * std::pow(s.u, p.gamma() - 1.0) / p.us_pow();
  return -2.0 * beta - (2.0 * m - 1.0) * detail::kz_alpha_derivative_fd(p, b, s.u, up);
}

struct KZReport {
  std::array<double, 4> q_min{};
  double lambda_L = 0.0;
  bool holds = false;
  double max_rel_discrepancy = 0.0;  // closed vs direct, interior samples; NaN if not evaluated
  std::size_t samples = 0;
};

inline KZReport kz_check(const GasParams& p, const Profile1D& prof) {
  KZReport r;
  r.q_min.fill(std::numeric_limits<double>::infinity());
  const auto& s = prof.samples();
  r.samples = s.size();
  for (const auto& smp : s) {
    const double up = profile_slope(prof, smp.u, smp.E);
    for (int m = 0; m < 4; ++m) r.q_min[m] = std::min(r.q_min[m], kz_quantity(p, m, smp.u, up));
  }
  r.lambda_L = *std::min_element(r.q_min.begin(), r.q_min.end());
  r.holds = r.lambda_L > 0.0;
  if (!prof.critical() || s.size() < 3) {
    r.max_rel_discrepancy = std::nan("");
    return r;
  }
  const Branch b = prof.branch() == TrajectoryBranch::accelerating ? Branch::accelerating
                                                                    : Branch::decelerating;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const double up = profile_slope(prof, s[i].u, s[i].E);
    const double beta =
        (s[i].E - (p.gamma() + 1.0) * up * s[i].u) * std::pow(s[i].u, p.gamma() - 1.0) / p.us_pow();
    const double da = detail::kz_alpha_derivative_fd(p, b, s[i].u, up);
    for (int m = 0; m < 4; ++m) {
      const double q = kz_quantity(p, m, s[i].u, up);
      const double d = -2.0 * beta - (2.0 * m - 1.0) * da;
      if (q != 0.0) r.max_rel_discrepancy = std::max(r.max_rel_discrepancy, std::abs(d - q) / std::abs(q));
    }
  }
  return r;
}

/// Max residual of the second-order degenerate equation for phi_bar at interior samples.
/// The first derivative of phi_bar is recovered from its samples, the second from the ODE.
inline double potential_ode_residual(const GasParams& p, const Profile1D& prof) {
  const auto& s = prof.samples();
  const double us = p.u_sonic();
  const double sgn = prof.branch() == TrajectoryBranch::decelerating ? -1.0 : 1.0;
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const double h = s[i + 1].x1 - s[i].x1;
    const double trap =
        detail::hermite_trapezoid(h, s[i].u, s[i + 1].u, s[i].du_dx, s[i + 1].du_dx);
    const double q = s[i].u + (s[i + 1].phi_bar - s[i].phi_bar - trap) / h;
    if (!(q > 0.0)) return std::numeric_limits<double>::infinity();
    const double side = q > us ? 1.0 : (q < us ? -1.0 : 0.0);
    const double root = std::sqrt(2.0 * std::max(enthalpy_H(p, q), 0.0));
    const double r = sonic_gap(p, q) * s[i].du_dx - sgn * side * root * std::pow(q, p.gamma());
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

struct LemmaClaim {
  std::string id;
  std::string statement;
  bool passed = false;
  double margin = 0.0;
  std::string detail;
};

struct LemmaReport {
  Branch branch = Branch::accelerating;
  bool on_critical = false;
  std::vector<LemmaClaim> claims;
  std::optional<Profile1D> profile;
  std::optional<LmaxReport> lmax;

  bool all_passed() const {
    return !claims.empty() &&
           std::all_of(claims.begin(), claims.end(), [](const LemmaClaim& c) { return c.passed; });
  }
  const LemmaClaim* find(const std::string& id) const {
    for (const auto& c : claims)
      if (c.id == id) return &c;
    return nullptr;
  }
};

/// Hausdorff distance between the visited states and the critical branch: normal distance of
/// each sample to the level set, together with the gap at the terminal point.
inline double coverage_distance(const GasParams& p, const Profile1D& prof, double ustar) {
  const double h2 = enthalpy_d2H_sonic(p);
  double d = 0.0;
  for (const auto& s : prof.samples()) {
    const double r = std::abs(0.5 * s.E * s.E - enthalpy_H(p, s.u));
    const double dH = enthalpy_dH(p, s.u);
    const double grad = std::hypot(s.E, dH);
    d = std::max(d, r / std::max(grad, std::sqrt(r * h2)));
  }
  if (prof.branch() == TrajectoryBranch::accelerating && std::isfinite(ustar)) {
    const auto& e = prof.samples().back();
    d = std::max(d, std::hypot(e.u - ustar, e.E));
  }
  return d;
}

/// Runs the full pipeline from the inlet and checks the monotonicity, terminal behaviour,
/// branch coverage and sonic-crossing claims, plus the terminal-location claim.
inline LemmaReport verify_lemma(const GasParams& p, const InletData& inlet,
                                const IntegratorOptions& opts = {}, const LmaxOptions& lopt = {}) {
  LemmaReport rep;
  const double us = p.u_sonic();
  if (!(inlet.u0 > 0.0)) throw DomainError("inlet requires u0 > 0");
  rep.branch = detail::branch_of(p, inlet);
  const bool acc = rep.branch == Branch::accelerating;
  if (acc && !(inlet.u0 < us)) throw ConfigurationError("accelerating inlet must be subsonic");
  if (!acc && !(inlet.u0 > us)) throw ConfigurationError("decelerating inlet must be supersonic");
  const double res = 0.5 * inlet.E0 * inlet.E0 - enthalpy_H(p, inlet.u0);
  rep.on_critical = std::abs(res) <= opts.critical_tol * detail::enthalpy_scale(p);
  const double dir = acc ? 1.0 : -1.0;
  double ustar = std::numeric_limits<double>::infinity();
  if (p.zeta0() > 1.0) ustar = find_u_star(p);

  LemmaClaim mono{"monotone", acc ? "u' > 0 on [0, l_max)" : "u' < 0 on [0, l_max)"};
  LemmaClaim term{"terminal", acc ? "u' -> 0 at l_max" : "u' -> 0 and E -> infinity at l_max"};
  LemmaClaim cover{"coverage", "visited states trace the critical branch (Hausdorff <= 1e-6)"};
  LemmaClaim sonic{"sonic_crossing", "unique sonic point l_s in (0, l_max)"};
  LemmaClaim lmax{"l_max", acc ? "l_max finite" : "l_max finite iff gamma < 2"};

  try {
    Profile1D prof = integrate_profile(p, inlet, {}, opts);
    const auto& s = prof.samples();
    // (i) strict monotonicity, sample to sample and in the slope
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < s.size(); ++i) dmin = std::min(dmin, dir * (s[i + 1].u - s[i].u));
    double smin = std::numeric_limits<double>::infinity();
    const std::size_t last = prof.termination() == Termination::l_max ? s.size() - 1 : s.size();
    for (std::size_t i = 0; i < last; ++i) smin = std::min(smin, dir * s[i].du_dx);
    mono.margin = std::min(dmin, smin);
    mono.passed = s.size() > 1 && dmin > 0.0 && smin > 0.0;

    // (ii) terminal behaviour
    const auto& e = s.back();
    if (acc) {
      const double gap = std::isfinite(ustar) ? std::abs(e.u - ustar) : std::abs(e.E);
      term.margin = std::max({std::abs(e.du_dx), std::abs(e.E), gap});
      term.passed = prof.termination() == Termination::l_max && term.margin <= 1e-6;
      term.detail = std::string("terminated by ") + to_string(prof.termination());
    } else {
      double max_slope = 0.0;
      for (const auto& smp : s) max_slope = std::max(max_slope, std::abs(smp.du_dx));
      const double ratio = std::abs(e.du_dx) / max_slope;
      const std::size_t tail = s.size() - std::max<std::size_t>(2, s.size() / 10);
      bool e_grows = true;
      for (std::size_t i = tail; i + 1 < s.size(); ++i) e_grows = e_grows && s[i + 1].E > s[i].E;
      const double e_scale = std::sqrt(p.J() / p.u_bar()) * us;
      term.margin = ratio;
      term.passed = ratio <= 1e-2 && e_grows && e.E >= 1e2 * e_scale;
      std::ostringstream d;
      d << "terminated by " << to_string(prof.termination()) << ", u'/max|u'| = " << ratio
        << ", E_end = " << e.E;
      term.detail = d.str();
    }

    // (iii) coverage
    cover.margin = coverage_distance(p, prof, ustar);
    cover.passed = rep.on_critical && cover.margin <= 1e-6;

    // (iv) unique sonic crossing, in the right order
    int crossings = 0;
    bool ordered = true;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const double a = s[i].u - us;
      const double b = s[i + 1].u - us;
      if (a * b < 0.0 || (b == 0.0 && a != 0.0)) {
        ++crossings;
        ordered = ordered && dir * (s[i + 1].u - s[i].u) > 0.0;
      }
    }
    sonic.margin = crossings;
    sonic.passed = crossings == 1 && ordered && prof.l_s().has_value();
    if (prof.l_s()) {
      std::ostringstream d;
      d << "l_s = " << *prof.l_s();
      sonic.detail = d.str();
    }
    rep.profile = std::move(prof);
  } catch (const SonicBlowup& ex) {
    for (auto* c : {&mono, &term, &cover, &sonic}) {
      c->passed = false;
      c->detail = ex.what();
      c->margin = std::nan("");
    }
  }

  if (rep.on_critical) {
    rep.lmax = locate_lmax(p, inlet, lopt);
    lmax.margin = rep.lmax->value;
    if (acc) {
      const double from_profile =
          rep.profile && rep.profile->l_max() ? *rep.profile->l_max() : std::nan("");
      lmax.passed = rep.lmax->finite &&
                    std::abs(rep.lmax->value - from_profile) <= 1e-6 * std::max(1.0, rep.lmax->value);
      std::ostringstream d;
      d << "quadrature " << rep.lmax->value << ", profile " << from_profile;
      lmax.detail = d.str();
    } else {
      const bool expect_finite = p.gamma() < 2.0;
      lmax.passed = rep.lmax->finite == expect_finite;
      if (rep.lmax->finite && rep.profile) {
        lmax.passed = lmax.passed && rep.profile->x_end() < rep.lmax->value;
      }
      lmax.detail = std::string(rep.lmax->finite ? "finite" : "infinite") + " (decided by " +
                    rep.lmax->decided_by + ")";
    }
  } else {
    lmax.passed = false;
    lmax.detail = "inlet is off the critical trajectory";
  }
  rep.claims = {mono, term, cover, sonic, lmax};
  return rep;
}

inline void write_profile_csv(std::ostream& os, const Profile1D& prof) {
  csv::Writer w(os, {"x1", "u", "E", "rho", "p", "Phi", "phi_bar"});
  for (const auto& s : prof.samples()) w.row({s.x1, s.u, s.E, s.rho, s.p, s.Phi, s.phi_bar});
}

}  // namespace sonic
