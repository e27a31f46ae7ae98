#pragma once

// Adaptive integration with cubic Hermite dense output and terminal event location.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "sonic/core/error.hpp"
#include "sonic/core/roots.hpp"

namespace sonic::ode {

template <std::size_t N>
using State = std::array<double, N>;

struct Options {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_init = 0.0;  // 0 selects an automatic first step
  double h_max = std::numeric_limits<double>::infinity();
  double h_min = 1e-14;  // relative to max(1, |t|)
  long max_steps = 2'000'000;
};

/// One accepted node of the solution, with the right-hand side stored for Hermite output.
template <std::size_t N>
struct Node {
  double t;
  State<N> y;
  State<N> dy;
};

template <std::size_t N>
struct Result {
  std::vector<Node<N>> nodes;
  int event = -1;  // index of the terminal event that fired, -1 if t_end reached
  long rejected = 0;
};

template <std::size_t N>
using EventFn = std::function<double(double, const State<N>&)>;

/// Cubic Hermite interpolation between two nodes.
template <std::size_t N>
State<N> hermite(const Node<N>& a, const Node<N>& b, double t) {
  const double h = b.t - a.t;
  const double s = (t - a.t) / h;
  const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
  const double h10 = s * (1.0 - s) * (1.0 - s);
  const double h01 = s * s * (3.0 - 2.0 * s);
  const double h11 = s * s * (s - 1.0);
  State<N> y{};
  for (std::size_t i = 0; i < N; ++i) {
    y[i] = h00 * a.y[i] + h10 * h * a.dy[i] + h01 * b.y[i] + h11 * h * b.dy[i];
  }
  return y;
}

/// Derivative of the cubic Hermite interpolant.
template <std::size_t N>
State<N> hermite_derivative(const Node<N>& a, const Node<N>& b, double t) {
  const double h = b.t - a.t;
  const double s = (t - a.t) / h;
  const double d00 = 6.0 * s * (s - 1.0) / h;
  const double d10 = (1.0 - s) * (1.0 - 3.0 * s);
  const double d01 = -d00;
  const double d11 = s * (3.0 * s - 2.0);
  State<N> y{};
  for (std::size_t i = 0; i < N; ++i) {
    y[i] = d00 * a.y[i] + d10 * a.dy[i] + d01 * b.y[i] + d11 * b.dy[i];
  }
  return y;
}

namespace detail {

template <std::size_t N>
bool all_finite(const State<N>& y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace detail

/// Integrates y' = rhs(t, y) from t0 towards t_end (either direction) with the
/// odeint Dormand-Prince 5(4) controlled stepper.
///
/// Integration stops early at the first sign change of any event function; the
/// final node then sits on the event to within the root-finding tolerance.
/// `rhs` may throw to abort the run.
template <std::size_t N, class Rhs>
Result<N> integrate(Rhs&& rhs, double t0, const State<N>& y0, double t_end, const Options& opts,
                    const std::vector<EventFn<N>>& events = {}) {
  namespace odeint = boost::numeric::odeint;
  using Stepper = odeint::runge_kutta_dopri5<State<N>>;
  Result<N> out;
  const double dir = (t_end >= t0) ? 1.0 : -1.0;
  State<N> f0 = rhs(t0, y0);
  out.nodes.push_back({t0, y0, f0});
  if (t_end == t0) return out;

  auto system = [&rhs](const State<N>& y, State<N>& dy, double t) { dy = rhs(t, y); };
  auto controlled = odeint::make_controlled(opts.atol, opts.rtol, Stepper());
  Stepper single;

  std::vector<double> g_prev(events.size());
  for (std::size_t k = 0; k < events.size(); ++k) g_prev[k] = events[k](t0, y0);

  double h = opts.h_init;
  if (h <= 0.0) {
    double d0 = 0.0;
    double d1 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = opts.atol + opts.rtol * std::abs(y0[i]);
      d0 += (y0[i] / sc) * (y0[i] / sc);
      d1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / N);
    d1 = std::sqrt(d1 / N);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  }
  h = std::min({h, opts.h_max, std::abs(t_end - t0)});

  double t = t0;
  State<N> y = y0;
  State<N> f = f0;
  for (long step = 0; step < opts.max_steps; ++step) {
    const double remaining = std::abs(t_end - t);
    if (remaining <= 0.0) return out;
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    const double h_floor = opts.h_min * std::max(1.0, std::abs(t));
    if (h < h_floor && !last) {
      std::ostringstream msg;
      msg << "step size underflow at t=" << t << " (h=" << h << ")";
      throw IntegratorFailure(msg.str());
    }
    State<N> y_new{};
    State<N> f_new{};
    double t_try = t;
    double dt = dir * h;
    const auto res = controlled.try_step(system, y, f, t_try, y_new, f_new, dt);
    if (res == odeint::fail || !detail::all_finite(y_new) || !detail::all_finite(f_new)) {
      ++out.rejected;
      h = res == odeint::fail ? std::abs(dt) : 0.1 * h;
      continue;
    }
    const double t_new = last ? t_end : t_try;
    Node<N> a{t, y, f};
    Node<N> b{t_new, y_new, f_new};

    // Event detection on the accepted step.
    int fired = -1;
    double t_hit = t_new;
    const std::vector<double> g_start = g_prev;
    for (std::size_t k = 0; k < events.size(); ++k) {
      const double g_new = events[k](t_new, y_new);
      const bool crossed = (g_prev[k] > 0.0 && g_new <= 0.0) || (g_prev[k] < 0.0 && g_new >= 0.0);
      if (!crossed) {
        g_prev[k] = g_new;
        continue;
      }
      auto g_dense = [&](double tt) { return events[k](tt, hermite<N>(a, b, tt)); };
      double lo = std::min(t, t_new);
      double hi = std::max(t, t_new);
      double root = (g_new == 0.0) ? t_new : roots::brent(g_dense, lo, hi, 0.0);
      if (fired < 0 || dir * (root - t_hit) < 0.0) {
        fired = static_cast<int>(k);
        t_hit = root;
      }
      g_prev[k] = g_new;
    }
    if (fired >= 0) {
      if (t_hit != t_new) {
        // The interpolant only brackets the event; polish the root on the step map itself
        // so the final node satisfies the event to rounding.
        State<N> y_hit{};
        State<N> f_hit{};
        const auto& ev = events[static_cast<std::size_t>(fired)];
        auto one_step = [&](double tt) {
          single.do_step(system, y, f, t, y_hit, f_hit, tt - t);
        };
        auto g_step = [&](double tt) {
          if (tt == t) return g_start[static_cast<std::size_t>(fired)];
          one_step(tt);
          return ev(tt, y_hit);
        };
        const double g_end = ev(t_new, y_new);
        if (g_end == 0.0) {
          t_hit = t_new;
        } else {
          try {
            t_hit = roots::brent(g_step, std::min(t, t_new), std::max(t, t_new), 0.0);
          } catch (const NotFound&) {
          }
        }
        if (t_hit == t_new) {
          y_hit = y_new;
          f_hit = f_new;
        } else {
          one_step(t_hit);
        }
        b = Node<N>{t_hit, y_hit, f_hit};
      }
      if (b.t != t) out.nodes.push_back(b);
      out.event = fired;
      return out;
    }
    out.nodes.push_back(b);
    t = t_new;
    y = y_new;
    f = f_new;
    if (last) return out;
    h = std::min(std::abs(dt), opts.h_max);
  }
  throw IntegratorFailure("step budget exhausted");
}

}  // namespace sonic::ode
