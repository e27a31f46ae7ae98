#pragma once

// Thin wrappers over Boost.Math bracketing solvers that report failures as NotFound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "sonic/core/error.hpp"

namespace sonic::roots {

struct Bracket {
  double lo;
  double hi;
};

namespace detail {

// stop at full double precision, or once the bracket is narrower than xtol
struct Tolerance {
  double xtol;
  bool operator()(double a, double b) const {
    return std::abs(b - a) <= xtol ||
           boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits)(a, b);
  }
};

template <class F>
bool same_sign(F&& f, double lo, double hi, double& flo, double& fhi) {
  flo = f(lo);
  fhi = f(hi);
  return flo != 0.0 && fhi != 0.0 && (flo > 0.0) == (fhi > 0.0);
}

}  // namespace detail

/// Plain bisection. Requires f(lo) and f(hi) of opposite sign (or one zero).
template <class F>
double bisection(F&& f, double lo, double hi, double xtol = 0.0, int max_iter = 400) {
  double flo, fhi;
  if (detail::same_sign(f, lo, hi, flo, fhi)) throw NotFound("bisection: no sign change on bracket");
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  std::uintmax_t it = static_cast<std::uintmax_t>(max_iter);
  const auto r = boost::math::tools::bisect(f, lo, hi, detail::Tolerance{xtol}, it);
  return 0.5 * (r.first + r.second);
}

/// Bracketing solver with superlinear convergence (TOMS 748, same family as Brent's method).
/// Returns the bracket end with the smaller residual.
template <class F>
double brent(F&& f, double a, double b, double xtol = 0.0, int max_iter = 200) {
  double fa, fb;
  if (detail::same_sign(f, a, b, fa, fb)) throw NotFound("brent: no sign change on bracket");
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  std::uintmax_t it = static_cast<std::uintmax_t>(max_iter);
  const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, detail::Tolerance{xtol}, it);
  return std::abs(f(r.first)) <= std::abs(f(r.second)) ? r.first : r.second;
}

/// Grows `hi` geometrically until f changes sign between lo and hi.
template <class F>
Bracket expand_upward(F&& f, double lo, double hi, double factor = 2.0, int max_expand = 60) {
  const double flo = f(lo);
  for (int k = 0; k < max_expand; ++k) {
    const double fhi = f(hi);
    if ((flo > 0.0) != (fhi > 0.0) || fhi == 0.0) return {lo, hi};
    lo = hi;
    hi *= factor;
  }
  throw NotFound("expand_upward: no sign change found");
}

/// Maximiser of a unimodal function on [a, b] (golden section with parabolic steps).
template <class F>
std::pair<double, double> golden_max(F&& f, double a, double b, int bits = std::numeric_limits<double>::digits / 2) {
  const auto r = boost::math::tools::brent_find_minima([&](double x) { return -f(x); }, a, b, bits);
  return {r.first, -r.second};
}

}  // namespace sonic::roots
