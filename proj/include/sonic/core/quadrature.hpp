#pragma once

#include <boost/math/quadrature/gauss.hpp>

namespace sonic::quad {

/// Fixed-order Gauss-Legendre integral of f over [a, b] (either orientation).
template <unsigned N = 20, class F>
double gauss_legendre(F&& f, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss<double, N>::integrate([&](double x) { return f(x); }, a, b);
}

}  // namespace sonic::quad
