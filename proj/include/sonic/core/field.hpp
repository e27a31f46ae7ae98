#pragma once

// Node values on a logically rectangular mesh. Physical coordinates are
// x = xs[i] and y = y0 + eta[j] * height[i], so a curved top boundary
// y = f(x) is a straight row in (x, eta).

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "sonic/core/csv.hpp"
#include "sonic/core/error.hpp"

namespace sonic {

struct SolveHistory {
  std::vector<double> residuals;  // one entry per outer iteration
  int iterations = 0;
  double final_residual = 0.0;
  bool converged = false;
  bool clamp_active = false;
  bool reliable = true;
};

class Field2D {
 public:
  Field2D() = default;
  Field2D(std::vector<double> xs, std::vector<double> eta, std::vector<double> height, double y0 = 0.0)
      : xs_(std::move(xs)), eta_(std::move(eta)), height_(std::move(height)), y0_(y0) {
    if (xs_.size() < 2 || eta_.size() < 2) throw DomainError("field needs at least 2x2 nodes");
    if (height_.size() != xs_.size()) throw DomainError("height must be sampled at every x node");
    values_.assign(xs_.size() * eta_.size(), 0.0);
  }

  std::size_t nx() const { return xs_.size(); }
  std::size_t ny() const { return eta_.size(); }
  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& eta() const { return eta_; }
  const std::vector<double>& height() const { return height_; }
  double y0() const { return y0_; }

  double x(std::size_t i) const { return xs_[i]; }
  double y(std::size_t i, std::size_t j) const { return y0_ + eta_[j] * height_[i]; }

  std::size_t index(std::size_t i, std::size_t j) const { return i * eta_.size() + j; }
  double& operator()(std::size_t i, std::size_t j) { return values_[index(i, j)]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[index(i, j)]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  SolveHistory& history() { return history_; }
  const SolveHistory& history() const { return history_; }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  /// Rows ordered by x then y.
  void write_csv(std::ostream& os, std::string_view xname = "x", std::string_view yname = "y",
                 std::string_view vname = "psi") const {
    csv::Writer w(os, {xname, yname, vname});
    for (std::size_t i = 0; i < nx(); ++i)
      for (std::size_t j = 0; j < ny(); ++j) w.row({x(i), y(i, j), (*this)(i, j)});
  }

 private:
  std::vector<double> xs_;
  std::vector<double> eta_;
  std::vector<double> height_;
  double y0_ = 0.0;
  std::vector<double> values_;
  SolveHistory history_;
};

namespace grid {

/// x_j = L (j/n)^q, j = 0..n.
inline std::vector<double> graded(double L, std::size_t n, double q) {
  std::vector<double> x(n + 1);
  for (std::size_t j = 0; j <= n; ++j) x[j] = L * std::pow(static_cast<double>(j) / n, q);
  x[n] = L;
  return x;
}

inline std::vector<double> uniform(double a, double b, std::size_t n) {
  std::vector<double> x(n + 1);
  for (std::size_t j = 0; j <= n; ++j) x[j] = a + (b - a) * static_cast<double>(j) / n;
  x[n] = b;
  return x;
}

/// Three-point weights for first and second derivatives at x1 on nodes x0 < x1 < x2.
struct Stencil3 {
  double d1[3];
  double d2[3];
};

inline Stencil3 central3(double x0, double x1, double x2) {
  const double hm = x1 - x0, hp = x2 - x1, s = hm + hp;
  Stencil3 st{};
  st.d1[0] = -hp / (hm * s);
  st.d1[1] = (hp - hm) / (hm * hp);
  st.d1[2] = hm / (hp * s);
  st.d2[0] = 2.0 / (hm * s);
  st.d2[1] = -2.0 / (hm * hp);
  st.d2[2] = 2.0 / (hp * s);
  return st;
}

/// Weights at x0 (one-sided) for the nodes x0, x1, x2, ordered either way.
inline Stencil3 onesided3(double x0, double x1, double x2) {
  const double a = x1 - x0, b = x2 - x0;
  Stencil3 st{};
  st.d1[1] = b / (a * (b - a));
  st.d1[2] = -a / (b * (b - a));
  st.d1[0] = -st.d1[1] - st.d1[2];
  st.d2[1] = -2.0 / (a * (b - a));
  st.d2[2] = 2.0 / (b * (b - a));
  st.d2[0] = -st.d2[1] - st.d2[2];
  return st;
}

/// Finite-difference weights at z for derivatives 0..m on arbitrary nodes (Fornberg).
/// Returns c[k][j]: weight of node j in the k-th derivative.
inline std::vector<std::vector<double>> fd_weights(double z, const std::vector<double>& x, int m) {
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(n + 1, 0.0));
  double c1 = 1.0, c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

}  // namespace grid
}  // namespace sonic
