#pragma once

// Finite-difference solver for the degenerate model equation
//
//   (2x - a psi_x + O1) psi_xx + O2 psi_xy + (b + O3) psi_yy - (1 + O4) psi_x + O5 psi_y = 0
//
// on Q = {0 < x < eps0, 0 < y < f(x)} with psi = 0 on x = 0, psi_y = 0 on y = 0 and
// beta1 psi_x + beta2 psi_y + psi = g on y = f(x). The region is mapped to the unit
// strip eta = y / f(x); x is graded towards the degenerate line.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "sonic/core/error.hpp"
#include "sonic/core/field.hpp"

namespace sonic {

using ScalarFn = std::function<double(double)>;
using PointFn = std::function<double(double, double)>;

/// Width eps0 and top boundary y = f(x) with f' >= omega > 0.
class KeldyshDomain {
 public:
  KeldyshDomain(double eps0, ScalarFn f, ScalarFn df, ScalarFn d2f, double omega)
      : eps0_(eps0), f_(std::move(f)), df_(std::move(df)), d2f_(std::move(d2f)), omega_(omega) {
    validate();
  }

  /// Affine top boundary f(x) = f0 + slope x.
  static KeldyshDomain linear(double eps0, double f0, double slope) {
    return KeldyshDomain(
        eps0, [=](double x) { return f0 + slope * x; }, [=](double) { return slope; },
        [](double) { return 0.0; }, slope);
  }

  /// f from equally spaced samples on [0, eps0], interpolated by a cubic B-spline.
  static KeldyshDomain from_samples(double eps0, const std::vector<double>& fs, double omega) {
    if (fs.size() < 4) throw DomainError("boundary needs at least 4 samples");
    const double h = eps0 / static_cast<double>(fs.size() - 1);
    auto spline = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
        fs.begin(), fs.end(), 0.0, h);
    for (std::size_t k = 1; k < fs.size(); ++k)
      if ((fs[k] - fs[k - 1]) / h < omega * (1.0 - 1e-12))
        throw DomainError("boundary samples violate df/dx >= omega");
    for (std::size_t k = 1; k + 1 < fs.size(); ++k)
      if (!std::isfinite((fs[k + 1] - 2.0 * fs[k] + fs[k - 1]) / (h * h)))
        throw DomainError("boundary samples have unbounded second differences");
    return KeldyshDomain(
        eps0, [spline](double x) { return (*spline)(x); },
        [spline](double x) { return spline->prime(x); },
        [spline](double x) { return spline->double_prime(x); }, omega);
  }

  double eps0() const { return eps0_; }
  double omega() const { return omega_; }
  double f(double x) const { return f_(x); }
  double df(double x) const { return df_(x); }
  double d2f(double x) const { return d2f_(x); }

 private:
  void validate() const {
    if (!(eps0_ > 0.0) || !std::isfinite(eps0_)) throw DomainError("eps0 must be positive");
    if (!(omega_ > 0.0)) throw DomainError("omega must be positive");
    if (!(f_(0.0) > 0.0)) throw DomainError("f(0) must be positive");
    constexpr int n = 1024;
    for (int k = 0; k <= n; ++k) {
      const double x = eps0_ * k / n;
      const double d = df_(x), dd = d2f_(x), v = f_(x);
      if (!std::isfinite(v) || !std::isfinite(d) || !std::isfinite(dd))
        throw DomainError("f is not C^{1,1} on [0, eps0]");
      if (d < omega_ * (1.0 - 1e-9)) {
        std::ostringstream msg;
        msg << "df/dx = " << d << " < omega = " << omega_ << " at x = " << x;
        throw DomainError(msg.str());
      }
    }
  }

  double eps0_;
  ScalarFn f_, df_, d2f_;
  double omega_;
};

/// a, b, perturbations O1..O5 (empty means zero) and the oblique coefficients on the top.
struct KeldyshCoefficients {
  double a = 4.0;
  double b = 1.0;
  PointFn O[5];
  PointFn beta1 = [](double, double) { return 1.0; };
  PointFn beta2 = [](double, double) { return 0.0; };
  double lambda = 1.0;
  double N = 1.0;

  double O_at(int i, double x, double y) const { return O[i] ? O[i](x, y) : 0.0; }
};

struct CoefficientCheck {
  bool ok = true;
  double worst_O_ratio = 0.0;  // max of the O-term quotients
  double min_beta1 = std::numeric_limits<double>::infinity();
  double max_abs_beta2 = 0.0;
  std::string message;
};

/// Samples the perturbation bounds and the obliqueness of the top condition.
inline CoefficientCheck check_coefficients(const KeldyshDomain& d, const KeldyshCoefficients& c,
                                           int samples = 64) {
  CoefficientCheck r;
  if (!(c.a > 0.0) || !(c.b > 0.0) || !(c.lambda > 0.0) || !(c.N > 0.0)) {
    r.ok = false;
    r.message = "a, b, lambda and N must be positive";
    return r;
  }
  auto note = [&](const std::string& s) {
    if (r.ok) r.message = s;
    r.ok = false;
  };
  for (int i = 1; i <= samples; ++i) {
    const double x = d.eps0() * std::pow(static_cast<double>(i) / samples, 2.0);
    const double h = 1e-6 * x;
    for (int j = 0; j <= samples; ++j) {
      const double y = d.f(x) * (0.5 + j) / (samples + 1.0);
      for (int k = 0; k < 5; ++k) {
        if (!c.O[k]) continue;
        const double v = c.O[k](x, y);
        const double gx = (c.O[k](x + h, y) - c.O[k](x - h, y)) / (2 * h);
        const double gy = (c.O[k](x, y + h) - c.O[k](x, y - h)) / (2 * h);
        const double grad = std::hypot(gx, gy);
        const double q0 = k == 0 ? std::abs(v) / (x * x) : std::abs(v) / x;
        const double q1 = k == 0 ? grad / x : grad;
        r.worst_O_ratio = std::max({r.worst_O_ratio, q0, q1});
      }
    }
    const double yt = d.f(x);
    r.min_beta1 = std::min(r.min_beta1, c.beta1(x, yt));
    r.max_abs_beta2 = std::max(r.max_abs_beta2, std::abs(c.beta2(x, yt)));
  }
  // finite differences of an exact bound may overshoot N by rounding
  if (r.worst_O_ratio > c.N * (1.0 + 1e-6)) note("perturbation terms exceed the bound N");
  if (r.min_beta1 < c.lambda) note("beta1 < lambda on the top boundary");
  if (r.max_abs_beta2 > 1.0 / c.lambda) note("|beta2| > 1/lambda on the top boundary");
  return r;
}

/// Data closing the problem: the top condition (oblique with right-hand side g, or a
/// Dirichlet trace) and the Dirichlet values on x = eps0.
struct KeldyshBoundary {
  enum class Top { oblique, dirichlet };
  Top top = Top::oblique;
  ScalarFn top_data;    // g(x), or the trace when top == dirichlet; empty means zero
  ScalarFn right_data;  // psi(eps0, y); empty means zero
};

struct KeldyshOptions {
  std::size_t nx = 128;
  std::size_t ny = 128;
  double grading = 2.0;
  double damping = 0.5;
  int max_iterations = 400;
  double residual_tol = 1e-9;  // relative to max |psi|
  double clamp = 1e-3;          // principal coefficient kept >= clamp * 2x
  int patience = 20;
  bool validate = true;
};

namespace detail {

struct KeldyshAssembler {
  const KeldyshDomain& dom;
  const KeldyshCoefficients& co;
  const KeldyshBoundary& bc;
  const KeldyshOptions& opt;
  Field2D& F;
  std::size_t nx, ny;
  double deta;

  KeldyshAssembler(const KeldyshDomain& d, const KeldyshCoefficients& c, const KeldyshBoundary& b,
                   const KeldyshOptions& o, Field2D& field)
      : dom(d), co(c), bc(b), opt(o), F(field), nx(field.nx()), ny(field.ny()) {
    deta = field.eta()[1] - field.eta()[0];
  }

  std::size_t id(std::size_t i, std::size_t j) const { return i * ny + j; }

  // d/deta at node j, with the mirror image across eta = 0
  double d_eta(const std::vector<double>& v, std::size_t i, std::size_t j) const {
    if (j == 0) return 0.0;
    if (j == ny - 1)
      return (3.0 * v[id(i, j)] - 4.0 * v[id(i, j - 1)] + v[id(i, j - 2)]) / (2.0 * deta);
    return (v[id(i, j + 1)] - v[id(i, j - 1)]) / (2.0 * deta);
  }

  /// Physical psi_x at a node, central in the interior.
  double psi_x(const std::vector<double>& v, std::size_t i, std::size_t j) const {
    const auto& xs = F.xs();
    double dx;
    if (i == 0) {
      const auto st = grid::onesided3(xs[0], xs[1], xs[2]);
      dx = st.d1[0] * v[id(0, j)] + st.d1[1] * v[id(1, j)] + st.d1[2] * v[id(2, j)];
    } else if (i == nx - 1) {
      const auto st = grid::onesided3(xs[i], xs[i - 1], xs[i - 2]);
      dx = st.d1[0] * v[id(i, j)] + st.d1[1] * v[id(i - 1, j)] + st.d1[2] * v[id(i - 2, j)];
    } else {
      const auto st = grid::central3(xs[i - 1], xs[i], xs[i + 1]);
      dx = st.d1[0] * v[id(i - 1, j)] + st.d1[1] * v[id(i, j)] + st.d1[2] * v[id(i + 1, j)];
    }
    const double x = xs[i];
    const double g = dom.df(x) / dom.f(x);
    return dx - F.eta()[j] * g * d_eta(v, i, j);
  }

  double principal(const std::vector<double>& v, std::size_t i, std::size_t j, bool& clamped) const {
    const double x = F.x(i), y = F.y(i, j);
    const double A = 2.0 * x - co.a * psi_x(v, i, j) + co.O_at(0, x, y);
    const double floor = opt.clamp * 2.0 * x;
    if (A < floor) {
      clamped = true;
      return floor;
    }
    return A;
  }

  struct System {
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs;
    bool clamped = false;
  };

  System build(const std::vector<double>& v) const {
    System s;
    const std::size_t n = nx * ny;
    s.rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    s.trip.reserve(n * 10);
    const auto& xs = F.xs();
    const auto& eta = F.eta();
    const double fR = dom.f(xs[nx - 1]);
    auto add = [&](std::size_t r, std::size_t c, double w) {
      s.trip.emplace_back(static_cast<int>(r), static_cast<int>(c), w);
    };
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        const std::size_t r = id(i, j);
        if (i == 0) {
          add(r, r, 1.0);
          continue;
        }
        if (i == nx - 1) {
          add(r, r, 1.0);
          s.rhs[r] = bc.right_data ? bc.right_data(eta[j] * fR) : 0.0;
          continue;
        }
        const double x = xs[i];
        const double fx = dom.f(x), dfx = dom.df(x);
        if (j == ny - 1) {
          const double gdata = bc.top_data ? bc.top_data(x) : 0.0;
          if (bc.top == KeldyshBoundary::Top::dirichlet) {
            add(r, r, 1.0);
            s.rhs[r] = gdata;
            continue;
          }
          const double b1 = co.beta1(x, fx), b2 = co.beta2(x, fx);
          const double ce = (b2 - b1 * dfx) / fx;
          const double hx = x - xs[i - 1];
          add(r, r, 1.0 + b1 / hx + ce / deta);
          add(r, id(i - 1, j), -b1 / hx);
          add(r, id(i, j - 1), -ce / deta);
          s.rhs[r] = gdata;
          continue;
        }
        const double y = eta[j] * fx;
        const double g = dfx / fx, k2 = dom.d2f(x) / fx;
        const double A = principal(v, i, j, s.clamped);
        const double B = co.b + co.O_at(2, x, y);
        const double C = 1.0 + co.O_at(3, x, y);
        const double O2 = co.O_at(1, x, y), O5 = co.O_at(4, x, y);
        const double e = eta[j];
        const double cxx = A;
        const double cxe = -2.0 * A * e * g + O2 / fx;
        const double cee = A * e * e * g * g - O2 * e * g / fx + B / (fx * fx);
        const double ce = A * e * (2.0 * g * g - k2) - O2 * g / fx + C * e * g + O5 / fx;

        const auto st = grid::central3(xs[i - 1], xs[i], xs[i + 1]);
        for (int a = 0; a < 3; ++a) add(r, id(i - 1 + a, j), cxx * st.d2[a]);
        // -C psi_x upwinded against the flow from the degenerate line
        if (C >= 0.0) {
          const double h = x - xs[i - 1];
          add(r, r, -C / h);
          add(r, id(i - 1, j), C / h);
        } else {
          const double h = xs[i + 1] - x;
          add(r, id(i + 1, j), -C / h);
          add(r, r, C / h);
        }
        const double ee = 1.0 / (deta * deta);
        if (j == 0) {
          // mirror node j = -1 equals j = 1; odd eta-derivatives vanish
          add(r, r, -2.0 * cee * ee);
          add(r, id(i, 1), 2.0 * cee * ee);
          continue;
        }
        add(r, id(i, j - 1), cee * ee);
        add(r, r, -2.0 * cee * ee);
        add(r, id(i, j + 1), cee * ee);
        const double he = 0.5 / deta;
        add(r, id(i, j + 1), ce * he);
        add(r, id(i, j - 1), -ce * he);
        for (int a = 0; a < 3; a += 2) {
          const std::size_t ii = i - 1 + a;
          add(r, id(ii, j + 1), cxe * st.d1[a] * he);
          add(r, id(ii, j - 1), -cxe * st.d1[a] * he);
        }
        if (st.d1[1] != 0.0) {
          add(r, id(i, j + 1), cxe * st.d1[1] * he);
          add(r, id(i, j - 1), -cxe * st.d1[1] * he);
        }
      }
    }
    return s;
  }
};

}  // namespace detail

/// Picard iteration on the principal coefficient with under-relaxation; each step is a
/// sparse LU solve of the frozen linear problem.
inline Field2D solve_model(const KeldyshDomain& dom, const KeldyshCoefficients& co,
                           const KeldyshOptions& opt, const KeldyshBoundary& bc = {},
                           const Field2D* initial = nullptr) {
  if (opt.nx < 4 || opt.ny < 4) throw DomainError("grid needs at least 4 cells per direction");
  if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");
  if (!(opt.grading >= 1.0)) throw DomainError("grading exponent must be >= 1");
  if (opt.validate) {
    const auto chk = check_coefficients(dom, co);
    if (!chk.ok) throw ConfigurationError(chk.message);
  }
  auto xs = grid::graded(dom.eps0(), opt.nx, opt.grading);
  std::vector<double> height(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) height[i] = dom.f(xs[i]);
  Field2D F(xs, grid::uniform(0.0, 1.0, opt.ny), height);
  if (initial) {
    if (initial->nx() != F.nx() || initial->ny() != F.ny())
      throw DomainError("initial guess has a different grid");
    F.values() = initial->values();
  }
  detail::KeldyshAssembler as(dom, co, bc, opt, F);
  const auto n = static_cast<Eigen::Index>(F.values().size());
  Eigen::SparseMatrix<double> M(n, n);
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analysed = false;

  auto& hist = F.history();
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int it = 0;; ++it) {
    auto sys = as.build(F.values());
    M.setFromTriplets(sys.trip.begin(), sys.trip.end());
    Eigen::Map<const Eigen::VectorXd> v(F.values().data(), n);
    const Eigen::VectorXd defect = M * v - sys.rhs;
    double res = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) res = std::max(res, std::abs(defect[k] / M.coeff(k, k)));
    const double scale = F.max_abs();
    const double rel = scale > 0.0 ? res / scale : res;
    hist.residuals.push_back(rel);
    hist.iterations = it;
    hist.final_residual = rel;
    hist.clamp_active = sys.clamped;
    if (rel <= opt.residual_tol || res == 0.0) {
      hist.converged = true;
      hist.reliable = !sys.clamped;
      break;
    }
    if (rel < best) {
      best = rel;
      stall = 0;
    } else if (++stall >= opt.patience) {
      std::ostringstream msg;
      msg << "Picard iteration diverged: residual " << rel << " not below " << best << " for "
          << opt.patience << " iterations";
      throw SolverFailure(msg.str());
    }
    if (it >= opt.max_iterations) {
      std::ostringstream msg;
      msg << "Picard iteration did not reach " << opt.residual_tol << " in " << opt.max_iterations
          << " iterations (residual " << rel << ")";
      throw SolverFailure(msg.str());
    }
    if (!analysed) {
      lu.analyzePattern(M);
      analysed = true;
    }
    lu.factorize(M);
    if (lu.info() != Eigen::Success) throw SolverFailure("sparse LU factorization failed: " + lu.lastErrorMessage());
    const Eigen::VectorXd next = lu.solve(sys.rhs);
    if (!next.allFinite()) throw SolverFailure("linear solve produced non-finite values");
    auto& vals = F.values();
    for (Eigen::Index k = 0; k < n; ++k) vals[k] = (1.0 - opt.damping) * vals[k] + opt.damping * next[k];
    for (std::size_t j = 0; j < F.ny(); ++j) F(0, j) = 0.0;  // LU leaves rounding residue
  }
  return F;
}

// ---------------------------------------------------------------------------------------
// diagnostics

/// psi_xx at every node: central differences inside, one-sided three-point at x = 0,
/// x = eps0 and on the top row.
inline Field2D second_derivative_xx(const Field2D& F, const KeldyshDomain& dom) {
  Field2D D(F.xs(), F.eta(), F.height(), F.y0());
  const std::size_t nx = F.nx(), ny = F.ny();
  const auto& xs = F.xs();
  const auto& eta = F.eta();
  const double de = eta[1] - eta[0];
  auto v = [&](std::size_t i, std::size_t j) { return F(i, j); };
  for (std::size_t i = 0; i < nx; ++i) {
    grid::Stencil3 st;
    std::size_t i0, i1, i2;
    if (i == 0) {
      st = grid::onesided3(xs[0], xs[1], xs[2]);
      i0 = 0, i1 = 1, i2 = 2;
    } else if (i == nx - 1) {
      st = grid::onesided3(xs[i], xs[i - 1], xs[i - 2]);
      i0 = i, i1 = i - 1, i2 = i - 2;
    } else {
      st = grid::central3(xs[i - 1], xs[i], xs[i + 1]);
      i0 = i - 1, i1 = i, i2 = i + 1;
    }
    const std::size_t idx[3] = {i0, i1, i2};
    const double x = xs[i], fx = dom.f(x), g = dom.df(x) / fx, k2 = dom.d2f(x) / fx;
    auto eta_derivs = [&](std::size_t ii, std::size_t j, double& d1, double& d2) {
      if (j == 0) {
        d1 = 0.0;
        d2 = 2.0 * (v(ii, 1) - v(ii, 0)) / (de * de);
      } else if (j == ny - 1) {
        d1 = (3.0 * v(ii, j) - 4.0 * v(ii, j - 1) + v(ii, j - 2)) / (2.0 * de);
        d2 = (2.0 * v(ii, j) - 5.0 * v(ii, j - 1) + 4.0 * v(ii, j - 2) - v(ii, j - 3)) / (de * de);
      } else {
        d1 = (v(ii, j + 1) - v(ii, j - 1)) / (2.0 * de);
        d2 = (v(ii, j + 1) - 2.0 * v(ii, j) + v(ii, j - 1)) / (de * de);
      }
    };
    for (std::size_t j = 0; j < ny; ++j) {
      double Pxx = 0.0, Pxe = 0.0;
      for (int a = 0; a < 3; ++a) {
        Pxx += st.d2[a] * v(idx[a], j);
        double d1, d2;
        eta_derivs(idx[a], j, d1, d2);
        Pxe += st.d1[a] * d1;
      }
      double Pe, Pee;
      eta_derivs(i, j, Pe, Pee);
      const double e = eta[j];
      D(i, j) = Pxx - 2.0 * e * g * Pxe + e * e * g * g * Pee + e * (2.0 * g * g - k2) * Pe;
    }
  }
  return D;
}

/// Bilinear interpolation of nodal values at the physical point (x, y).
inline double interpolate(const Field2D& D, const KeldyshDomain& dom, double x, double y) {
  const auto& xs = D.xs();
  if (x < xs.front() || x > xs.back()) throw DomainError("x outside the field");
  const double e = y / dom.f(x);
  if (e < -1e-12 || e > 1.0 + 1e-12) throw DomainError("y outside the field");
  const std::size_t i = std::min<std::size_t>(
      static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1, xs.size() - 2);
  const double tx = (x - xs[i]) / (xs[i + 1] - xs[i]);
  const double de = D.eta()[1] - D.eta()[0];
  const double s = std::clamp(e, 0.0, 1.0) / de;
  const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(s), D.ny() - 2);
  const double ty = s - static_cast<double>(j);
  return (1 - tx) * ((1 - ty) * D(i, j) + ty * D(i, j + 1)) + tx * ((1 - ty) * D(i + 1, j) + ty * D(i + 1, j + 1));
}

struct TraceRow {
  double y = 0.0;
  bool corner_contaminated = false;
  std::vector<double> x;
  std::vector<double> psi_xx;
  std::vector<double> richardson;  // 2 T(x/2) - T(x)
  double limit = std::numeric_limits<double>::quiet_NaN();
  double last_change = std::numeric_limits<double>::quiet_NaN();  // relative, finest two estimates
};

struct SonicScan {
  std::vector<TraceRow> rows;
};

struct ScanOptions {
  // grid nodes required inside (0, x_k]; with fewer the first-order x error shows up
  // as a drift of psi_xx that Richardson extrapolation mistakes for the limit
  int min_nodes = 32;
  int min_levels = 3;
};

/// Levels x_k = eps0 2^-k resolved by the grid.
inline std::vector<double> scan_levels(const Field2D& F, const ScanOptions& opt = {}) {
  const double eps0 = F.xs().back();
  if (F.nx() <= static_cast<std::size_t>(opt.min_nodes)) throw DomainError("insufficient grading: grid too coarse");
  const double xmin = F.xs()[static_cast<std::size_t>(opt.min_nodes)];
  std::vector<double> xk;
  for (int k = 1; k < 60; ++k) {
    const double x = eps0 * std::ldexp(1.0, -k);
    if (x < xmin) break;
    xk.push_back(x);
  }
  if (static_cast<int>(xk.size()) < opt.min_levels) {
    std::ostringstream msg;
    msg << "insufficient grading to resolve " << opt.min_levels << " levels x_k = eps0 2^-k (finest node spacing "
        << xmin << ")";
    throw DomainError(msg.str());
  }
  return xk;
}

namespace detail {
inline void richardson_fill(std::vector<double>& T, std::vector<double>& R, double& limit, double& change) {
  R.clear();
  for (std::size_t k = 0; k + 1 < T.size(); ++k) R.push_back(2.0 * T[k + 1] - T[k]);
  limit = R.empty() ? T.back() : R.back();
  change = R.size() >= 2 ? std::abs(R.back() - R[R.size() - 2]) / std::max(std::abs(R.back()), 1e-300)
                         : std::numeric_limits<double>::quiet_NaN();
}
}  // namespace detail

/// psi_xx(x_k, y) for x_k = eps0 2^-k with Richardson limits assuming a linear error in x.
inline SonicScan sonic_derivative_scan(const Field2D& F, const KeldyshDomain& dom, const std::vector<double>& ys,
                                       const ScanOptions& opt = {}) {
  const auto D = second_derivative_xx(F, dom);
  const auto xk = scan_levels(F, opt);
  const double f0 = dom.f(0.0);
  const double cell = f0 * (F.eta()[1] - F.eta()[0]);
  SonicScan scan;
  for (double y : ys) {
    TraceRow row;
    row.y = y;
    row.corner_contaminated = y > f0 - cell;
    if (y < 0.0 || y > f0) throw DomainError("scan ordinate outside [0, f(0)]");
    for (double x : xk) {
      row.x.push_back(x);
      row.psi_xx.push_back(interpolate(D, dom, x, std::min(y, dom.f(x))));
    }
    detail::richardson_fill(row.psi_xx, row.richardson, row.limit, row.last_change);
    scan.rows.push_back(std::move(row));
  }
  return scan;
}

struct CornerPath {
  std::string name;
  std::vector<double> x, y, psi_xx, richardson;
  double limit = std::numeric_limits<double>::quiet_NaN();
  double last_change = std::numeric_limits<double>::quiet_NaN();
};

struct CornerProbe {
  CornerPath interior;  // y = f(0) - c x^(1/4)
  CornerPath boundary;  // y = f(x) - c x^2
  double gap = 0.0;
};

struct CornerOptions {
  double c_interior = 1.0;
  double c_boundary = 1.0;
  ScanOptions scan;
};

/// psi_xx along two node sequences converging to P0 = (0, f(0)).
inline CornerProbe corner_probe(const Field2D& F, const KeldyshDomain& dom, const CornerOptions& opt = {}) {
  const auto D = second_derivative_xx(F, dom);
  const auto xk = scan_levels(F, opt.scan);
  const double f0 = dom.f(0.0);
  CornerProbe p;
  p.interior.name = "interior";
  p.boundary.name = "boundary";
  for (double x : xk) {
    const double yi = std::max(0.0, f0 - opt.c_interior * std::pow(x, 0.25));
    const double yb = std::max(0.0, dom.f(x) - opt.c_boundary * x * x);
    p.interior.x.push_back(x);
    p.interior.y.push_back(yi);
    p.interior.psi_xx.push_back(interpolate(D, dom, x, yi));
    p.boundary.x.push_back(x);
    p.boundary.y.push_back(yb);
    p.boundary.psi_xx.push_back(interpolate(D, dom, x, yb));
  }
  for (auto* path : {&p.interior, &p.boundary})
    detail::richardson_fill(path->psi_xx, path->richardson, path->limit, path->last_change);
  p.gap = std::abs(p.interior.limit - p.boundary.limit);
  return p;
}

struct BoundChecks {
  double min_psi = 0.0;
  double L = 0.0;        // max psi / x^2
  double mu = 0.0;       // max(0, -min psi_x / x)
  double delta = 0.0;    // 2 - a max psi_x / x
  double min_ratio = 0.0, max_ratio = 0.0;  // extremes of psi_x / x
  bool positivity = true;   // psi >= 0
  bool gradient = true;     // -mu <= psi_x / x <= (2 - delta) / a with delta > 0
  bool quadratic = true;    // 0 <= psi <= L x^2 with L finite
  bool monotone = true;     // 0 <= psi_x / x <= (2 - delta) / a
  bool all() const { return positivity && gradient && quadratic && monotone; }
};

/// Measured constants of the positivity, gradient-ratio and quadratic-growth bounds.
/// `tol` absorbs rounding relative to the field magnitude.
inline BoundChecks verify_bounds(const Field2D& F, const KeldyshDomain& dom, const KeldyshCoefficients& co,
                                 double tol = 1e-8) {
  BoundChecks r;
  const double scale = std::max(F.max_abs(), std::numeric_limits<double>::min());
  KeldyshOptions o;
  KeldyshBoundary b;
  Field2D copy = F;
  detail::KeldyshAssembler as(dom, co, b, o, copy);
  double min_psi = 0.0, L = 0.0;
  double rmin = std::numeric_limits<double>::infinity(), rmax = -rmin;
  // the column x = eps0 carries closure data and lies outside Q
  for (std::size_t i = 1; i + 1 < F.nx(); ++i) {
    const double x = F.x(i);
    for (std::size_t j = 0; j < F.ny(); ++j) {
      const double v = F(i, j);
      min_psi = std::min(min_psi, v);
      L = std::max(L, v / (x * x));
      const double ratio = as.psi_x(F.values(), i, j) / x;
      rmin = std::min(rmin, ratio);
      rmax = std::max(rmax, ratio);
    }
  }
  const double ratio_scale = std::max(scale / (dom.eps0() * dom.eps0()), 1e-300);
  r.min_psi = min_psi;
  r.L = L;
  r.min_ratio = rmin;
  r.max_ratio = rmax;
  r.mu = std::max(0.0, -rmin);
  r.delta = 2.0 - co.a * rmax;
  r.positivity = min_psi >= -tol * scale;
  r.quadratic = r.positivity && std::isfinite(L);
  r.gradient = std::isfinite(rmin) && r.delta > 0.0;
  r.monotone = rmin >= -tol * ratio_scale && r.delta > 0.0;
  return r;
}

struct SonicDiagnostics {
  SonicScan trace;
  CornerProbe corner;
  BoundChecks bounds;
};

inline SonicDiagnostics sonic_diagnostics(const Field2D& F, const KeldyshDomain& dom, const KeldyshCoefficients& co,
                                          const std::vector<double>& ys, const CornerOptions& copt = {}) {
  return {sonic_derivative_scan(F, dom, ys, copt.scan), corner_probe(F, dom, copt), verify_bounds(F, dom, co)};
}

// ---------------------------------------------------------------------------------------
// canned problems

struct KeldyshProblem {
  KeldyshDomain domain;
  KeldyshCoefficients coeffs;
  KeldyshBoundary bc;
};

/// psi = x^2/(2a) imposed through Dirichlet data on the top and at x = eps0.
inline KeldyshProblem manufactured_problem(double a = 4.0, double b = 1.0, double eps0 = 0.2) {
  KeldyshProblem p{KeldyshDomain::linear(eps0, 1.0, 1.0), {}, {}};
  p.coeffs.a = a;
  p.coeffs.b = b;
  p.bc.top = KeldyshBoundary::Top::dirichlet;
  p.bc.top_data = [a](double x) { return x * x / (2.0 * a); };
  p.bc.right_data = [a, eps0](double) { return eps0 * eps0 / (2.0 * a); };
  return p;
}

/// Small admissible perturbations, homogeneous oblique top condition and positive data
/// theta eps0^2/(2a) (1 - (y/f(eps0))^2) on x = eps0.
inline KeldyshProblem theorem_scenario(double a = 4.0, double b = 1.0, double eps0 = 0.2, double theta = 0.9) {
  KeldyshProblem p{KeldyshDomain::linear(eps0, 1.0, 1.0), {}, {}};
  auto& c = p.coeffs;
  c.a = a;
  c.b = b;
  c.O[0] = [](double x, double) { return 0.1 * x * x; };
  c.O[1] = [](double x, double y) { return 0.05 * x * y; };
  c.O[2] = [](double x, double) { return 0.05 * x; };
  c.O[3] = [](double x, double) { return 0.05 * x; };
  c.O[4] = [](double x, double) { return 0.02 * x; };
  c.beta1 = [](double, double) { return 1.0; };
  c.beta2 = [](double, double) { return 1.0; };
  c.lambda = 1.0;
  c.N = 1.0;
  const double top = p.domain.f(eps0);
  p.bc.right_data = [=](double y) {
    const double t = y / top;
    return theta * eps0 * eps0 / (2.0 * a) * (1.0 - t * t);
  };
  return p;
}

}  // namespace sonic
