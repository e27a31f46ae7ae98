#pragma once

// Linear solver for L w = alpha11 w_11 + w_22 + beta1 w_1 = f on the channel
// (0, L) x (-1, 1). alpha11 > 0 upstream of the sonic line x1 = l_s and < 0 downstream.
//
// Elliptic nodes: central w_11. Hyperbolic nodes: four-point backward w_11, so the
// downstream part is an implicit march and needs no outlet condition. beta1 w_1 uses
// the three-point backward difference when beta1 <= 0 (the sign the KZ inequality forces).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "sonic/core/csv.hpp"
#include "sonic/core/error.hpp"
#include "sonic/core/field.hpp"
#include "sonic/core/quadrature.hpp"
#include "sonic/profile_1d.hpp"

namespace sonic {

/// Channel (0, L) x (-1, 1) with n1 x n2 nodes.
struct ChannelDomain {
  double L = 1.0;
  std::size_t n1 = 65;
  std::size_t n2 = 65;
};

enum class StencilKind { elliptic, sonic, hyperbolic };

inline const char* to_string(StencilKind k) {
  switch (k) {
    case StencilKind::elliptic: return "elliptic";
    case StencilKind::sonic: return "sonic";
    case StencilKind::hyperbolic: return "hyperbolic";
  }
  return "?";
}

class MixedOperatorSpec {
 public:
  /// Coefficient samples at the x1 nodes. Nodes within 1e-12 of l_s get alpha11 = 0.
  /// kz_lambda: min over nodes and m = 0..3 of -2 beta1 - (2m-1) alpha11'; estimated from
  /// the samples when not supplied.
  MixedOperatorSpec(std::vector<double> x1, std::vector<double> alpha11, std::vector<double> beta1,
                    double l_s, std::size_t n2, std::optional<double> kz_lambda = std::nullopt)
      : x1_(std::move(x1)), alpha_(std::move(alpha11)), beta_(std::move(beta1)), l_s_(l_s), n2_(n2) {
    const std::size_t n = x1_.size();
    if (n < 5 || alpha_.size() != n || beta_.size() != n) throw DomainError("coefficient samples need >= 5 nodes of equal length");
    if (n2_ < 3) throw DomainError("need at least 3 nodes across the channel");
    if (x1_.front() != 0.0) throw DomainError("x1 grid must start at 0");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x1_[i] > x1_[i - 1])) throw DomainError("x1 grid must increase");
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(alpha_[i]) || !std::isfinite(beta_[i])) throw DomainError("non-finite coefficient sample");
      if (std::abs(x1_[i] - l_s_) <= 1e-12) {
        alpha_[i] = 0.0;
        sonic_ = i;
        continue;
      }
      const bool upstream = x1_[i] < l_s_;
      if (upstream && !(alpha_[i] > 0.0)) {
        std::ostringstream msg;
        msg << "alpha11 = " << alpha_[i] << " at x1 = " << x1_[i] << " upstream of l_s = " << l_s_;
        throw DomainError(msg.str());
      }
      if (!upstream && !(alpha_[i] < 0.0)) {
        std::ostringstream msg;
        msg << "alpha11 = " << alpha_[i] << " at x1 = " << x1_[i] << " downstream of l_s = " << l_s_;
        throw DomainError(msg.str());
      }
    }
    if (sonic_ && *sonic_ < 3) throw DomainError("need at least 3 elliptic columns before the sonic line");
    kz_lambda_ = kz_lambda ? *kz_lambda : sampled_kz_lambda();
  }

  const std::vector<double>& x1() const { return x1_; }
  const std::vector<double>& alpha11() const { return alpha_; }
  const std::vector<double>& beta1() const { return beta_; }
  double l_s() const { return l_s_; }
  double L() const { return x1_.back(); }
  std::size_t n1() const { return x1_.size(); }
  std::size_t n2() const { return n2_; }
  std::optional<std::size_t> sonic_column() const { return sonic_; }
  bool transonic() const { return L() > l_s_; }
  double kz_lambda() const { return kz_lambda_; }
  bool kz_holds() const { return kz_lambda_ > 0.0; }

  StencilKind kind(std::size_t i) const {
    if (alpha_[i] > 0.0) return StencilKind::elliptic;
    if (alpha_[i] < 0.0) return StencilKind::hyperbolic;
    return StencilKind::sonic;
  }

  void write_csv(std::ostream& os) const {
    csv::Writer w(os, {"x1", "alpha11", "beta1"});
    for (std::size_t i = 0; i < n1(); ++i) w.row({x1_[i], alpha_[i], beta_[i]});
  }

 private:
  double sampled_kz_lambda() const {
    double lam = std::numeric_limits<double>::infinity();
    const std::size_t n = x1_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = i == 0 ? 0 : (i + 1 == n ? n - 3 : i - 1);
      const auto w = grid::fd_weights(x1_[i], {x1_[a], x1_[a + 1], x1_[a + 2]}, 1);
      const double da = w[1][0] * alpha_[a] + w[1][1] * alpha_[a + 1] + w[1][2] * alpha_[a + 2];
      for (int m = 0; m < 4; ++m) lam = std::min(lam, -2.0 * beta_[i] - (2.0 * m - 1.0) * da);
    }
    return lam;
  }

  std::vector<double> x1_, alpha_, beta_;
  double l_s_;
  std::size_t n2_;
  std::optional<std::size_t> sonic_;
  double kz_lambda_ = 0.0;
};

/// x1 nodes on [0, L] with l_s itself a node when 0 < l_s < L.
inline std::vector<double> channel_nodes(double L, std::size_t n1, std::optional<double> l_s) {
  if (n1 < 9) throw DomainError("need at least 9 nodes along the channel");
  if (!l_s || *l_s >= L) return grid::uniform(0.0, L, n1 - 1);
  const std::size_t cells = n1 - 1;
  std::size_t ne = static_cast<std::size_t>(std::lround(cells * (*l_s / L)));
  ne = std::clamp<std::size_t>(ne, 4, cells - 4);
  auto a = grid::uniform(0.0, *l_s, ne);
  auto b = grid::uniform(*l_s, L, cells - ne);
  a.insert(a.end(), b.begin() + 1, b.end());
  return a;
}

/// Samples alpha11 and beta1 of a profile at the channel nodes.
inline MixedOperatorSpec build_operator(const Profile1D& prof, const ChannelDomain& dom) {
  const auto& p = prof.params();
  if (!(dom.L > 0.0)) throw DomainError("channel length must be positive");
  if (prof.x_begin() > 0.0 || dom.L > prof.x_end()) {
    std::ostringstream msg;
    msg << "profile spans [" << prof.x_begin() << ", " << prof.x_end() << "], not [0, " << dom.L << "]";
    throw DomainError(msg.str());
  }
  std::optional<double> ls = prof.l_s();
  if (ls && std::abs(*ls - dom.L) <= 1e-12) throw DomainError("channel must not end on the sonic line");
  if (prof.branch() == TrajectoryBranch::decelerating && ls && *ls < dom.L)
    throw DomainError("decelerating profile: hyperbolic inlet region is not supported");
  const auto x = channel_nodes(dom.L, dom.n1, ls);
  std::vector<double> al(x.size()), be(x.size());
  double lam = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto c = kz_coefficients(p, prof, x[i]);
    al[i] = c.alpha11;
    be[i] = c.beta1;
    const auto s = prof.at(x[i]);
    const double up = profile_slope(prof, s.u, s.E);
    for (int m = 0; m < 4; ++m) lam = std::min(lam, kz_quantity(p, m, s.u, up));
  }
  return MixedOperatorSpec(x, al, be, ls.value_or(std::numeric_limits<double>::infinity()), dom.n2, lam);
}

struct BoundaryData2D {
  enum class Inlet { tangential, normal };
  Inlet inlet = Inlet::tangential;  // which derivative g0 prescribes on x1 = 0
  std::function<double(double)> g0;  // empty means zero
  double anchor = 0.0;               // w(0, -1); used with tangential data, or as a pin
  bool pin = false;                  // normal data: replace the condition at (0, -1) by w = anchor
  std::function<double(double)> outlet;  // Dirichlet on x1 = L, purely elliptic channels only
};

/// Odd x2-derivatives of the inlet trace must vanish at the walls. For tangential data
/// the trace derivative is g0 itself, for normal data it is g0'.
inline void check_compatibility(const BoundaryData2D& bc, double tol = 1e-6) {
  if (!bc.g0) return;
  double scale = 0.0;
  for (int k = 0; k <= 64; ++k) scale = std::max(scale, std::abs(bc.g0(-1.0 + k / 32.0)));
  const double t = tol * std::max(scale, 1.0);
  for (double s : {-1.0, 1.0}) {
    double v;
    if (bc.inlet == BoundaryData2D::Inlet::tangential) {
      v = bc.g0(s);
    } else {
      const double h = 1e-4;
      v = (3.0 * bc.g0(s) - 4.0 * bc.g0(s - s * h) + bc.g0(s - 2.0 * s * h)) / (2.0 * h);
    }
    if (std::abs(v) > t) {
      std::ostringstream msg;
      msg << "inlet data incompatible with the wall condition at x2 = " << s << " (odd derivative " << v << ")";
      throw ConfigurationError(msg.str());
    }
  }
}

struct MixedSolveOptions {
  double residual_tol = 1e-12;  // normwise backward error
  double singular_tol = 1e-13;  // relative size of |M v| for the near-null vector
};

class SingularSystem : public SolverFailure {
 public:
  SingularSystem(const std::string& what, std::vector<double> v) : SolverFailure(what), null_vector(std::move(v)) {}
  std::vector<double> null_vector;
};

struct MixedSolution {
  Field2D field;  // x = x1, y = x2
  double residual = 0.0;
  bool kz_holds = true;  // false: solved anyway, flagged
  double kz_lambda = 0.0;
};

/// Node-major source samples f(x1_i, x2_j).
inline std::vector<double> sample_source(const MixedOperatorSpec& spec,
                                         const std::function<double(std::size_t, std::size_t, double, double)>& f) {
  const auto x2 = grid::uniform(-1.0, 1.0, spec.n2() - 1);
  std::vector<double> v(spec.n1() * spec.n2());
  for (std::size_t i = 0; i < spec.n1(); ++i)
    for (std::size_t j = 0; j < spec.n2(); ++j) v[i * spec.n2() + j] = f(i, j, spec.x1()[i], x2[j]);
  return v;
}

namespace detail {

struct Row {
  std::vector<std::pair<std::size_t, double>> entries;
};

// weights of the k-th x1-derivative at node i on the listed nodes
inline std::vector<std::pair<std::size_t, double>> x1_weights(const std::vector<double>& x, std::size_t i,
                                                             std::vector<std::size_t> nodes, int k) {
  std::vector<double> xs;
  for (auto n : nodes) xs.push_back(x[n]);
  const auto w = grid::fd_weights(x[i], xs, k);
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t a = 0; a < nodes.size(); ++a) out.emplace_back(nodes[a], w[k][a]);
  return out;
}

}  // namespace detail

inline MixedSolution solve_linear(const MixedOperatorSpec& spec, const std::vector<double>& f,
                                  const BoundaryData2D& bc = {}, const MixedSolveOptions& opt = {}) {
  const std::size_t n1 = spec.n1(), n2 = spec.n2();
  if (f.size() != n1 * n2) throw DomainError("source field size does not match the grid");
  if (!spec.transonic() && !bc.outlet) throw ConfigurationError("elliptic channel (L < l_s) needs Dirichlet outlet data");
  if (spec.transonic() && bc.outlet) throw ConfigurationError("no outlet condition may be imposed downstream of the sonic line");
  check_compatibility(bc);
  const auto& x = spec.x1();
  const auto x2 = grid::uniform(-1.0, 1.0, n2 - 1);
  const double h2 = x2[1] - x2[0];
  auto id = [n2](std::size_t i, std::size_t j) { return i * n2 + j; };
  const auto N = static_cast<Eigen::Index>(n1 * n2);

  // inlet trace for tangential data: w(0, x2) = anchor + int_{-1}^{x2} g0
  std::vector<double> trace(n2, bc.anchor);
  if (bc.inlet == BoundaryData2D::Inlet::tangential && bc.g0)
    for (std::size_t j = 1; j < n2; ++j) trace[j] = trace[j - 1] + quad::gauss_legendre(bc.g0, x2[j - 1], x2[j]);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(N) * 9);
  Eigen::VectorXd rhs(N);
  auto add = [&](std::size_t r, std::size_t c, double w) {
    trip.emplace_back(static_cast<int>(r), static_cast<int>(c), w);
  };
  for (std::size_t i = 0; i < n1; ++i) {
    // x1 stencils shared by the column
    std::vector<std::pair<std::size_t, double>> d11, d1;
    const auto kind = spec.kind(i);
    const double al = spec.alpha11()[i], be = spec.beta1()[i];
    if (i > 0 && !(i == n1 - 1 && !spec.transonic())) {
      if (kind == StencilKind::elliptic) d11 = detail::x1_weights(x, i, {i - 1, i, i + 1}, 2);
      if (kind == StencilKind::hyperbolic) d11 = detail::x1_weights(x, i, {i - 3, i - 2, i - 1, i}, 2);
      if (i == 1)
        d1 = detail::x1_weights(x, i, {0, 1, 2}, 1);
      else if (be <= 0.0 || kind != StencilKind::elliptic)
        d1 = detail::x1_weights(x, i, {i - 2, i - 1, i}, 1);
      else
        d1 = detail::x1_weights(x, i, {i, i + 1, i + 2}, 1);
    }
    for (std::size_t j = 0; j < n2; ++j) {
      const std::size_t r = id(i, j);
      if (i == 0) {
        if (bc.inlet == BoundaryData2D::Inlet::tangential || (bc.pin && j == 0)) {
          add(r, r, 1.0);
          rhs[r] = bc.inlet == BoundaryData2D::Inlet::tangential ? trace[j] : bc.anchor;
        } else {
          for (auto [c, w] : detail::x1_weights(x, 0, {0, 1, 2}, 1)) add(r, id(c, j), w);
          rhs[r] = bc.g0 ? bc.g0(x2[j]) : 0.0;
        }
        continue;
      }
      if (i == n1 - 1 && !spec.transonic()) {
        add(r, r, 1.0);
        rhs[r] = bc.outlet(x2[j]);
        continue;
      }
      for (auto [c, w] : d11) add(r, id(c, j), al * w);
      for (auto [c, w] : d1) add(r, id(c, j), be * w);
      // walls: mirror image across x2 = +-1 (homogeneous Neumann)
      const double e = 1.0 / (h2 * h2);
      if (j == 0) {
        add(r, r, -2.0 * e);
        add(r, id(i, 1), 2.0 * e);
      } else if (j == n2 - 1) {
        add(r, r, -2.0 * e);
        add(r, id(i, n2 - 2), 2.0 * e);
      } else {
        add(r, id(i, j - 1), e);
        add(r, r, -2.0 * e);
        add(r, id(i, j + 1), e);
      }
      rhs[r] = f[r];
    }
  }
  Eigen::SparseMatrix<double> M(N, N);
  M.setFromTriplets(trip.begin(), trip.end());
  M.makeCompressed();
  double Mnorm = 0.0;
  for (Eigen::Index k = 0; k < M.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it) Mnorm = std::max(Mnorm, std::abs(it.value()));

  auto null_report = [&](Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>& lu,
                         const std::string& why) {
    std::vector<double> v(static_cast<std::size_t>(N), 1.0);
    Eigen::SparseMatrix<double> S = M;
    for (Eigen::Index k = 0; k < N; ++k) S.coeffRef(k, k) += 1e-10 * Mnorm;
    lu.compute(S);
    if (lu.info() == Eigen::Success) {
      Eigen::VectorXd z = Eigen::VectorXd::Ones(N);
      for (int it = 0; it < 3; ++it) {
        z = lu.solve(z);
        z /= z.cwiseAbs().maxCoeff();
      }
      v.assign(z.data(), z.data() + N);
    }
    throw SingularSystem("singular system: " + why, std::move(v));
  };

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success) null_report(lu, lu.lastErrorMessage());
  // inverse iteration for the smallest singular direction
  {
    Eigen::VectorXd z = Eigen::VectorXd::Ones(N);
    for (Eigen::Index k = 0; k < N; ++k) z[k] += 1e-3 * std::sin(1.0 + k);
    for (int it = 0; it < 2; ++it) {
      z = lu.solve(z);
      const double zn = z.cwiseAbs().maxCoeff();
      if (!std::isfinite(zn) || zn == 0.0) null_report(lu, "non-finite inverse iterate");
      z /= zn;
    }
    const double defect = (M * z).cwiseAbs().maxCoeff() / Mnorm;
    if (defect < opt.singular_tol) {
      std::ostringstream msg;
      msg << "near-null vector with |M v| / |M| = " << defect;
      throw SingularSystem("singular system: " + msg.str(), std::vector<double>(z.data(), z.data() + N));
    }
  }
  const Eigen::VectorXd w = lu.solve(rhs);
  const double res = (M * w - rhs).cwiseAbs().maxCoeff();
  const double denom = Mnorm * w.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff();
  const double rel = denom > 0.0 ? res / denom : res;
  if (!w.allFinite() || rel > opt.residual_tol) {
    std::ostringstream msg;
    msg << "residual " << rel << " above tolerance " << opt.residual_tol;
    throw SolverFailure(msg.str());
  }
  MixedSolution out;
  out.field = Field2D(x, grid::uniform(0.0, 1.0, n2 - 1), std::vector<double>(n1, 2.0), -1.0);
  out.field.values().assign(w.data(), w.data() + N);
  out.field.history().final_residual = rel;
  out.field.history().converged = true;
  out.field.history().reliable = spec.kz_holds();
  out.residual = rel;
  out.kz_holds = spec.kz_holds();
  out.kz_lambda = spec.kz_lambda();
  return out;
}

/// Discrete L w at the interior nodes (same stencils as the solver), for consistency checks.
inline std::vector<double> apply_operator(const MixedOperatorSpec& spec, const Field2D& w) {
  MixedOperatorSpec const& s = spec;
  const std::size_t n1 = s.n1(), n2 = s.n2();
  std::vector<double> out(n1 * n2, 0.0);
  const double h2 = 2.0 / static_cast<double>(n2 - 1);
  for (std::size_t i = 1; i < n1; ++i) {
    if (i == n1 - 1 && !s.transonic()) continue;
    const auto kind = s.kind(i);
    std::vector<std::pair<std::size_t, double>> d11, d1;
    if (kind == StencilKind::elliptic) d11 = detail::x1_weights(s.x1(), i, {i - 1, i, i + 1}, 2);
    if (kind == StencilKind::hyperbolic) d11 = detail::x1_weights(s.x1(), i, {i - 3, i - 2, i - 1, i}, 2);
    const double be = s.beta1()[i];
    if (i == 1)
      d1 = detail::x1_weights(s.x1(), i, {0, 1, 2}, 1);
    else if (be <= 0.0 || kind != StencilKind::elliptic)
      d1 = detail::x1_weights(s.x1(), i, {i - 2, i - 1, i}, 1);
    else
      d1 = detail::x1_weights(s.x1(), i, {i, i + 1, i + 2}, 1);
    for (std::size_t j = 0; j < n2; ++j) {
      double v = 0.0;
      for (auto [c, wt] : d11) v += s.alpha11()[i] * wt * w(c, j);
      for (auto [c, wt] : d1) v += be * wt * w(c, j);
      const std::size_t jm = j == 0 ? 1 : j - 1, jp = j == n2 - 1 ? n2 - 2 : j + 1;
      v += (w(i, jm) - 2.0 * w(i, j) + w(i, jp)) / (h2 * h2);
      out[i * n2 + j] = v;
    }
  }
  return out;
}

struct SmoothnessReport {
  double l_s = 0.0;
  double jump_w = 0.0;    // max over x2, normalized by max |w|
  double jump_w1 = 0.0;   // normalized by max |w_1|
  double jump_w11 = 0.0;  // normalized by max |w_11|
  bool kz_holds = true;
};

/// One-sided values of w, w_1, w_11 extrapolated to x1 = l_s from each side.
inline SmoothnessReport sonic_smoothness_diag(const Field2D& w, const MixedOperatorSpec& spec) {
  SmoothnessReport r;
  r.l_s = spec.l_s();
  r.kz_holds = spec.kz_holds();
  const auto sc = spec.sonic_column();
  if (!sc) throw DomainError("no sonic column: channel does not cross the sonic line");
  const std::size_t s = *sc;
  const auto& x = spec.x1();
  if (s < 4 || s + 4 >= x.size()) throw DomainError("need 4 columns on each side of the sonic line");
  const auto left = grid::fd_weights(x[s], {x[s - 1], x[s - 2], x[s - 3], x[s - 4]}, 2);
  const auto right = grid::fd_weights(x[s], {x[s + 1], x[s + 2], x[s + 3], x[s + 4]}, 2);
  double mw = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const auto st = grid::central3(x[i - 1], x[i], x[i + 1]);
    for (std::size_t j = 0; j < w.ny(); ++j) {
      mw = std::max(mw, std::abs(w(i, j)));
      m1 = std::max(m1, std::abs(st.d1[0] * w(i - 1, j) + st.d1[1] * w(i, j) + st.d1[2] * w(i + 1, j)));
      m2 = std::max(m2, std::abs(st.d2[0] * w(i - 1, j) + st.d2[1] * w(i, j) + st.d2[2] * w(i + 1, j)));
    }
  }
  for (std::size_t j = 0; j < w.ny(); ++j) {
    double L[3] = {0, 0, 0}, R[3] = {0, 0, 0};
    for (int k = 0; k < 3; ++k)
      for (std::size_t a = 0; a < 4; ++a) {
        L[k] += left[k][a] * w(s - 1 - a, j);
        R[k] += right[k][a] * w(s + 1 + a, j);
      }
    r.jump_w = std::max(r.jump_w, std::abs(L[0] - R[0]));
    r.jump_w1 = std::max(r.jump_w1, std::abs(L[1] - R[1]));
    r.jump_w11 = std::max(r.jump_w11, std::abs(L[2] - R[2]));
  }
  r.jump_w = mw > 0 ? r.jump_w / mw : 0.0;
  r.jump_w1 = m1 > 0 ? r.jump_w1 / m1 : 0.0;
  r.jump_w11 = m2 > 0 ? r.jump_w11 / m2 : 0.0;
  return r;
}

}  // namespace sonic
