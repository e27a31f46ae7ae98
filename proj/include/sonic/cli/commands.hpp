#pragma once

// One runner per subcommand. A runner validates its config block, computes, and
// hands every output to Artifacts; nothing touches the disk here.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sonic/cli/artifacts.hpp"
#include "sonic/cli/config.hpp"
#include "sonic/core/csv.hpp"
#include "sonic/core/svg.hpp"
#include "sonic/keldysh_model.hpp"
#include "sonic/mixed_type_2d.hpp"
#include "sonic/phase_plane.hpp"
#include "sonic/profile_1d.hpp"
#include "sonic/shock_polar.hpp"

namespace sonic::cli {

struct RunContext {
  const Node& root;
  Artifacts& out;
  bool svg = true;
  bool svg_timestamp = false;

  template <class Writer>
  void plot(const std::string& name, Writer&& w) {
    if (!svg) return;
    std::ostringstream os;
    w(os);
    std::string s = os.str();
    if (svg_timestamp) {
      const auto nl = s.find('\n');
      s.insert(nl == std::string::npos ? s.size() : nl + 1, "<!-- generated " + utc_timestamp() + " -->\n");
    }
    out.add(name, [&](std::ostream& o) { o << s; });
  }
};

// keys every config may carry
#define SONIC_CLI_COMMON_KEYS "schema_version", "subcommand", "name", "output_dir", "svg", "svg_timestamp"

namespace detail {

inline json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline json opt_json(const std::optional<double>& v) { return v ? num_or_null(*v) : json(nullptr); }

inline GasParams parse_gas(const Node& root) {
  auto g = root.optional_child("gas");
  if (!g) return GasParams(3.0, 1.0 / 3.0, 1.0, 0.5);
  g->allow({"gamma", "S0", "J", "rho_ion"});
  return GasParams(g->number("gamma"), g->number("S0", 1.0 / 3.0), g->number("J", 1.0), g->number("rho_ion", 0.5));
}

inline json gas_json(const GasParams& p) {
  return {{"gamma", p.gamma()}, {"S0", p.S0()},         {"J", p.J()},
          {"rho_ion", p.rho_ion()}, {"u_sonic", p.u_sonic()}, {"u_bar", p.u_bar()}, {"zeta0", p.zeta0()}};
}

inline InletData parse_inlet(const GasParams& p, const Node& root) {
  const auto in = root.child("inlet");
  in.allow({"u0", "u0_over_us", "E0", "branch"});
  if (in.has("u0") == in.has("u0_over_us"))
    throw ValidationError("'inlet' needs exactly one of 'u0' and 'u0_over_us'");
  const double u0 = in.has("u0") ? in.positive("u0") : in.positive("u0_over_us") * p.u_sonic();
  if (in.has("E0")) {
    if (in.has("branch")) throw ValidationError("'inlet.E0' and 'inlet.branch' are mutually exclusive");
    return {u0, in.number("E0")};
  }
  const auto b = in.choice("branch", "accelerating", {"accelerating", "decelerating"});
  const Branch branch = b == "accelerating" ? Branch::accelerating : Branch::decelerating;
  if (enthalpy_H(p, u0) < 0.0) {
    std::ostringstream msg;
    msg << "inlet u0 = " << u0 << " is beyond the end of the critical trajectory (H(u0) < 0)";
    throw ValidationError(msg.str());
  }
  return {u0, critical_E(p, u0, branch)};
}

inline StopRule parse_stop(const Node& root) {
  StopRule s;
  if (auto st = root.optional_child("stop")) {
    st->allow({"x_max", "u_target"});
    if (st->has("x_max")) s.x_max = st->positive("x_max");
    if (st->has("u_target")) s.u_target = st->positive("u_target");
  }
  return s;
}

inline IntegratorOptions parse_integrator(const Node& root) {
  IntegratorOptions o;
  if (auto it = root.optional_child("integrator")) {
    it->allow({"rtol", "atol", "max_steps"});
    o.rtol = it->positive("rtol", o.rtol);
    o.atol = it->positive("atol", o.atol);
    o.max_steps = it->integer("max_steps", o.max_steps, 100);
  }
  return o;
}

inline json profile_summary(const Profile1D& prof) {
  const auto& p = prof.params();
  double defect = 0.0, energy = 0.0;
  for (const auto& s : prof.samples()) {
    defect = std::max(defect, std::abs(bernoulli_defect(p, s)));
    energy = std::max(energy, std::abs(0.5 * s.E * s.E - enthalpy_H(p, s.u)));
  }
  return {{"branch", to_string(prof.branch())},
          {"critical", prof.critical()},
          {"termination", to_string(prof.termination())},
          {"l_s", opt_json(prof.l_s())},
          {"l_max", opt_json(prof.l_max())},
          {"x_end", prof.x_end()},
          {"samples", prof.size()},
          {"max_bernoulli_defect", defect},
          {"max_energy_defect", energy}};
}

inline json state_json(const ShockState& s) {
  return {{"sigma", s.sigma},   {"u1", s.u1},
          {"u2", s.u2},         {"rho", s.rho},
          {"speed", s.speed()}, {"deflection", s.deflection()},
          {"residual", s.residual}};
}

inline UpstreamState parse_upstream(const Node& root) {
  const auto u = root.child("upstream");
  u.allow({"gamma", "rho_inf", "q_inf"});
  return UpstreamState(u.number("gamma"), u.number("rho_inf", 1.0), u.number("q_inf"));
}

inline void check_attached(const ShockPolarCurve& c, double theta_w, const std::string& key) {
  if (theta_w < 0.0) throw ValidationError("'" + key + "' must be non-negative");
  if (theta_w > c.theta_d) {
    std::ostringstream msg;
    msg << "'" << key << "' = " << theta_w << " exceeds the detachment angle theta_d = " << c.theta_d
        << ": no attached shock";
    throw ValidationError(msg.str());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline json run_phase_portrait(RunContext& ctx) {
  const auto& root = ctx.root;
  root.allow({SONIC_CLI_COMMON_KEYS, "gas", "portrait"});
  const auto p = detail::parse_gas(root);
  double lo = 0.05, hi = 3.0;
  long n = 400;
  std::vector<double> levels{-0.05, 0.05, 0.1};
  if (auto pt = root.optional_child("portrait")) {
    pt->allow({"u_min_over_us", "u_max_over_us", "samples", "levels"});
    lo = pt->positive("u_min_over_us", lo);
    hi = pt->positive("u_max_over_us", hi);
    n = pt->integer("samples", n, 10);
    levels = pt->numbers("levels", levels);
  }
  if (!(lo < hi)) throw ValidationError("'portrait.u_min_over_us' must be below 'portrait.u_max_over_us'");
  const double us = p.u_sonic();
  const auto u = grid::uniform(lo * us, hi * us, static_cast<std::size_t>(n) - 1);

  std::vector<double> cu, ca, cd;
  ctx.out.add("critical.csv", [&](std::ostream& os) {
    csv::Writer w(os, {"u", "H", "E_accelerating", "E_decelerating"});
    for (double v : u) {
      const double H = enthalpy_H(p, v);
      if (H < 0.0) continue;
      const double a = critical_E(p, v, Branch::accelerating), d = critical_E(p, v, Branch::decelerating);
      w.row({v, H, a, d});
      cu.push_back(v), ca.push_back(a), cd.push_back(d);
    }
  });
  std::vector<svg::Series> level_series;
  ctx.out.add("levels.csv", [&](std::ostream& os) {
    csv::Writer w(os, {"level", "u", "E_upper", "E_lower"});
    for (std::size_t k = 0; k < levels.size(); ++k) {
      svg::Series up{"c=" + svg::num(levels[k]), {}, {}, true}, dn{"", {}, {}, true};
      for (double v : u) {
        const double e2 = 2.0 * (enthalpy_H(p, v) + levels[k]);
        if (e2 < 0.0) continue;
        const double e = std::sqrt(e2);
        w.row({levels[k], v, e, -e});
        up.x.push_back(v), up.y.push_back(e), dn.x.push_back(v), dn.y.push_back(-e);
      }
      dn.color = up.color = svg::palette(k + 2);
      level_series.push_back(std::move(up));
      level_series.push_back(std::move(dn));
    }
  });

  std::optional<double> ustar;
  if (p.zeta0() > 1.0) ustar = find_u_star(p);
  json s = {{"gas", detail::gas_json(p)},
            {"u_star", detail::opt_json(ustar)},
            {"d2H_sonic", enthalpy_d2H_sonic(p)},
            {"critical_rows", cu.size()}};
  ctx.out.add_json("summary.json", s);

  ctx.plot("portrait.svg", [&](std::ostream& os) {
    svg::LinePlot plot("critical trajectories", "u", "E");
    plot.add({"accelerating", cu, ca, false, false, svg::palette(0)});
    plot.add({"decelerating", cu, cd, false, false, svg::palette(1)});
    for (auto& ls : level_series) plot.add(ls);
    plot.ref_line(true, us, "u_s");
    if (ustar) plot.ref_line(true, *ustar, "u*");
    plot.write(os);
  });
  return s;
}

inline json run_profile(RunContext& ctx) {
  const auto& root = ctx.root;
  root.allow({SONIC_CLI_COMMON_KEYS, "gas", "inlet", "stop", "integrator", "lemma"});
  const auto p = detail::parse_gas(root);
  const auto inlet = detail::parse_inlet(p, root);
  const auto stop = detail::parse_stop(root);
  const auto iopt = detail::parse_integrator(root);
  const bool lemma = root.boolean("lemma", true);

  const auto prof = integrate_profile(p, inlet, stop, iopt);
  ctx.out.add("profile.csv", [&](std::ostream& os) { write_profile_csv(os, prof); });
  json s = {{"gas", detail::gas_json(p)}, {"inlet", {{"u0", inlet.u0}, {"E0", inlet.E0}}}};
  s["profile"] = detail::profile_summary(prof);

  if (lemma) {
    const auto rep = verify_lemma(p, inlet, iopt);
    json claims = json::array();
    for (const auto& c : rep.claims)
      claims.push_back({{"id", c.id},
                        {"statement", c.statement},
                        {"passed", c.passed},
                        {"margin", detail::num_or_null(c.margin)},
                        {"detail", c.detail}});
    json l = {{"branch", to_string(rep.branch)},
              {"on_critical", rep.on_critical},
              {"all_passed", rep.all_passed()},
              {"claims", claims}};
    if (rep.lmax)
      l["l_max"] = {{"finite", rep.lmax->finite},
                    {"value", detail::num_or_null(rep.lmax->value)},
                    {"decided_by", rep.lmax->decided_by}};
    ctx.out.add_json("lemma.json", l);
    s["lemma_all_passed"] = rep.all_passed();
  }
  ctx.out.add_json("summary.json", s);

  ctx.plot("profile.svg", [&](std::ostream& os) {
    std::vector<double> x, u, E;
    for (const auto& smp : prof.samples()) x.push_back(smp.x1), u.push_back(smp.u), E.push_back(smp.E);
    svg::LinePlot plot(std::string(to_string(prof.branch())) + " profile", "x1", "u, E");
    plot.add({"u", x, u}).add({"E", x, E, true});
    plot.ref_line(false, p.u_sonic(), "u_s");
    if (prof.l_s()) plot.ref_line(true, *prof.l_s(), "l_s");
    plot.write(os);
  });
  return s;
}

inline json run_kz_check(RunContext& ctx) {
  const auto& root = ctx.root;
  root.allow({SONIC_CLI_COMMON_KEYS, "gas", "inlet", "stop", "integrator"});
  const auto p = detail::parse_gas(root);
  const auto inlet = detail::parse_inlet(p, root);
  const auto prof = integrate_profile(p, inlet, detail::parse_stop(root), detail::parse_integrator(root));
  const auto r = kz_check(p, prof);

  std::vector<double> xs, q[4];
  ctx.out.add("kz.csv", [&](std::ostream& os) {
    csv::Writer w(os, {"x1", "u", "q0", "q1", "q2", "q3"});
    for (const auto& smp : prof.samples()) {
      const double up = profile_slope(prof, smp.u, smp.E);
      double v[4];
      for (int m = 0; m < 4; ++m) v[m] = kz_quantity(p, m, smp.u, up), q[m].push_back(v[m]);
      xs.push_back(smp.x1);
      w.row({smp.x1, smp.u, v[0], v[1], v[2], v[3]});
    }
  });
  json s = {{"gas", detail::gas_json(p)},
            {"profile", detail::profile_summary(prof)},
            {"holds", r.holds},
            {"lambda_L", r.lambda_L},
            {"q_min", {r.q_min[0], r.q_min[1], r.q_min[2], r.q_min[3]}},
            {"max_rel_discrepancy", detail::num_or_null(r.max_rel_discrepancy)},
            {"samples", r.samples}};
  ctx.out.add_json("kz.json", s);

  ctx.plot("kz.svg", [&](std::ostream& os) {
    svg::LinePlot plot(r.holds ? "KZ quantities (holds)" : "KZ quantities (fails)", "x1", "q_m");
    for (int m = 0; m < 4; ++m) plot.add({"m=" + std::to_string(m), xs, q[m]});
    plot.ref_line(false, 0.0, "0");
    plot.write(os);
  });
  return s;
}

inline json run_keldysh(RunContext& ctx) {
  const auto& root = ctx.root;
  root.allow({SONIC_CLI_COMMON_KEYS, "problem", "grid", "solver", "scan"});
  const auto pb = root.child("problem");
  pb.allow({"kind", "a", "b", "eps0", "theta"});
  const auto kind = pb.choice("kind", "theorem", {"manufactured", "theorem"});
  const double a = pb.positive("a", 4.0), b = pb.positive("b", 1.0), eps0 = pb.positive("eps0", 0.2);
  const double theta = pb.number("theta", 0.9);
  if (kind == "manufactured" && pb.has("theta")) throw ValidationError("'problem.theta' applies to kind 'theorem' only");
  if (!(theta > 0.0 && theta <= 1.0)) throw ValidationError("'problem.theta' must lie in (0, 1]");
  const auto prob = kind == "manufactured" ? manufactured_problem(a, b, eps0) : theorem_scenario(a, b, eps0, theta);

  KeldyshOptions opt;
  if (auto g = root.optional_child("grid")) {
    g->allow({"nx", "ny", "grading"});
    opt.nx = static_cast<std::size_t>(g->integer("nx", static_cast<long>(opt.nx), 4));
    opt.ny = static_cast<std::size_t>(g->integer("ny", static_cast<long>(opt.ny), 4));
    opt.grading = g->number("grading", opt.grading);
  }
  if (auto sv = root.optional_child("solver")) {
    sv->allow({"residual_tol", "max_iterations", "damping"});
    opt.residual_tol = sv->positive("residual_tol", opt.residual_tol);
    opt.max_iterations = static_cast<int>(sv->integer("max_iterations", opt.max_iterations, 1));
    opt.damping = sv->number("damping", opt.damping);
  }
  const double f0 = prob.domain.f(0.0);
  std::vector<double> ys{0.25 * f0, 0.5 * f0, 0.75 * f0};
  CornerOptions copt;
  if (auto sc = root.optional_child("scan")) {
    sc->allow({"ys", "c_interior", "c_boundary"});
    ys = sc->numbers("ys", ys);
    copt.c_interior = sc->positive("c_interior", copt.c_interior);
    copt.c_boundary = sc->positive("c_boundary", copt.c_boundary);
  }
  for (double y : ys)
    if (!(y >= 0.0 && y <= f0)) throw ValidationError("'scan.ys' entries must lie in [0, f(0)]");
  scan_levels(Field2D(grid::graded(eps0, opt.nx, opt.grading), grid::uniform(0, 1, 2), std::vector<double>(opt.nx + 1, 1.0)),
              copt.scan);

  const auto F = solve_model(prob.domain, prob.coeffs, opt, prob.bc);
  const auto diag = sonic_diagnostics(F, prob.domain, prob.coeffs, ys, copt);

  ctx.out.add("psi.csv", [&](std::ostream& os) { F.write_csv(os, "x", "y", "psi"); });
  ctx.out.add("trace.csv", [&](std::ostream& os) {
    csv::Writer w(os, {"y", "x", "psi_xx"});
    for (const auto& row : diag.trace.rows)
      for (std::size_t k = 0; k < row.x.size(); ++k) w.row({row.y, row.x[k], row.psi_xx[k]});
  });
  ctx.out.add("corner.csv", [&](std::ostream& os) {
    csv::Writer w(os, {"path", "x", "y", "psi_xx"});
    int id = 0;
    for (const auto* path : {&diag.corner.interior, &diag.corner.boundary}) {
      for (std::size_t k = 0; k < path->x.size(); ++k) w.row({double(id), path->x[k], path->y[k], path->psi_xx[k]});
      ++id;
    }
  });

  const auto& h = F.history();
  json trace = json::array();
  for (const auto& row : diag.trace.rows)
    trace.push_back({{"y", row.y},
                     {"limit", detail::num_or_null(row.limit)},
                     {"last_change", detail::num_or_null(row.last_change)},
                     {"corner_contaminated", row.corner_contaminated}});
  auto path_json = [](const CornerPath& cp) {
    return json{{"limit", detail::num_or_null(cp.limit)}, {"last_change", detail::num_or_null(cp.last_change)}};
  };
  const auto& bd = diag.bounds;
  json s = {{"problem", kind},
            {"a", a},
            {"b", b},
            {"eps0", eps0},
            {"reference_psi_xx", 1.0 / a},
            {"grid", {{"nx", opt.nx}, {"ny", opt.ny}, {"grading", opt.grading}}},
            {"solver",
             {{"iterations", h.iterations},
              {"final_residual", h.final_residual},
              {"converged", h.converged},
              {"clamp_active", h.clamp_active},
              {"reliable", h.reliable}}},
            {"trace", trace},
            {"corner",
             {{"interior", path_json(diag.corner.interior)},
              {"boundary", path_json(diag.corner.boundary)},
              {"gap", diag.corner.gap}}},
            {"bounds",
             {{"min_psi", bd.min_psi},
              {"L", bd.L},
              {"mu", bd.mu},
              {"delta", bd.delta},
              {"positivity", bd.positivity},
              {"gradient", bd.gradient},
              {"quadratic", bd.quadratic},
              {"monotone", bd.monotone}}}};
  if (kind == "manufactured") {
    double err = 0.0;
    for (std::size_t i = 0; i < F.nx(); ++i)
      for (std::size_t j = 0; j < F.ny(); ++j) err = std::max(err, std::abs(F(i, j) - F.x(i) * F.x(i) / (2.0 * a)));
    s["max_error"] = err;
  }
  ctx.out.add_json("summary.json", s);

  ctx.plot("psi.svg", [&](std::ostream& os) { svg::heatmap(os, F, "psi", "x", "y"); });
  ctx.plot("trace.svg", [&](std::ostream& os) {
    svg::LinePlot plot("psi_xx toward the sonic line", "x", "psi_xx");
    for (const auto& row : diag.trace.rows) plot.add({"y=" + svg::num(row.y), row.x, row.psi_xx, false, true});
    plot.add({"corner, interior", diag.corner.interior.x, diag.corner.interior.psi_xx, true, true});
    plot.add({"corner, boundary", diag.corner.boundary.x, diag.corner.boundary.psi_xx, true, true});
    plot.ref_line(false, 1.0 / a, "1/a");
    plot.write(os);
  });
  return s;
}

inline json run_mixed(RunContext& ctx) {
  using std::numbers::pi;
  const auto& root = ctx.root;
  root.allow({SONIC_CLI_COMMON_KEYS, "gas", "inlet", "stop", "integrator", "channel", "source", "boundary", "solver"});
  const auto p = detail::parse_gas(root);
  const auto inlet = detail::parse_inlet(p, root);
  const auto ch = root.child("channel");
  ch.allow({"L", "n1", "n2"});
  ChannelDomain dom;
  dom.L = ch.positive("L");
  dom.n1 = static_cast<std::size_t>(ch.integer("n1", static_cast<long>(dom.n1), 9));
  dom.n2 = static_cast<std::size_t>(ch.integer("n2", static_cast<long>(dom.n2), 3));
  auto stop = detail::parse_stop(root);
  if (!root.has("stop")) stop.x_max = dom.L;

  const auto src = root.child("source");
  src.allow({"kind", "value"});
  const auto kind = src.choice("kind", "manufactured", {"manufactured", "constant"});
  if (kind == "manufactured" && (src.has("value") || root.has("boundary")))
    throw ValidationError("manufactured source derives its own boundary data; drop 'source.value' and 'boundary'");
  MixedSolveOptions sopt;
  if (auto sv = root.optional_child("solver")) {
    sv->allow({"residual_tol", "singular_tol"});
    sopt.residual_tol = sv->positive("residual_tol", sopt.residual_tol);
    sopt.singular_tol = sv->positive("singular_tol", sopt.singular_tol);
  }

  const auto prof = integrate_profile(p, inlet, stop, detail::parse_integrator(root));
  const auto spec = build_operator(prof, dom);
  const double L = dom.L;
  auto g = [L](double x) { return 1.0 + std::sin(2.0 * x / L); };
  auto g1 = [L](double x) { return 2.0 / L * std::cos(2.0 * x / L); };
  auto g2 = [L](double x) { return -4.0 / (L * L) * std::sin(2.0 * x / L); };

  std::vector<double> f;
  BoundaryData2D bc;
  if (kind == "manufactured") {
    f = sample_source(spec, [&](std::size_t i, std::size_t, double x, double y) {
      return (spec.alpha11()[i] * g2(x) + spec.beta1()[i] * g1(x) - pi * pi * g(x)) * std::cos(pi * y);
    });
    bc.g0 = [g](double y) { return -pi * std::sin(pi * y) * g(0.0); };
    bc.anchor = -g(0.0);
    if (!spec.transonic()) bc.outlet = [g, L](double y) { return g(L) * std::cos(pi * y); };
  } else {
    const double v = src.number("value", 0.0);
    f = sample_source(spec, [v](std::size_t, std::size_t, double, double) { return v; });
    if (auto bd = root.optional_child("boundary")) {
      bd->allow({"inlet", "anchor", "pin", "outlet"});
      bc.inlet = bd->choice("inlet", "tangential", {"tangential", "normal"}) == "normal" ? BoundaryData2D::Inlet::normal
                                                                                          : BoundaryData2D::Inlet::tangential;
      bc.anchor = bd->number("anchor", 0.0);
      bc.pin = bd->boolean("pin", false);
      if (bd->has("outlet")) {
        const double o = bd->number("outlet");
        bc.outlet = [o](double) { return o; };
      }
    }
    if (!spec.transonic() && !bc.outlet)
      throw ValidationError("channel ends before the sonic line (L < l_s): 'boundary.outlet' is required");
    if (spec.transonic() && bc.outlet)
      throw ValidationError("channel crosses the sonic line: 'boundary.outlet' must not be given");
  }

  const auto sol = solve_linear(spec, f, bc, sopt);
  const auto& W = sol.field;
  ctx.out.add("w.csv", [&](std::ostream& os) { W.write_csv(os, "x1", "x2", "w"); });
  ctx.out.add("operator.csv", [&](std::ostream& os) { spec.write_csv(os); });

  json s = {{"gas", detail::gas_json(p)},
            {"profile", detail::profile_summary(prof)},
            {"channel", {{"L", dom.L}, {"n1", spec.n1()}, {"n2", spec.n2()}}},
            {"source", kind},
            {"l_s", detail::num_or_null(spec.l_s())},
            {"transonic", spec.transonic()},
            {"residual", sol.residual},
            {"kz_holds", sol.kz_holds},
            {"kz_lambda", sol.kz_lambda}};
  if (kind == "manufactured") {
    double err = 0.0;
    for (std::size_t i = 0; i < W.nx(); ++i)
      for (std::size_t j = 0; j < W.ny(); ++j) err = std::max(err, std::abs(W(i, j) - g(W.x(i)) * std::cos(pi * W.y(i, j))));
    s["max_error"] = err;
  }
  if (spec.sonic_column()) {
    const auto sm = sonic_smoothness_diag(W, spec);
    s["smoothness"] = {{"jump_w", sm.jump_w}, {"jump_w1", sm.jump_w1}, {"jump_w11", sm.jump_w11}};
  }
  ctx.out.add_json("summary.json", s);
  ctx.plot("w.svg", [&](std::ostream& os) { svg::heatmap(os, W, "w", "x1", "x2"); });
  return s;
}

inline json run_shock_polar(RunContext& ctx) {
  const auto& root = ctx.root;
  root.allow({SONIC_CLI_COMMON_KEYS, "upstream", "samples", "theta_w"});
  const auto up = detail::parse_upstream(root);
  const long n = root.integer("samples", 2048, 8);
  const auto thetas = root.numbers("theta_w", {});
  if (!up.supersonic()) {
    std::ostringstream msg;
    msg << "upstream must be supersonic: q_inf = " << up.q_inf() << " <= sound speed " << up.sound_speed();
    throw ValidationError(msg.str());
  }
  const auto c = compute_polar(up, static_cast<std::size_t>(n));
  for (double t : thetas) detail::check_attached(c, t, "theta_w");

  ctx.out.add("polar.csv", [&](std::ostream& os) { c.write_csv(os); });
  double worst = 0.0;
  for (const auto& smp : c.samples) worst = std::max(worst, smp.residual);
  json states = json::array();
  for (double t : thetas)
    states.push_back(
        {{"theta_w", t}, {"weak", detail::state_json(weak_state(c, t))}, {"strong", detail::state_json(strong_state(c, t))}});
  json s = {{"upstream",
             {{"gamma", up.gamma()},
              {"rho_inf", up.rho_inf()},
              {"q_inf", up.q_inf()},
              {"sound_speed", up.sound_speed()},
              {"mach_angle", up.mach_angle()}}},
            {"theta_d", c.theta_d},
            {"sigma_d", c.sigma_d},
            {"theta_d_sampled", c.theta_d_sampled},
            {"theta_sonic", c.theta_sonic},
            {"sigma_sonic", c.sigma_sonic},
            {"normal_state", detail::state_json(c.normal_state)},
            {"samples", c.samples.size()},
            {"rejected", c.rejected},
            {"max_residual", worst},
            {"states", states}};
  ctx.out.add_json("summary.json", s);

  ctx.plot("polar.svg", [&](std::ostream& os) {
    std::vector<double> x, y;
    for (const auto& pt : c.full_curve()) x.push_back(pt[0]), y.push_back(pt[1]);
    svg::LinePlot plot("shock polar", "u1", "u2");
    plot.add({"polar", x, y});
    const auto d = weak_state(c, c.theta_d);
    const auto so = weak_state(c, c.theta_sonic);
    plot.add({"detachment", {0.0, d.u1}, {0.0, d.u2}, true, true});
    plot.add({"sonic", {0.0, so.u1}, {0.0, so.u2}, true, true});
    plot.annotate(c.normal_state.u1, 0.0, "normal");
    plot.equal_aspect().write(os);
  });
  return s;
}

inline json run_geometry(RunContext& ctx) {
  const auto& root = ctx.root;
  root.allow({SONIC_CLI_COMMON_KEYS, "upstream", "state", "theta_w", "configuration", "k", "arc"});
  const double theta_w = root.number("theta_w");
  const auto cfg_name = root.choice("configuration", "reflection", {"reflection", "wedge-flow"});
  const auto cfg = cfg_name == "reflection" ? Configuration::reflection : Configuration::wedge_flow;
  const double k = root.number("k", 0.0);
  if (root.has("upstream") == root.has("state"))
    throw ValidationError("geometry needs exactly one of 'upstream' and 'state'");
  SelfSimilarState st;
  if (root.has("state")) {
    const auto sn = root.child("state");
    sn.allow({"gamma", "u0", "rho0"});
    const auto u0 = sn.numbers("u0", {});
    if (u0.size() != 2) throw ValidationError("'state.u0' must hold two numbers");
    st = {sn.number("gamma"), {u0[0], u0[1]}, sn.positive("rho0"), k};
  } else {
    const auto up = detail::parse_upstream(root);
    if (!up.supersonic()) throw ValidationError("upstream must be supersonic");
    const auto c = compute_polar(up);
    detail::check_attached(c, theta_w, "theta_w");
    st = self_similar_state(c, theta_w, k);
  }
  const auto geo = pseudo_sonic_geometry(st, theta_w, cfg);
  double t0 = 0.0, t1 = std::numbers::pi;
  long n = 181;
  if (auto a = root.optional_child("arc")) {
    a->allow({"theta0", "theta1", "points"});
    t0 = a->number("theta0", t0);
    t1 = a->number("theta1", t1);
    n = a->integer("points", n, 2);
  }
  if (!(t0 < t1)) throw ValidationError("'arc.theta0' must be below 'arc.theta1'");

  ctx.out.add("arc.csv", [&](std::ostream& os) { geo.write_arc_csv(os, t0, t1, static_cast<std::size_t>(n)); });
  json s = {{"configuration", to_string(cfg)},
            {"theta_w", theta_w},
            {"state", {{"gamma", st.gamma}, {"u0", {st.u0[0], st.u0[1]}}, {"rho0", st.rho0}, {"k", st.k}}},
            {"center", {geo.center()[0], geo.center()[1]}},
            {"radius", geo.radius()},
            {"arc", {{"theta0", t0}, {"theta1", t1}, {"points", n}}}};
  ctx.out.add_json("geometry.json", s);

  ctx.plot("geometry.svg", [&](std::ostream& os) {
    svg::LinePlot plot(std::string("sonic circle, ") + to_string(cfg), "xi1", "xi2");
    std::vector<double> cx, cy, ax, ay;
    for (const auto& q : geo.arc(0.0, 2.0 * std::numbers::pi, 241)) cx.push_back(q[0]), cy.push_back(q[1]);
    for (const auto& q : geo.arc(t0, t1, static_cast<std::size_t>(n))) ax.push_back(q[0]), ay.push_back(q[1]);
    const double r = geo.radius() + std::hypot(st.u0[0], st.u0[1]);
    plot.add({"sonic circle", cx, cy, true});
    plot.add({"arc", ax, ay});
    plot.add({"wall", {0.0, r * std::cos(theta_w)}, {0.0, r * std::sin(theta_w)}, false, false, "#000000"});
    plot.annotate(st.u0[0], st.u0[1], "u0");
    plot.equal_aspect().write(os);
  });
  return s;
}

using Runner = json (*)(RunContext&);

inline const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> m = {
      {"phase-portrait", run_phase_portrait}, {"profile", run_profile},         {"kz-check", run_kz_check},
      {"keldysh-solve", run_keldysh},         {"mixed-solve", run_mixed},       {"shock-polar", run_shock_polar},
      {"geometry", run_geometry}};
  return m;
}

#undef SONIC_CLI_COMMON_KEYS

}  // namespace sonic::cli
