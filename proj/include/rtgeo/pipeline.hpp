#pragma once

#include <rtgeo/curvature.hpp>
#include <rtgeo/geodesics.hpp>
#include <rtgeo/mollify.hpp>
#include <rtgeo/rt_solver.hpp>
#include <rtgeo/transform.hpp>

#include <nlohmann/json.hpp>

namespace rtgeo {

enum class PipelineMode { Existence, Uniqueness };

inline const char *to_string(PipelineMode m) {
  return m == PipelineMode::Existence ? "existence" : "uniqueness";
}

struct PipelineOptions {
  RTConfig rt;
  OdeOptions ode;
  int knot_cells = 1;
  double picard_tolerance = 1e-6; // rk4 vs Picard gap above which non-uniqueness is flagged
};

/// One regularization pass: RT solve, coordinates, optimal connection.
struct RegularizationPass {
  RTState rt;
  ConnectionField gamma_in;  // input, restricted to the sub-chart if the solver retried
  TransformBundle bundle;    // x -> y from the RT potential
  ConnectionField gamma_tilde;
  ConnectionField gamma_y_at_x; // J Gamma~ J^-1 J^-1 at the x-nodes, before resampling
  ConnectionField gamma_y;
  double integration_gap = 0.0; // C^0 gap between staircase integration of J and the potential
};

struct PipelineResult {
  Curve curve_x;
  Curve curve_y; // in the final regular coordinates
  std::vector<RegularizationPass> passes;
  nlohmann::json provenance;

  const ConnectionField &gamma_y() const { return passes.back().gamma_y; }
  const TransformBundle &bundle() const { return passes.front().bundle; }
};

namespace detail {

template <class F>
auto stage(const std::string &name, F &&f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError &) {
    throw;
  } catch (const Error &e) {
    throw StageError(name, e.what());
  }
}

inline double c0_gap(const GridField &a, const GridField &b) {
  return lp_norm(a - b, std::numeric_limits<double>::infinity());
}

} // namespace detail

/// RT solve around q, integration to coordinates, and Gamma_y.
inline RegularizationPass regularize(const ConnectionField &gx, const Point &q, const RTConfig &cfg,
                                     const std::string &label) {
  RegularizationPass r;
  r.rt = detail::stage(label + ".rt", [&] { return solve_reduced_rt(gx, cfg, q); });
  r.gamma_in = r.rt.subchart ? restrict_connection(gx, r.rt.chart()) : gx;
  const Chart &cx = r.rt.chart();
  // y = x on the boundary, so the y-chart has the bounds of the x-chart
  r.bundle = detail::stage(label + ".integrate", [&] {
    TransformBundle b = make_bundle(r.rt.y, cx, q);
    if (b.coverage < 1.0)
      throw DomainError("RT map covers only " + std::to_string(b.coverage) + " of the y-chart");
    IntegrationResult ir = integrate_jacobian(b.J, q, b.map.forward_at(q), cx);
    r.integration_gap = detail::c0_gap(ir.map.forward(), r.rt.y);
    return b;
  });
  r.gamma_tilde = detail::stage(label + ".optimal_connection",
                                [&] { return split_transform(r.gamma_in, r.bundle.J).tilde; });
  r.gamma_y_at_x = tensor_push(r.gamma_tilde, r.bundle.J);
  r.gamma_y = detail::stage(label + ".optimal_connection",
                            [&] { return optimal_connection(r.gamma_tilde, r.bundle); });
  return r;
}

inline nlohmann::json pass_json(const RegularizationPass &r, double p) {
  const double alpha = morrey_exponent(r.gamma_in.dim(), p);
  return {{"rt", r.rt},
          {"integration_gap", r.integration_gap},
          {"curl_residual", r.bundle.curl_residual},
          {"coverage", r.bundle.coverage},
          {"gamma_in", norm_report(r.gamma_in.form(), p, alpha)},
          {"gamma_y", norm_report(r.gamma_y.form(), p, alpha)}};
}

/// Weak solution by coordinates: regularize Gamma_x (twice in uniqueness
/// mode), solve the geodesic classically in y, and map the curve back.
inline PipelineResult weak_solution_pipeline(const ConnectionField &gx, const GeodesicProblem &pb,
                                             PipelineMode mode, const PipelineOptions &opt = {}) {
  PipelineResult out;
  const double p = opt.rt.p;
  auto &prov = out.provenance;
  prov["mode"] = to_string(mode);
  auto rep = detail::stage("weak_curvature",
                           [&] { return represent_weak(gx, make_spline_basis(gx.chart(), opt.knot_cells)); });
  if (!std::isfinite(rep.residual))
    throw StageError("weak_curvature", "weak curvature representation is not finite");
  prov["weak_curvature"] = {{"residual", rep.residual},
                            {"basis_size", rep.basis_size},
                            {"lp", lp_norm(rep.curvature.field, p)}};
  if (mode == PipelineMode::Uniqueness) {
    double w1p = lp_norm(rep.curvature.field, p) + gradient_lp(rep.curvature.field, p);
    prov["weak_curvature"]["w1p"] = w1p;
    if (!std::isfinite(w1p))
      throw StageError("weak_curvature", "curvature W1p norm is not finite");
  }

  out.passes.push_back(regularize(gx, pb.x0, opt.rt, "pass1"));
  if (mode == PipelineMode::Uniqueness) {
    const auto &first = out.passes.front();
    Point q = first.bundle.map.forward_at(pb.x0);
    out.passes.push_back(regularize(first.gamma_y, q, opt.rt, "pass2"));
  }
  prov["passes"] = nlohmann::json::array();
  for (const auto &r : out.passes)
    prov["passes"].push_back(pass_json(r, p));

  // push the initial data through every pass
  GeodesicProblem py = pb;
  detail::stage("geodesic", [&] {
    for (const auto &r : out.passes) {
      const int n = r.bundle.source().dim();
      Eigen::MatrixXd J = as_matrix(interpolate(r.bundle.J.j(), py.x0), n, n);
      Eigen::VectorXd w = J * Eigen::Map<const Eigen::VectorXd>(py.v0.data(), n);
      py.x0 = r.bundle.map.forward_at(py.x0);
      py.v0 = Point(w.data(), w.data() + n);
    }
    py.source = ConnectionSource::grid(out.gamma_y());
    py.force.reset();
    if (pb.force)
      throw ConfigError("weak_solution_pipeline handles the unforced equation only");
    out.curve_y = solve_geodesic(py, OdeMethod::RK4, opt.ode);
    return 0;
  });
  if (mode == PipelineMode::Uniqueness) {
    detail::stage("geodesic.picard", [&] {
      Curve pc = solve_geodesic(py, OdeMethod::Picard, opt.ode);
      double gap = c1_distance(pc, out.curve_y);
      out.curve_y.nonuniqueness_flag = gap > opt.picard_tolerance;
      prov["picard_gap"] = gap;
      return 0;
    });
  }
  out.curve_x = detail::stage("pullback", [&] {
    Curve c = out.curve_y;
    for (auto it = out.passes.rbegin(); it != out.passes.rend(); ++it)
      c = pullback_curve(c, it->bundle);
    return c;
  });
  prov["curve"] = {{"samples", out.curve_x.size()},
                   {"length", out.curve_x.length()},
                   {"truncated", out.curve_x.truncated},
                   {"nonuniqueness_candidate", out.curve_y.nonuniqueness_flag}};
  return out;
}

/// One rung of the mollification ladder.
struct MollifiedMember {
  double eps = 0.0;
  std::optional<ConnectionField> gamma_y; // mollified Gamma_y
  std::optional<TransformBundle> bundle;  // mollified maps y_eps(x), x_eps(y), J_eps = D y_eps
  std::optional<ConnectionField> gamma_x; // connection law applied to the smooth pieces
  double round_trip = 0.0;                // C^0 size of x_eps(y_eps(x)) - x on interior nodes
  std::string error;

  bool ok() const { return error.empty(); }
};

struct MollifiedFamily {
  std::vector<MollifiedMember> members;
};

/// Gamma_x^eps = J_eps^-1 (J_eps J_eps Gamma_y^eps(y_eps) + dJ_eps) for every eps.
///
/// `gy_at_x` holds Gamma_y at the images y(x) of the x-nodes. Gamma_y^eps is
/// the convolution in y evaluated by change of variables over the x-grid, so
/// the rough field is never resampled; the maps are mollified with odd
/// reflection, which keeps boundary values and affine parts exact.
inline MollifiedFamily mollified_family_at_x(const ConnectionField &gy_at_x, const TransformBundle &b,
                                             const std::vector<double> &eps_list) {
  MollifiedFamily fam;
  const GridField ypos = detail::position_field(b.target());
  for (double eps : eps_list) {
    MollifiedMember m;
    m.eps = eps;
    try {
      if (!(eps >= 2.0 * b.target().max_spacing() * (1.0 - 1e-12)))
        throw ResolutionError("eps = " + std::to_string(eps) + " is below 2h on the y-chart");
      GridField ye = mollify(b.map.forward(), eps, MollifyBoundary::Reflect);
      GridField xe = mollify(b.map.inverse(), eps, MollifyBoundary::Reflect);
      TransformBundle be{CoordinateMap(ye, xe, b.map.basepoint()), JacobianField(jacobian_samples(ye))};
      be.curl_residual = jacobian_curl(be.J.j());
      const Chart &cx = ye.chart();
      for (std::size_t node = 0; node < cx.point_count(); ++node) {
        if (cx.is_boundary(node))
          continue;
        Point x = cx.node_point(node);
        Point back = interpolate(xe, ye.node_values(node));
        for (int a = 0; a < cx.dim(); ++a)
          m.round_trip = std::max(m.round_trip, std::abs(back[a] - x[a]));
      }
      const GridField &y = b.map.forward();
      const GridField &det = b.J.det();
      m.gamma_y = ConnectionField(mollify_through_map(gy_at_x.form(), y, det, ypos, eps));
      m.gamma_x = apply_connection_law(mollify_through_map(gy_at_x.form(), y, det, ye, eps), be.J);
      m.bundle = std::move(be);
    } catch (const Error &e) {
      m.error = e.what();
    }
    fam.members.push_back(std::move(m));
  }
  return fam;
}

/// Same ladder from Gamma_y sampled on the y-chart (interpolated at y(x) first).
inline MollifiedFamily mollified_family(const ConnectionField &gy, const TransformBundle &b,
                                        const std::vector<double> &eps_list) {
  const Chart &cx = b.source();
  GridField at_x(cx, gy.form().shape());
  for (std::size_t node = 0; node < cx.point_count(); ++node) {
    Point y(b.map.forward().node_values(node).begin(), b.map.forward().node_values(node).end());
    for (int a = 0; a < cx.dim(); ++a)
      y[a] = std::clamp(y[a], gy.chart().bounds()[a].lo, gy.chart().bounds()[a].hi);
    interpolate_into(gy.form(), y, at_x.node_values(node));
  }
  return mollified_family_at_x(ConnectionField(std::move(at_x)), b, eps_list);
}

struct MollifiedCurves {
  std::vector<Curve> curves; // cut to the common interval
  double common_interval = 0.0;
};

/// rk4 on every Gamma_x^eps in x-coordinates, cut to the common interval.
inline MollifiedCurves solve_mollified(const MollifiedFamily &fam, const GeodesicProblem &pb,
                                       const OdeOptions &opt = {}) {
  MollifiedCurves out;
  std::size_t common = std::numeric_limits<std::size_t>::max();
  for (const auto &m : fam.members) {
    if (!m.ok())
      throw StageError("mollified", "eps = " + std::to_string(m.eps) + ": " + m.error);
    GeodesicProblem q = pb;
    q.source = ConnectionSource::grid(*m.gamma_x);
    Curve c = solve_geodesic(q, OdeMethod::RK4, opt);
    if (c.size() < 2)
      throw StageError("mollified", "empty common interval: eps = " + std::to_string(m.eps) +
                                        " leaves at t0");
    common = std::min(common, c.size());
    out.curves.push_back(std::move(c));
  }
  for (auto &c : out.curves)
    c = head(c, common);
  out.common_interval = out.curves.empty() ? 0.0 : out.curves.front().length();
  return out;
}

struct ConvergenceEntry {
  double eps = 0.0;
  double gamma_l2p = 0.0;    // |Gamma_x^eps - Gamma_x|_{L^{2p}}
  double curvature_lp = 0.0; // |Riem(Gamma_x^eps) - R_x|_{L^p}, both weak-represented
  double curvature_lp_interior = 0.0; // the same on the inset window (diagnostic)
  double c1 = 0.0;           // |gamma_eps - gamma|_{C^1} on the common interval
};

struct ConvergenceReport {
  std::vector<ConvergenceEntry> entries;
  double rate_gamma = 0.0, rate_curvature = 0.0, rate_c1 = 0.0;
  bool monotone_gamma = false, monotone_curvature = false, monotone_c1 = false;
  double common_interval = 0.0;
  bool interval_ok = false;
  bool c1_final_ok = false;
  bool pass = false;
};

inline void to_json(nlohmann::json &j, const ConvergenceEntry &e) {
  j = {{"eps", e.eps},
       {"gamma_l2p", e.gamma_l2p},
       {"curvature_lp", e.curvature_lp},
       {"curvature_lp_interior", e.curvature_lp_interior},
       {"c1", e.c1}};
}

inline void to_json(nlohmann::json &j, const ConvergenceReport &r) {
  j = {{"ladder", r.entries},
       {"rates", {{"gamma_l2p", r.rate_gamma}, {"curvature_lp", r.rate_curvature}, {"c1", r.rate_c1}}},
       {"monotone", {{"gamma_l2p", r.monotone_gamma}, {"curvature_lp", r.monotone_curvature}, {"c1", r.monotone_c1}}},
       {"common_interval", r.common_interval},
       {"interval_ok", r.interval_ok},
       {"c1_final_ok", r.c1_final_ok},
       {"pass", r.pass}};
}

namespace detail {

// Least-squares slope of log(metric) against log(eps); 0 when a metric vanishes.
inline double loglog_slope(const std::vector<double> &eps, const std::vector<double> &m) {
  const std::size_t k = eps.size();
  if (k < 2)
    return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(m[i] > 0.0))
      return 0.0;
    double x = std::log(eps[i]), y = std::log(m[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

// Nonincreasing as eps decreases; values at the 1e-10 rounding floor count as converged.
inline bool nonincreasing(const std::vector<double> &m) {
  for (std::size_t i = 1; i < m.size(); ++i)
    if (m[i] > m[i - 1] * (1.0 + 1e-12) + 1e-10)
      return false;
  return true;
}

} // namespace detail

struct ConvergenceOptions {
  double p = 4.0;
  int knot_cells = 1;
  double window_fraction = 0.25; // interior diagnostic only
  double c1_tolerance = 1e-2;
  double min_interval = 0.5;
};

/// Fills the three ladder metrics against the weak solution `reference` and
/// the weak curvature `rx` of Gamma_x.
inline ConvergenceReport convergence_report(const MollifiedFamily &fam, const MollifiedCurves &curves,
                                            const Curve &reference, const ConnectionField &gx,
                                            const CurvatureField &rx, const ConvergenceOptions &opt = {}) {
  ConvergenceReport r;
  const Chart &c = gx.chart();
  Box window = inset(c, opt.window_fraction, 8.0 * opt.knot_cells);
  auto basis = make_spline_basis(c, opt.knot_cells);
  std::vector<double> eps, mg, mr, mc;
  for (std::size_t i = 0; i < fam.members.size(); ++i) {
    const auto &m = fam.members[i];
    ConvergenceEntry e;
    e.eps = m.eps;
    e.gamma_l2p = lp_distance(m.gamma_x->form(), gx.form(), 2.0 * opt.p);
    auto rep = represent_weak(*m.gamma_x, basis);
    e.curvature_lp = lp_distance(rep.curvature.field, rx.field, opt.p);
    e.curvature_lp_interior = lp_distance(rep.curvature.field, rx.field, opt.p, window);
    Curve ref = head(reference, curves.curves[i].size());
    e.c1 = c1_distance(curves.curves[i], ref);
    if (ref.size() < curves.curves[i].size())
      e.c1 = std::numeric_limits<double>::infinity();
    eps.push_back(e.eps);
    mg.push_back(e.gamma_l2p);
    mr.push_back(e.curvature_lp);
    mc.push_back(e.c1);
    r.entries.push_back(e);
  }
  r.rate_gamma = detail::loglog_slope(eps, mg);
  r.rate_curvature = detail::loglog_slope(eps, mr);
  r.rate_c1 = detail::loglog_slope(eps, mc);
  r.monotone_gamma = detail::nonincreasing(mg);
  r.monotone_curvature = detail::nonincreasing(mr);
  r.monotone_c1 = detail::nonincreasing(mc);
  r.common_interval = curves.common_interval;
  r.interval_ok = r.common_interval >= opt.min_interval - 1e-12;
  r.c1_final_ok = !mc.empty() && mc.back() < opt.c1_tolerance;
  r.pass = r.monotone_gamma && r.monotone_curvature && r.monotone_c1 && r.interval_ok && r.c1_final_ok;
  return r;
}

} // namespace rtgeo
