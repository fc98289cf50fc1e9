#pragma once

#include <rtgeo/curvature.hpp>
#include <rtgeo/pipeline.hpp>
#include <rtgeo/scenario.hpp>

#include <numbers>

namespace rtgeo {

// ---------------------------------------------------------------- identities

/// Residual of one identity over a grid ladder.
struct IdentitySuite {
  std::string map;
  std::string identity; // coderivative | dgamma | dgamma_without_wedge
  std::vector<int> grids;
  std::vector<double> residual_lp;
  std::vector<double> lhs_lp;
  std::vector<double> ratio; // residual(h) / residual(h/2)
  bool exact = false;        // the discrete identity holds to rounding
  bool control = false;      // negative control: must not converge
  bool pass = false;
};

inline void to_json(nlohmann::json &j, const IdentitySuite &s) {
  j = {{"map", s.map},       {"identity", s.identity}, {"grids", s.grids},
       {"residual_lp", s.residual_lp}, {"lhs_lp", s.lhs_lp}, {"ratio", s.ratio},
       {"exact", s.exact},   {"control", s.control},   {"pass", s.pass}};
}

struct IdentityStudy {
  std::vector<IdentitySuite> suites;
  bool pass = false;
};

inline void to_json(nlohmann::json &j, const IdentityStudy &s) {
  j = {{"suites", s.suites}, {"pass", s.pass}};
}

namespace detail {

inline constexpr double kRoundingFloor = 1e-10;


inline std::vector<double> refinement_ratios(const std::vector<double> &r) {
  std::vector<double> out;
  for (std::size_t i = 1; i < r.size(); ++i)
    out.push_back(r[i] > 0.0 ? r[i - 1] / r[i] : std::numeric_limits<double>::infinity());
  return out;
}

inline void grade_converging(IdentitySuite &s) {
  s.ratio = refinement_ratios(s.residual_lp);
  s.exact = std::all_of(s.residual_lp.begin(), s.residual_lp.end(),
                        [&](double r) { return r <= kRoundingFloor; });
  bool second_order =
      !s.ratio.empty() && std::all_of(s.ratio.begin(), s.ratio.end(), [](double q) { return q >= 3.0 && q <= 5.0; });
  s.pass = s.exact || second_order;
}

} // namespace detail

/// Both transformation identities on Gamma_x = Gamma~ + J^-1 dJ built from
/// a smooth Gamma~ and the sampled Jacobian of `m` on the unit square.
///
/// A map with polynomial Jacobian of degree one makes the discrete identities
/// exact; otherwise the residual must fall like h^2. Dropping the wedge term
/// is the negative control and must leave an O(1) residual.
inline IdentityStudy identity_study(const std::vector<AnalyticMap> &maps, const std::vector<int> &grids,
                                    double p) {
  if (grids.size() < 2)
    throw ConfigError("identity suites need at least two grids");
  IdentityStudy study;
  const int n = 2;
  for (const auto &m : maps) {
    auto suite = [&](const char *identity) {
      IdentitySuite s;
      s.map = m.kind;
      s.identity = identity;
      s.grids = grids;
      return s;
    };
    IdentitySuite co = suite("coderivative"), dg = suite("dgamma"), drop = suite("dgamma_without_wedge");
    drop.control = true;
    for (int N : grids) {
      Chart c = make_chart(n, {{0.0, 1.0}, {0.0, 1.0}}, {N, N});
      GridField Js = sample_field(
          c,
          [&](std::span<const double> x, std::span<double> o) {
            Eigen::MatrixXd J = m.jacobian(Point(x.begin(), x.end()));
            for (int a = 0; a < n; ++a)
              for (int b = 0; b < n; ++b)
                o[a * n + b] = J(a, b);
          },
          matrix_shape(n));
      JacobianField J(Js);
      ConnectionField gt(sample_field(
          c,
          [](std::span<const double> x, std::span<double> o) {
            for (std::size_t k = 0; k < o.size(); ++k)
              o[k] = 0.3 * std::sin(1.0 + k + x[0] * (1 + k % 3) + 2.0 * x[1]);
          },
          connection_shape(n)));
      ConnectionField gx(gt.form() + product(J.inverse(), exterior_derivative(J.j())));
      co.residual_lp.push_back(lp_norm(coderivative_identity_defect(gx, gt, J), p));
      co.lhs_lp.push_back(lp_norm(coderivative(gx.form()), p));
      dg.residual_lp.push_back(lp_norm(dgamma_identity_defect(gx, gt, J), p));
      dg.lhs_lp.push_back(lp_norm(exterior_derivative(gx.form()), p));
      drop.residual_lp.push_back(lp_norm(dgamma_identity_defect(gx, gt, J, true), p));
      drop.lhs_lp.push_back(dg.lhs_lp.back());
    }
    detail::grade_converging(co);
    detail::grade_converging(dg);
    study.suites.push_back(co);
    study.suites.push_back(dg);
    if (!dg.exact || drop.residual_lp.back() > detail::kRoundingFloor) {
      // the control must stay far above the honest residual and not converge
      drop.ratio = detail::refinement_ratios(drop.residual_lp);
      drop.pass = drop.residual_lp.back() >= 100.0 * dg.residual_lp.back() &&
                  drop.residual_lp.back() >= 0.5 * drop.residual_lp.front();
      study.suites.push_back(drop);
    }
  }
  study.pass = !study.suites.empty() &&
               std::all_of(study.suites.begin(), study.suites.end(), [](const auto &s) { return s.pass; });
  return study;
}

/// Lebesgue exponent of the identity residuals. The suites run on smooth
/// manufactured data, so it does not follow the exponent of a scenario.
inline constexpr double kIdentityExponent = 4.0;

/// The identity maps used by check-identities: quadratic (exact), cubic and
/// a seeded trigonometric perturbation of the identity.
inline std::vector<AnalyticMap> identity_maps(std::uint64_t seed) {
  return {quadratic_map(), cubic_map(), trig_map(2, seed)};
}

// ------------------------------------------------------ cancellation witness

/// First RT residual across the mollification ladder.
struct CancellationWitness {
  std::vector<double> eps;
  std::vector<FirstRTResidual> rungs;
  std::vector<int> iterations;
  double bound_fraction = 0.1; // residual <= fraction * |delta Gamma_x^eps| on every rung
  double growth = 0.0;         // |delta Gamma_x^eps| last rung / first rung
  bool bounded = false;
  bool grows = false;
  bool pass = false;
};

inline void to_json(nlohmann::json &j, const CancellationWitness &w) {
  j = {{"eps", w.eps},       {"rungs", w.rungs},   {"iterations", w.iterations},
       {"bound_fraction", w.bound_fraction},        {"growth", w.growth},
       {"bounded", w.bounded}, {"grows", w.grows}, {"pass", w.pass}};
}

/// Solves the RT system on every Gamma_x^eps and evaluates the first RT
/// residual two cells in from the boundary.
inline CancellationWitness cancellation_witness(const MollifiedFamily &fam, const RTConfig &cfg,
                                                const Point &q, double bound_fraction = 0.1) {
  CancellationWitness w;
  w.bound_fraction = bound_fraction;
  w.bounded = true;
  for (const auto &m : fam.members) {
    if (!m.ok())
      throw StageError("cancellation", "eps = " + std::to_string(m.eps) + ": " + m.error);
    RTState st = solve_reduced_rt(*m.gamma_x, cfg, q);
    JacobianField J(st.J);
    ConnectionField gx = st.subchart ? restrict_connection(*m.gamma_x, st.chart()) : *m.gamma_x;
    ConnectionField gt = assemble_gamma_tilde(gx, J);
    FirstRTResidual r = first_rt_residual(gt, gx, J, st.B, cfg.p, inset(st.chart(), 0.0, 2.0));
    w.bounded = w.bounded && r.residual_lp <= bound_fraction * r.delta_gamma_lp;
    w.eps.push_back(m.eps);
    w.rungs.push_back(r);
    w.iterations.push_back(st.iterations);
  }
  if (w.rungs.size() >= 2 && w.rungs.front().delta_gamma_lp > 0.0)
    w.growth = w.rungs.back().delta_gamma_lp / w.rungs.front().delta_gamma_lp;
  w.grows = w.growth >= 2.0;
  w.pass = w.bounded && w.grows;
  return w;
}

// --------------------------------------------------------- regularity ladder

struct RegularityRung {
  int grid = 0;
  int iterations = 0;
  double gamma_x_w1p = 0.0; // inner window
  double gamma_y_w1p = 0.0;
  double gamma_x_w1p_full = 0.0;
  double gamma_y_w1p_full = 0.0;
};

inline void to_json(nlohmann::json &j, const RegularityRung &r) {
  j = {{"grid", r.grid},
       {"iterations", r.iterations},
       {"gamma_x_w1p", r.gamma_x_w1p},
       {"gamma_y_w1p", r.gamma_y_w1p},
       {"gamma_x_w1p_full", r.gamma_x_w1p_full},
       {"gamma_y_w1p_full", r.gamma_y_w1p_full}};
}

struct RegularityLadder {
  std::vector<RegularityRung> rungs;
  double window_fraction = 0.25;
  double growth_x = 0.0; // finest / coarsest, inner window
  double change_y = 0.0; // |finest / coarsest - 1|, inner window
  bool gain = false;     // growth_x >= 2 and change_y < 0.25
};

inline void to_json(nlohmann::json &j, const RegularityLadder &l) {
  j = {{"rungs", l.rungs},       {"window_fraction", l.window_fraction}, {"growth_x", l.growth_x},
       {"change_y", l.change_y}, {"gain", l.gain}};
}

/// W^{1,p} sizes of Gamma_x and of the RT-regularized Gamma_y per grid.
///
/// The norms are taken on an inner window of each chart; full-chart values
/// are recorded next to them.
inline RegularityLadder regularity_ladder(const std::vector<Scenario> &scenarios, const RTConfig &cfg,
                                          double window_fraction) {
  RegularityLadder l;
  l.window_fraction = window_fraction;
  for (const auto &s : scenarios) {
    RegularizationPass pass = regularize(s.gamma_x, s.spec.x0, cfg, "regularity");
    const double p = cfg.p, alpha = morrey_exponent(s.chart().dim(), p);
    auto w1p = [&](const ConnectionField &g, std::optional<Box> w) {
      NormOptions o;
      o.window = w;
      o.holder = false;
      return norm_report(g.form(), p, alpha, o).w1p;
    };
    RegularityRung r;
    r.grid = s.chart().resolution(0);
    r.iterations = pass.rt.iterations;
    r.gamma_x_w1p = w1p(pass.gamma_in, inset(pass.gamma_in.chart(), window_fraction));
    r.gamma_y_w1p = w1p(pass.gamma_y, inset(pass.gamma_y.chart(), window_fraction));
    r.gamma_x_w1p_full = w1p(pass.gamma_in, std::nullopt);
    r.gamma_y_w1p_full = w1p(pass.gamma_y, std::nullopt);
    l.rungs.push_back(r);
  }
  if (l.rungs.size() >= 2 && l.rungs.front().gamma_x_w1p > 0.0 && l.rungs.front().gamma_y_w1p > 0.0) {
    l.growth_x = l.rungs.back().gamma_x_w1p / l.rungs.front().gamma_x_w1p;
    l.change_y = std::abs(l.rungs.back().gamma_y_w1p / l.rungs.front().gamma_y_w1p - 1.0);
  }
  l.gain = l.growth_x >= 2.0 && l.change_y < 0.25;
  return l;
}

// ---------------------------------------------- curvature tensoriality ladder

struct LemmaLadder {
  std::vector<LemmaB1Report> scenario;
  std::vector<LemmaB1Report> control_honest;  // curved control, full tensor law
  std::vector<LemmaB1Report> control_dropped; // same data, one factor dropped
  bool scenario_pass = false;
  bool scenario_decreasing = false;
  bool control_honest_pass = false;
  bool control_fails = false;
  bool pass = false;
};

inline void to_json(nlohmann::json &j, const LemmaLadder &l) {
  j = {{"scenario", l.scenario},
       {"control_honest", l.control_honest},
       {"control_dropped", l.control_dropped},
       {"scenario_pass", l.scenario_pass},
       {"scenario_decreasing", l.scenario_decreasing},
       {"control_honest_pass", l.control_honest_pass},
       {"control_fails", l.control_fails},
       {"pass", l.pass}};
}

namespace detail {

// Nonincreasing, values below `floor` counting as equal.
inline bool decreasing_with_floor(const std::vector<double> &v, double floor) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] && v[i] > floor)
      return false;
  return !v.empty();
}

} // namespace detail

/// Curved negative-control scenario: the sphere connection seen through the
/// shear y2 = x2 + x1^2 / 2, so every Jacobian factor matters.
inline ScenarioSpec lemma_control_spec(int resolution) {
  ScenarioSpec s;
  s.name = "lemma_control";
  s.hidden = "sphere";
  s.map = "quadratic";
  s.bounds = {{std::numbers::pi / 4, 3 * std::numbers::pi / 4}, {-0.25, 1.25}};
  s.resolution = resolution;
  s.x0 = {1.5, 0.5};
  s.v0 = {0.0, 0.5};
  return s;
}

/// Curvature tensoriality on every grid of the scenario ladder, plus the negative control.
/// The control must always differ by a fixed fraction of the curvature and
/// fail the tolerance on the finest grid.
inline LemmaLadder lemma_ladder(const std::vector<Scenario> &scenarios, const LemmaB1Options &opt) {
  LemmaLadder l;
  std::vector<double> d;
  for (const auto &s : scenarios) {
    l.scenario.push_back(lemma_b1_check(s.gamma_x, s.hidden.gamma_y, s.hidden.bundle.J, s.hidden.bundle.map, opt));
    d.push_back(l.scenario.back().distance);
    Scenario c = generate_scenario(lemma_control_spec(s.chart().resolution(0)));
    l.control_honest.push_back(lemma_b1_check(c.gamma_x, c.hidden.gamma_y, c.hidden.bundle.J, c.hidden.bundle.map, opt));
    LemmaB1Options dropped = opt;
    dropped.drop_factor = true;
    l.control_dropped.push_back(
        lemma_b1_check(c.gamma_x, c.hidden.gamma_y, c.hidden.bundle.J, c.hidden.bundle.map, dropped));
  }
  auto passed = [](const LemmaB1Report &r) { return r.pass; };
  l.scenario_pass = std::all_of(l.scenario.begin(), l.scenario.end(), passed);
  l.scenario_decreasing = detail::decreasing_with_floor(d, 1e-12);
  l.control_honest_pass = std::all_of(l.control_honest.begin(), l.control_honest.end(), passed);
  l.control_fails = !l.control_dropped.empty() && !l.control_dropped.back().pass &&
                    std::all_of(l.control_dropped.begin(), l.control_dropped.end(), [](const auto &r) {
                      return r.distance >= 0.1 * r.reference_norm;
                    });
  l.pass = l.scenario_pass && l.scenario_decreasing && l.control_honest_pass && l.control_fails;
  return l;
}

// ------------------------------------------------------- solver cross-checks

struct SolverCrossCheck {
  std::vector<double> dts;
  std::vector<double> errors;     // endpoint error against a dt/8 reference
  std::vector<double> ratios;     // successive error ratios under halving
  double picard_gap = 0.0;        // C^1 gap Picard vs rk4
  double great_circle_error = -1; // C^1 error of the equatorial geodesic, < 0 when not run
  bool halving_ok = false;
  bool picard_ok = false;
  bool great_circle_ok = false;
  bool pass = false;
};

inline void to_json(nlohmann::json &j, const SolverCrossCheck &s) {
  j = {{"dts", s.dts},
       {"errors", s.errors},
       {"ratios", s.ratios},
       {"picard_gap", s.picard_gap},
       {"great_circle_error", s.great_circle_error},
       {"halving_ok", s.halving_ok},
       {"picard_ok", s.picard_ok},
       {"great_circle_ok", s.great_circle_ok},
       {"pass", s.pass}};
}

namespace detail {

inline double endpoint_error(const Curve &a, const Curve &b) {
  double dx = 0.0, dv = 0.0;
  for (int k = 0; k < a.dim(); ++k) {
    dx += std::pow(a.x.back()[k] - b.x.back()[k], 2);
    dv += std::pow(a.v.back()[k] - b.v.back()[k], 2);
  }
  return std::sqrt(dx) + std::sqrt(dv);
}

} // namespace detail

/// rk4 halving ratios and the Picard comparison on the closed-form
/// connection from (x0, v0); the grid geodesic `grid_pb` is compared with
/// the equatorial great circle when `great_circle` is set.
inline SolverCrossCheck solver_cross_check(const ConnectionSource &analytic, const Point &x0, const Point &v0,
                                           const GeodesicProblem &grid_pb, bool great_circle) {
  SolverCrossCheck s;
  GeodesicProblem pb{analytic, 0.0, x0, v0, 1.0, std::nullopt};
  OdeOptions o;
  o.dt = 1.0 / 1024.0;
  Curve ref = solve_geodesic(pb, OdeMethod::RK4, o);
  if (ref.truncated)
    throw DomainError("cross-check geodesic leaves the chart: " + ref.truncation);
  for (double dt : {1.0 / 32, 1.0 / 64, 1.0 / 128}) {
    o.dt = dt;
    s.dts.push_back(dt);
    s.errors.push_back(detail::endpoint_error(solve_geodesic(pb, OdeMethod::RK4, o), ref));
  }
  s.ratios = detail::refinement_ratios(s.errors);
  s.halving_ok = std::all_of(s.ratios.begin(), s.ratios.end(), [](double q) { return q >= 12.0 && q <= 20.0; });
  o.dt = 1.0 / 512.0;
  s.picard_gap = c1_distance(solve_geodesic(pb, OdeMethod::Picard, o), solve_geodesic(pb, OdeMethod::RK4, o));
  s.picard_ok = s.picard_gap < 1e-6;
  s.great_circle_ok = true;
  if (great_circle) {
    if (std::abs(grid_pb.x0[0] - std::numbers::pi / 2) > 1e-12 || grid_pb.v0[0] != 0.0)
      throw ConfigError("great-circle check needs an equatorial start with zero polar velocity");
    Curve c = solve_geodesic(grid_pb, OdeMethod::RK4, o);
    s.great_circle_error = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double t = c.t[i] - c.t0();
      double e = std::hypot(c.x[i][0] - std::numbers::pi / 2, c.x[i][1] - (grid_pb.x0[1] + grid_pb.v0[1] * t)) +
                 std::hypot(c.v[i][0], c.v[i][1] - grid_pb.v0[1]);
      s.great_circle_error = std::max(s.great_circle_error, e);
    }
    s.great_circle_ok = s.great_circle_error < 1e-6 && !c.truncated;
  }
  s.pass = s.halving_ok && s.picard_ok && s.great_circle_ok;
  return s;
}

} // namespace rtgeo
