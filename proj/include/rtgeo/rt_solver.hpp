#pragma once

#include <rtgeo/calculus.hpp>
#include <rtgeo/fields.hpp>
#include <rtgeo/norms.hpp>
#include <rtgeo/poisson.hpp>
#include <rtgeo/transform.hpp>

#include <nlohmann/json.hpp>

namespace rtgeo {

struct RTConfig {
  int max_iterations = 200;
  double elliptic_tolerance = 1e-10;
  double fixed_point_tolerance = 1e-10;
  double damping = 0.5;
  double p = 4.0;
  double determinant_bound = 1e-3;
  bool retry_subchart = true;
};

/// Unknowns of the reduced RT system and their residual history.
struct RTState {
  int iterations = 0;
  GridField y;       // coordinate map whose gradient is J
  GridField J;       // matrix 0-form
  GridField B;       // matrix 0-form with Laplace J = delta(J Gamma) - B exactly
  GridField Bvec;    // vector-valued 1-form from the div-curl solve
  GridField w;       // free function of the divergence equation (zero)
  std::vector<double> history;  // L^{2p} size of successive J updates
  double residual_j = 0.0;     // Laplace J - delta(J Gamma) + B with the solved B, interior
  double residual_curl = 0.0;  // d Bvec - target, interior
  double residual_div = 0.0;   // delta Bvec - w, interior
  double det_min = 0.0;
  double curl_residual = 0.0;
  bool subchart = false;        // solved on the half-radius retry chart

  const Chart &chart() const { return J.chart(); }
};

inline void to_json(nlohmann::json &j, const RTState &s) {
  j = {{"iters", s.iterations},
       {"residuals", {{"j", s.residual_j}, {"curl", s.residual_curl}, {"div", s.residual_div}}},
       {"det_min", s.det_min},
       {"curl_residual", s.curl_residual},
       {"subchart", s.subchart},
       {"chart", s.chart().describe()},
       {"history", s.history}};
}

namespace detail {

inline GridField identity_matrix_field(const Chart &c) {
  return identity_jacobian(c).j();
}

inline GridField position_field(const Chart &c) {
  return sample_field(
      c, [](std::span<const double> x, std::span<double> o) { std::copy(x.begin(), x.end(), o.begin()); },
      vector_shape(c.dim()));
}

inline Box interior_box(const Chart &c, int cells = 2) { return inset(c, 0.0, cells); }

// Right-hand side of the B-vec equation, the vector divergence of
// d(J Gamma) = dJ ^ Gamma + J dGamma. Differencing the product directly keeps
// d D J = 0 exact, which the split form loses on rough data.
inline GridField bvec_target(const GridField &J, const GridField &gamma) {
  return vector_divergence(exterior_derivative(product(J, gamma)));
}

} // namespace detail

/// Damped fixed-point solve of the reduced RT system for (J, B).
///
/// One sweep: solve Laplace Bvec = delta(target) with zero data so that
/// d Bvec matches the target and delta Bvec = 0; solve Laplace J~ =
/// delta(J Gamma) - B with identity data; project J~ onto gradients by
/// Laplace y = delta(J~ rows) with y = x on the boundary; relax J toward D y.
inline RTState solve_reduced_rt_on(const ConnectionField &gx, const RTConfig &cfg) {
  const Chart &c = gx.chart();
  const int n = c.dim();
  const GridField &gamma = gx.form();
  const GridField identity = detail::identity_matrix_field(c);
  const GridField xpos = detail::position_field(c);
  RTState s;
  s.y = xpos;
  s.J = identity;
  s.w = GridField(c, vector_shape(n));
  const GridField bzero(c, {1, n, 1});
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    GridField target = detail::bvec_target(s.J, gamma);
    GridField bvec = poisson_solve(coderivative(target), bzero);
    GridField B = devectorize(bvec);
    GridField S = coderivative(product(s.J, gamma));
    GridField Jt = poisson_solve(S - B, identity);
    GridField ynew = poisson_solve(coderivative(vectorize(Jt)), xpos);
    GridField yrel = (1.0 - cfg.damping) * s.y + cfg.damping * ynew;
    GridField Jnew = jacobian_samples(yrel);
    double change = lp_norm(Jnew - s.J, 2.0 * cfg.p);
    s.history.push_back(change);
    s.y = std::move(yrel);
    s.J = std::move(Jnew);
    s.Bvec = std::move(bvec);
    s.iterations = it;
    if (!std::isfinite(change))
      throw ConvergenceError("reduced RT iteration produced non-finite values", s.history);
    if (change < cfg.fixed_point_tolerance)
      break;
    // stagnation: no progress over the last 20 sweeps
    if (it > 40 && change > 0.9 * s.history[it - 21])
      throw ConvergenceError("reduced RT iteration stagnated at " + std::to_string(change),
                             s.history);
  }
  if (s.history.back() >= cfg.fixed_point_tolerance)
    throw ConvergenceError("reduced RT iteration hit the iteration cap at " +
                               std::to_string(s.history.back()),
                           s.history);
  // diagnostics
  const Box inner = detail::interior_box(c);
  GridField lapJ = laplacian(s.J);
  GridField S = coderivative(product(s.J, gamma));
  s.B = S - lapJ;
  GridField B_solved = devectorize(s.Bvec);
  s.residual_j = lp_norm(lapJ - S + B_solved, cfg.p, inner);
  GridField target = detail::bvec_target(s.J, gamma);
  s.residual_curl = lp_norm(exterior_derivative(s.Bvec) - target, cfg.p, inner);
  s.residual_div = lp_norm(coderivative(s.Bvec) - s.w, cfg.p, inner);
  JacobianField jf(s.J, {1e-9, 0.0});
  s.det_min = jf.min_abs_det();
  s.curl_residual = jacobian_curl(s.J);
  if (s.det_min < cfg.determinant_bound)
    throw DeterminantError("RT Jacobian degenerates: min |det J| = " + std::to_string(s.det_min));
  return s;
}

/// Half-radius sub-chart centered at q, clipped to c, same resolution.
inline Chart half_radius_subchart(const Chart &c, const Point &q) {
  std::vector<Interval> b;
  for (int a = 0; a < c.dim(); ++a) {
    const auto &iv = c.bounds()[a];
    double r = 0.25 * iv.length();
    double lo = std::clamp(q[a] - r, iv.lo, iv.hi - 2 * r);
    b.push_back({lo, lo + 2 * r});
  }
  return Chart(b, c.resolution());
}

inline ConnectionField restrict_connection(const ConnectionField &g, const Chart &sub) {
  return ConnectionField(sample_field(
      sub, [&](std::span<const double> x, std::span<double> o) { interpolate_into(g.form(), x, o); },
      g.form().shape()));
}

/// Solves on the full chart and, when that fails, once more on the
/// half-radius sub-chart around `q`.
inline RTState solve_reduced_rt(const ConnectionField &gx, const RTConfig &cfg,
                                const std::optional<Point> &q = {}) {
  try {
    return solve_reduced_rt_on(gx, cfg);
  } catch (const ConvergenceError &) {
    if (!cfg.retry_subchart || !q)
      throw;
  } catch (const DeterminantError &) {
    if (!cfg.retry_subchart || !q)
      throw;
  }
  RTState s = solve_reduced_rt_on(restrict_connection(gx, half_radius_subchart(gx.chart(), *q)), cfg);
  s.subchart = true;
  return s;
}

/// Gamma~ = Gamma_x - J^-1 dJ for a converged state.
inline ConnectionField assemble_gamma_tilde(const ConnectionField &gx, const JacobianField &J) {
  return split_transform(gx, J).tilde;
}

struct FirstRTResidual {
  double residual_lp = 0.0;
  double laplace_tilde_lp = 0.0; // size of the left side
  double delta_gamma_lp = 0.0;   // size of the cancelled term delta Gamma_x
  std::string grid;
};

inline void to_json(nlohmann::json &j, const FirstRTResidual &r) {
  j = {{"residual_lp", r.residual_lp},
       {"laplace_tilde_lp", r.laplace_tilde_lp},
       {"delta_gamma_lp", r.delta_gamma_lp},
       {"grid", r.grid}};
}

/// Laplace Gamma~ - (delta d Gamma_x - delta(dJ^-1 ^ dJ) + d(J^-1 A)),
/// A = B - s <dJ; Gamma~> with s the codifferential sign.
inline GridField first_rt_defect(const ConnectionField &gt, const ConnectionField &gx,
                                 const JacobianField &J, const GridField &B) {
  GridField A = matrix_inner(exterior_derivative(J.j()), gt.form());
  A *= -kCodiffSign;
  A += B;
  GridField rhs = coderivative(exterior_derivative(gx.form()));
  rhs -= coderivative(wedge(exterior_derivative(J.inverse()), exterior_derivative(J.j())));
  rhs += exterior_derivative(product(J.inverse(), A));
  return hodge_laplacian(gt.form()) - rhs;
}

inline FirstRTResidual first_rt_residual(const ConnectionField &gt, const ConnectionField &gx,
                                         const JacobianField &J, const GridField &B, double p,
                                         const Box &window) {
  FirstRTResidual r;
  r.residual_lp = lp_norm(first_rt_defect(gt, gx, J, B), p, window);
  r.laplace_tilde_lp = lp_norm(hodge_laplacian(gt.form()), p, window);
  r.delta_gamma_lp = lp_norm(coderivative(gx.form()), p, window);
  r.grid = gx.chart().describe();
  return r;
}

/// Gamma_y = J Gamma~ J^-1 J^-1, resampled on the y-chart through x(y).
inline ConnectionField optimal_connection(const ConnectionField &gt, const TransformBundle &b) {
  ConnectionField pushed = tensor_push(gt, b.J);
  const Chart &cy = b.target();
  ConnectionField gy(cy);
  std::vector<double> buf(pushed.form().components());
  for (std::size_t node = 0; node < cy.point_count(); ++node) {
    Point x(b.map.inverse().node_values(node).begin(), b.map.inverse().node_values(node).end());
    interpolate_into(pushed.form(), x, buf);
    std::copy(buf.begin(), buf.end(), gy.form().node_values(node).begin());
  }
  return gy;
}

struct RegularityReport {
  NormReport gamma_x;
  NormReport gamma_y;
  double ratio = 0.0; // |Gamma_y|_{W1p} / |Gamma_x|_{W1p}
  double morrey_alpha = 0.0;
};

inline void to_json(nlohmann::json &j, const RegularityReport &r) {
  j = {{"gamma_x", r.gamma_x}, {"gamma_y", r.gamma_y}, {"ratio", r.ratio}, {"alpha", r.morrey_alpha}};
}

inline RegularityReport regularity_report(const ConnectionField &gx, const ConnectionField &gy,
                                          double p, const NormOptions &opt = {}) {
  RegularityReport r;
  r.morrey_alpha = morrey_exponent(gx.dim(), p);
  r.gamma_x = norm_report(gx.form(), p, r.morrey_alpha, opt);
  r.gamma_y = norm_report(gy.form(), p, r.morrey_alpha, opt);
  r.ratio = r.gamma_x.w1p > 0.0 ? r.gamma_y.w1p / r.gamma_x.w1p : 0.0;
  return r;
}

} // namespace rtgeo
