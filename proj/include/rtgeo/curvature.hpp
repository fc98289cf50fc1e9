#pragma once

#include <rtgeo/calculus.hpp>
#include <rtgeo/fields.hpp>
#include <rtgeo/norms.hpp>

#include <Eigen/Sparse>

namespace rtgeo {

enum class CurvatureProvenance { Strong, WeakRepresented, Transformed };

inline const char *to_string(CurvatureProvenance p) {
  switch (p) {
  case CurvatureProvenance::Strong:
    return "strong";
  case CurvatureProvenance::WeakRepresented:
    return "weak-represented";
  case CurvatureProvenance::Transformed:
    return "transformed";
  }
  return "?";
}

/// R^tau_{mu a b}: matrix slot (tau, mu), 2-form slot (a, b), antisymmetric by storage.
struct CurvatureField {
  GridField field;
  CurvatureProvenance provenance = CurvatureProvenance::Strong;

  int dim() const { return field.dim(); }
  const Chart &chart() const { return field.chart(); }
  double component(std::size_t node, int tau, int mu, int a, int b) const {
    if (a == b)
      return 0.0;
    PairSlot ps = pair_slot(dim(), a, b);
    return ps.sign * field.at(node, field.index(tau, mu, ps.slot));
  }
};

/// Riem = d Gamma + Gamma ^ Gamma.
inline CurvatureField riemann(const ConnectionField &g) {
  GridField r = exterior_derivative(g.form());
  r += wedge(g.form(), g.form());
  return {std::move(r), CurvatureProvenance::Strong};
}

/// Tensor-product cubic B-spline: C^2, supported on center +- 2 H per axis.
struct TestFunction {
  Point center;
  std::vector<double> knot; // H per axis

  static double spline(double t) {
    t = std::abs(t);
    if (t >= 2.0)
      return 0.0;
    if (t >= 1.0)
      return std::pow(2.0 - t, 3) / 6.0;
    return (4.0 - 6.0 * t * t + 3.0 * t * t * t) / 6.0;
  }

  double operator()(std::span<const double> x) const {
    double v = 1.0;
    for (std::size_t a = 0; a < center.size(); ++a)
      v *= spline((x[a] - center[a]) / knot[a]);
    return v;
  }

  double support_radius(int a) const { return 2.0 * knot[a]; }
};

/// Checks that psi and its discrete gradient vanish on the two outermost
/// node layers, which makes summation by parts exact.
inline void require_interior_support(const TestFunction &psi, const Chart &c) {
  for (int a = 0; a < c.dim(); ++a) {
    double lo = c.bounds()[a].lo + 2.0 * c.spacing(a), hi = c.bounds()[a].hi - 2.0 * c.spacing(a);
    const double tol = 1e-12 * c.bounds()[a].length();
    if (psi.center[a] - psi.support_radius(a) < lo - tol ||
        psi.center[a] + psi.support_radius(a) > hi + tol)
      throw TestFunctionError("test function support touches the chart boundary on axis " +
                              std::to_string(a));
  }
}

/// Regular lattice of splines with knot spacing `knot_cells` grid cells,
/// covering the interior of the chart.
inline std::vector<TestFunction> make_spline_basis(const Chart &c, int knot_cells = 1) {
  const int n = c.dim();
  std::vector<std::vector<double>> centers(n);
  std::vector<double> H(n);
  for (int a = 0; a < n; ++a) {
    H[a] = knot_cells * c.spacing(a);
    double first = c.bounds()[a].lo + 2.0 * c.spacing(a) + 2.0 * H[a];
    double last = c.bounds()[a].hi - 2.0 * c.spacing(a) - 2.0 * H[a];
    for (double x = first; x <= last + 1e-9 * H[a]; x += H[a])
      centers[a].push_back(x);
    if (centers[a].empty())
      throw TestFunctionError("chart too coarse for the spline basis");
  }
  std::vector<TestFunction> basis;
  std::vector<std::size_t> k(n, 0);
  for (;;) {
    TestFunction psi{Point(n), H};
    for (int a = 0; a < n; ++a)
      psi.center[a] = centers[a][k[a]];
    basis.push_back(std::move(psi));
    int a = n - 1;
    while (a >= 0 && ++k[a] >= centers[a].size()) {
      k[a] = 0;
      --a;
    }
    if (a < 0)
      break;
  }
  return basis;
}

namespace detail {

// Nodes inside psi's support box, with psi values and discrete gradients
// (centered differences of the sampled spline).
struct SupportSample {
  std::vector<std::size_t> nodes;
  std::vector<double> value;
  std::vector<double> grad; // n per node
};

inline SupportSample sample_support(const TestFunction &psi, const Chart &c) {
  const int n = c.dim();
  std::vector<int> lo(n), hi(n);
  for (int a = 0; a < n; ++a) {
    double h = c.spacing(a), x0 = c.bounds()[a].lo;
    lo[a] = std::max(0, static_cast<int>(std::floor((psi.center[a] - psi.support_radius(a) - x0) / h)));
    hi[a] = std::min(c.resolution(a) - 1,
                     static_cast<int>(std::ceil((psi.center[a] + psi.support_radius(a) - x0) / h)));
  }
  SupportSample s;
  std::vector<int> idx(lo);
  Point x(n), xp(n), xm(n);
  for (;;) {
    std::size_t node = c.flat_index(idx);
    for (int a = 0; a < n; ++a)
      x[a] = c.coordinate(a, idx[a]);
    s.nodes.push_back(node);
    s.value.push_back(psi(x));
    for (int a = 0; a < n; ++a) {
      xp = x;
      xm = x;
      xp[a] += c.spacing(a);
      xm[a] -= c.spacing(a);
      s.grad.push_back((psi(xp) - psi(xm)) / (2.0 * c.spacing(a)));
    }
    int a = n - 1;
    while (a >= 0 && ++idx[a] > hi[a]) {
      idx[a] = lo[a];
      --a;
    }
    if (a < 0)
      break;
  }
  return s;
}

inline std::vector<double> weak_functional(const GridField &form, const GridField &wedge_term,
                                           const TestFunction &psi) {
  const Chart &c = form.chart();
  const int n = c.dim();
  SupportSample s = sample_support(psi, c);
  std::vector<double> out(curvature_shape(n).components(n), 0.0);
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    std::size_t node = s.nodes[i];
    double w = c.quadrature_weight(node);
    const double *g = &s.grad[i * n];
    for (int r = 0; r < n; ++r)
      for (int m = 0; m < n; ++m)
        for (int a = 0; a < n; ++a)
          for (int b = a + 1; b < n; ++b) {
            int slot = pair_slot(n, a, b).slot;
            int q = wedge_term.index(r, m, slot);
            double v = -(form.at(node, form.index(r, m, b)) * g[a] -
                         form.at(node, form.index(r, m, a)) * g[b]) +
                       wedge_term.at(node, q) * s.value[i];
            out[q] += w * v;
          }
  }
  return out;
}

} // namespace detail

/// Weak curvature paired with psi: derivatives of Gamma are moved onto psi,
/// only undifferentiated connection components enter.
///
/// Values are returned in curvature-field component order.
inline std::vector<double> weak_riemann(const ConnectionField &g, const TestFunction &psi) {
  require_interior_support(psi, g.chart());
  return detail::weak_functional(g.form(), wedge(g.form(), g.form()), psi);
}

struct WeakRepresentation {
  CurvatureField curvature;
  double residual = 0.0;
  std::size_t basis_size = 0;
};

/// Curvature field in the span of the basis whose moments against every
/// basis function reproduce the weak functionals.
inline WeakRepresentation represent_weak(const ConnectionField &g,
                                         const std::vector<TestFunction> &basis) {
  const Chart &c = g.chart();
  const int n = c.dim();
  if (basis.size() < 16)
    throw FittingError("represent_weak needs at least 16 basis functions");
  const int ncomp = curvature_shape(n).components(n);
  const std::size_t nb = basis.size();
  GridField wedge_term = wedge(g.form(), g.form());
  std::vector<detail::SupportSample> samples;
  samples.reserve(nb);
  for (const auto &psi : basis) {
    require_interior_support(psi, c);
    samples.push_back(detail::sample_support(psi, c));
  }
  Eigen::MatrixXd rhs(nb, ncomp);
  for (std::size_t i = 0; i < nb; ++i) {
    auto w = detail::weak_functional(g.form(), wedge_term, basis[i]);
    for (int q = 0; q < ncomp; ++q)
      rhs(i, q) = w[q];
  }
  // Gram matrix over node-sparse supports.
  std::vector<std::vector<std::pair<std::size_t, double>>> at_node(c.point_count());
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t k = 0; k < samples[i].nodes.size(); ++k)
      if (samples[i].value[k] != 0.0)
        at_node[samples[i].nodes[k]].push_back({i, samples[i].value[k]});
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t node = 0; node < c.point_count(); ++node) {
    double w = c.quadrature_weight(node);
    for (const auto &[i, vi] : at_node[node])
      for (const auto &[j, vj] : at_node[node])
        trip.emplace_back(static_cast<int>(i), static_cast<int>(j), w * vi * vj);
  }
  Eigen::SparseMatrix<double> G(static_cast<int>(nb), static_cast<int>(nb));
  G.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(G);
  if (solver.info() != Eigen::Success || solver.vectorD().minCoeff() <= 1e-14 * solver.vectorD().maxCoeff())
    throw FittingError("represent_weak: basis Gram matrix is rank deficient");
  Eigen::MatrixXd coef = solver.solve(rhs);
  double residual = (G * coef - rhs).cwiseAbs().maxCoeff();
  GridField r(c, curvature_shape(n));
  for (std::size_t node = 0; node < c.point_count(); ++node)
    for (const auto &[i, vi] : at_node[node])
      for (int q = 0; q < ncomp; ++q)
        r.at(node, q) += coef(static_cast<int>(i), q) * vi;
  return {{std::move(r), CurvatureProvenance::WeakRepresented}, residual, nb};
}

/// Tensor law R_x = J^-1 R_y J J J at coincident nodes, J = dy/dx.
///
/// `R` and `J` must share a chart (R_y already resampled at y(x)).
inline CurvatureField transform_curvature(const CurvatureField &R, const JacobianField &J) {
  const int n = R.dim();
  if (!(R.chart() == J.chart()))
    throw ShapeError("transform_curvature: chart mismatch");
  GridField out(R.chart(), curvature_shape(n));
  std::vector<double> full(n * n * n * n), tmp(n * n * n * n);
  auto I4 = [n](int t, int m, int a, int b) { return ((t * n + m) * n + a) * n + b; };
  for (std::size_t node = 0; node < R.chart().point_count(); ++node) {
    auto j = J.j().node_values(node);
    auto ji = J.inverse().node_values(node);
    for (int t = 0; t < n; ++t)
      for (int m = 0; m < n; ++m)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            full[I4(t, m, a, b)] = R.component(node, t, m, a, b);
    // contract one index at a time
    for (int t = 0; t < n; ++t)
      for (int m = 0; m < n; ++m)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            double s = 0.0;
            for (int d = 0; d < n; ++d)
              s += ji[t * n + d] * full[I4(d, m, a, b)];
            tmp[I4(t, m, a, b)] = s;
          }
    for (int slot = 1; slot < 4; ++slot) {
      full.swap(tmp);
      for (int t = 0; t < n; ++t)
        for (int m = 0; m < n; ++m)
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
              int idx[4] = {t, m, a, b};
              int keep = idx[slot];
              double s = 0.0;
              for (int d = 0; d < n; ++d) {
                idx[slot] = d;
                s += full[I4(idx[0], idx[1], idx[2], idx[3])] * j[d * n + keep];
              }
              tmp[I4(t, m, a, b)] = s;
            }
    }
    for (int t = 0; t < n; ++t)
      for (int m = 0; m < n; ++m)
        for (int a = 0; a < n; ++a)
          for (int b = a + 1; b < n; ++b)
            out.at(node, out.index(t, m, pair_slot(n, a, b).slot)) = tmp[I4(t, m, a, b)];
  }
  return {std::move(out), CurvatureProvenance::Transformed};
}

/// The same contraction with the factor on the lower endomorphism index
/// left out, used as a negative control. Form-index factors would not do:
/// in two dimensions they reduce to det J, which is 1 for shear maps.
inline CurvatureField transform_curvature_dropping_factor(const CurvatureField &R,
                                                          const JacobianField &J) {
  const int n = R.dim();
  // R' = J^-1 R J J with m untransformed
  GridField out(R.chart(), curvature_shape(n));
  for (std::size_t node = 0; node < R.chart().point_count(); ++node) {
    auto j = J.j().node_values(node);
    auto ji = J.inverse().node_values(node);
    for (int t = 0; t < n; ++t)
      for (int m = 0; m < n; ++m)
        for (int a = 0; a < n; ++a)
          for (int b = a + 1; b < n; ++b) {
            double s = 0.0;
            for (int d = 0; d < n; ++d)
              for (int f = 0; f < n; ++f)
                for (int g = 0; g < n; ++g)
                  s += ji[t * n + d] * R.component(node, d, m, f, g) * j[f * n + a] * j[g * n + b];
            out.at(node, out.index(t, m, pair_slot(n, a, b).slot)) = s;
          }
  }
  return {std::move(out), CurvatureProvenance::Transformed};
}

struct LemmaB1Report {
  double distance = 0.0;
  double tolerance = 0.0;
  double reference_norm = 0.0;
  bool pass = false;
  std::string grid;
  double epsilon_basis = 0.0;
  std::size_t window_nodes = 0;
};

inline void to_json(nlohmann::json &j, const LemmaB1Report &r) {
  j = {{"distance", r.distance},     {"tolerance", r.tolerance}, {"pass", r.pass},
       {"grid", r.grid},             {"epsilon_basis", r.epsilon_basis},
       {"reference_norm", r.reference_norm}, {"window_nodes", r.window_nodes}};
}

struct LemmaB1Options {
  double p = 4.0;
  int knot_cells = 1;
  double window_fraction = 0.25; // spline-span edge effects decay away from the boundary
  bool drop_factor = false;      // negative control
};

/// Compares the weak curvature of Gamma_x, pushed to y by the tensor law,
/// with the weak curvature computed independently from Gamma_y.
///
/// The comparison runs at the x-nodes of an inner window, away from the edge
/// of the spline spans; the tolerance scales like h + H^2 times the size of
/// the curvature.
inline LemmaB1Report lemma_b1_check(const ConnectionField &gx, const ConnectionField &gy,
                                    const JacobianField &J, const CoordinateMap &map,
                                    const LemmaB1Options &opt = {}) {
  const Chart &cx = gx.chart();
  const Chart &cy = gy.chart();
  const int n = cx.dim();
  auto rep_x = represent_weak(gx, make_spline_basis(cx, opt.knot_cells));
  auto rep_y = represent_weak(gy, make_spline_basis(cy, opt.knot_cells));
  JacobianField Jinv(J.inverse());
  CurvatureField pushed = opt.drop_factor
                              ? transform_curvature_dropping_factor(rep_x.curvature, Jinv)
                              : transform_curvature(rep_x.curvature, Jinv);
  const double Hx = opt.knot_cells * cx.max_spacing(), Hy = opt.knot_cells * cy.max_spacing();
  Box wx = inset(cx, opt.window_fraction, 8.0 * opt.knot_cells);
  Box wy = inset(cy, opt.window_fraction, 8.0 * opt.knot_cells);
  GridField diff(cx, curvature_shape(n)), ref(cx, curvature_shape(n));
  std::vector<char> inside(cx.point_count(), 0);
  std::vector<double> ry(curvature_shape(n).components(n));
  LemmaB1Report rep;
  for (std::size_t node = 0; node < cx.point_count(); ++node) {
    Point x = cx.node_point(node);
    auto y = map.forward().node_values(node);
    if (!wx.contains(x) || !wy.contains(y))
      continue;
    inside[node] = 1;
    ++rep.window_nodes;
    interpolate_into(rep_y.curvature.field, y, ry);
    for (std::size_t q = 0; q < ry.size(); ++q) {
      diff.at(node, q) = pushed.field.at(node, q) - ry[q];
      ref.at(node, q) = ry[q];
    }
  }
  if (rep.window_nodes == 0)
    throw DomainError("lemma_b1_check: empty comparison window");
  auto reduce = [&](const GridField &f) {
    double s = 0.0;
    for (std::size_t k = 0; k < cx.point_count(); ++k)
      if (inside[k])
        s += cx.quadrature_weight(k) * std::pow(detail::magnitude(f.node_values(k)), opt.p);
    return std::pow(s, 1.0 / opt.p);
  };
  rep.distance = reduce(diff);
  rep.reference_norm = reduce(ref);
  rep.epsilon_basis = std::max(Hx, Hy);
  const double h = std::max(cx.max_spacing(), cy.max_spacing());
  rep.tolerance = 10.0 * (h + rep.epsilon_basis * rep.epsilon_basis) * std::max(1.0, rep.reference_norm);
  rep.pass = rep.distance <= rep.tolerance;
  rep.grid = cx.describe();
  return rep;
}

} // namespace rtgeo
