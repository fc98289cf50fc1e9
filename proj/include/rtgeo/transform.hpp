#pragma once

#include <rtgeo/calculus.hpp>
#include <rtgeo/curve.hpp>
#include <rtgeo/fields.hpp>
#include <rtgeo/norms.hpp>

#include <memory>

namespace rtgeo {

/// C^0 norm of the curl of the rows of J; zero iff J is a discrete gradient.
inline double jacobian_curl(const GridField &J) {
  return lp_norm(exterior_derivative(vectorize(J)), std::numeric_limits<double>::infinity());
}

/// J = dy/dx of sampled map values by finite differences.
inline GridField jacobian_samples(const GridField &forward) {
  return devectorize(exterior_derivative(forward));
}

/// A coordinate map together with its Jacobian on the source chart.
struct TransformBundle {
  CoordinateMap map;
  JacobianField J;
  double curl_residual = 0.0;
  double coverage = 1.0; // fraction of target nodes inside the image

  const Chart &source() const { return map.source_chart(); }
  const Chart &target() const { return map.target_chart(); }
};

struct InversionResult {
  GridField inverse;
  double coverage = 1.0;
  double max_residual = 0.0;
  std::size_t worst_node = 0;
};

/// Samples x(y) on the target chart by Newton on the forward interpolant.
///
/// Target nodes outside the image are clipped: they keep the clamped best
/// iterate and count against the coverage fraction.
inline InversionResult invert_map(const GridField &forward, const Chart &target,
                                  double tol = 1e-13) {
  const int n = target.dim();
  InversionResult res{GridField(target, vector_shape(n))};
  std::size_t failed = 0;
  for (std::size_t node = 0; node < target.point_count(); ++node) {
    Point y = target.node_point(node);
    Point x;
    try {
      x = solve_forward(forward, y, y, tol);
    } catch (const InversionError &) {
      // retry from the nearest forward sample
      double best = std::numeric_limits<double>::infinity();
      std::size_t at = 0;
      for (std::size_t k = 0; k < forward.point_count(); ++k) {
        double d = 0.0;
        for (int a = 0; a < n; ++a)
          d += std::pow(forward.at(k, a) - y[a], 2);
        if (d < best) {
          best = d;
          at = k;
        }
      }
      try {
        x = solve_forward(forward, y, forward.chart().node_point(at), tol);
      } catch (const InversionError &) {
        ++failed;
        x = forward.chart().node_point(at);
      }
    }
    Point fx = interpolate(forward, x);
    double r = 0.0;
    for (int a = 0; a < n; ++a)
      r = std::max(r, std::abs(fx[a] - y[a]));
    if (r > res.max_residual) {
      res.max_residual = r;
      res.worst_node = node;
    }
    for (int a = 0; a < n; ++a)
      res.inverse.at(node, a) = x[a];
  }
  res.coverage = 1.0 - static_cast<double>(failed) / target.point_count();
  return res;
}

/// Bundle from forward samples: Jacobian by finite differences, inverse by Newton.
inline TransformBundle make_bundle(const GridField &forward, const Chart &target, Point basepoint,
                                   JacobianTolerances tol = {}) {
  InversionResult inv = invert_map(forward, target);
  TransformBundle b{CoordinateMap(forward, inv.inverse, std::move(basepoint)),
                    JacobianField(jacobian_samples(forward), tol)};
  b.curl_residual = jacobian_curl(b.J.j());
  b.coverage = inv.coverage;
  return b;
}

/// The same map read backwards: source is the y-chart, J = dx/dy by differences of x(y).
inline TransformBundle inverse_bundle(const TransformBundle &b, JacobianTolerances tol = {}) {
  TransformBundle r{CoordinateMap(b.map.inverse(), b.map.forward(), b.map.basepoint_image()),
                    JacobianField(jacobian_samples(b.map.inverse()), tol)};
  r.curl_residual = jacobian_curl(r.J.j());
  r.coverage = b.coverage;
  return r;
}

struct IntegrationResult {
  CoordinateMap map;
  double path_discrepancy = 0.0; // C^0 gap between the two staircase orders
  double curl_residual = 0.0;
};

/// Integrates J along axis-ordered staircase paths (trapezoid rule) so that
/// y(Q) = yq; the reversed axis order gives the path-independence check.
inline IntegrationResult integrate_jacobian(const JacobianField &J, const Point &Q, const Point &yq,
                                            const Chart &target, double tau_curl = 1e-6) {
  const Chart &c = J.chart();
  const int n = c.dim();
  IntegrationResult out;
  out.curl_residual = jacobian_curl(J.j());
  if (out.curl_residual > tau_curl)
    throw NonIntegrableError("jacobian rows have curl " + std::to_string(out.curl_residual) +
                             " above " + std::to_string(tau_curl));
  auto staircase = [&](const std::vector<int> &order) {
    GridField y(c, vector_shape(n));
    std::vector<int> idx(n);
    for (std::size_t node = 0; node < c.point_count(); ++node) {
      c.multi_index(node, idx);
      // path: start at origin node, move along order[0], then order[1], ...
      std::vector<int> cur(n, 0);
      std::vector<double> accv(n, 0.0);
      for (int axis : order) {
        for (int i = 0; i < idx[axis]; ++i) {
          std::size_t k0 = c.flat_index(cur);
          cur[axis] = i + 1;
          std::size_t k1 = c.flat_index(cur);
          for (int a = 0; a < n; ++a)
            accv[a] += 0.5 * c.spacing(axis) *
                       (J.j().at(k0, a * n + axis) + J.j().at(k1, a * n + axis));
        }
      }
      for (int a = 0; a < n; ++a)
        y.at(node, a) = accv[a];
    }
    return y;
  };
  std::vector<int> fwd(n), rev(n);
  std::iota(fwd.begin(), fwd.end(), 0);
  std::iota(rev.rbegin(), rev.rend(), 0);
  GridField y1 = staircase(fwd), y2 = staircase(rev);
  out.path_discrepancy = lp_norm(y1 - y2, std::numeric_limits<double>::infinity());
  Point shift = interpolate(y1, Q);
  for (std::size_t node = 0; node < c.point_count(); ++node)
    for (int a = 0; a < n; ++a)
      y1.at(node, a) += yq[a] - shift[a];
  InversionResult inv = invert_map(y1, target);
  out.map = CoordinateMap(y1, inv.inverse, Q);
  return out;
}

/// Connection law at coincident x-nodes: Gamma_x = J^-1 (J J G + dJ), where
/// `gy_at_x` holds Gamma_y already evaluated at y(x) on the x-chart.
inline ConnectionField apply_connection_law(const GridField &gy_at_x, const JacobianField &J) {
  const Chart &cx = J.chart();
  const int n = cx.dim();
  if (!(gy_at_x.chart() == cx) || !(gy_at_x.shape() == connection_shape(n)))
    throw ShapeError("apply_connection_law: Gamma_y samples must live on the x-chart");
  GridField inhom = product(J.inverse(), exterior_derivative(J.j()));
  ConnectionField gx(cx);
  for (std::size_t node = 0; node < cx.point_count(); ++node) {
    auto g = gy_at_x.node_values(node);
    auto j = J.j().node_values(node);
    auto ji = J.inverse().node_values(node);
    for (int mu = 0; mu < n; ++mu)
      for (int rho = 0; rho < n; ++rho)
        for (int nu = 0; nu < n; ++nu) {
          double s = 0.0;
          for (int al = 0; al < n; ++al) {
            double inner = 0.0;
            for (int be = 0; be < n; ++be)
              for (int ga = 0; ga < n; ++ga)
                inner += j[be * n + rho] * j[ga * n + nu] * gamma_component(g, n, al, be, ga);
            s += ji[mu * n + al] * inner;
          }
          gx.gamma(node, mu, rho, nu) = s + inhom.at(node, inhom.index(mu, nu, rho));
        }
  }
  return gx;
}

/// Connection law: Gamma_x = J^-1 (J J Gamma_y(y(x)) + dJ).
///
/// Gamma_y is interpolated at the image of every x-node; DomainError lists
/// how many nodes fall outside the y-chart.
inline ConnectionField transform_connection(const ConnectionField &gy, const TransformBundle &b) {
  const Chart &cx = b.source();
  GridField at_x(cx, gy.form().shape());
  std::size_t clipped = 0;
  for (std::size_t node = 0; node < cx.point_count(); ++node) {
    auto y = b.map.forward().node_values(node);
    if (!gy.chart().contains(y, 1e-9)) {
      ++clipped;
      continue;
    }
    Point yc(y.begin(), y.end());
    for (int a = 0; a < cx.dim(); ++a)
      yc[a] = std::clamp(yc[a], gy.chart().bounds()[a].lo, gy.chart().bounds()[a].hi);
    interpolate_into(gy.form(), yc, at_x.node_values(node));
  }
  if (clipped)
    throw DomainError("transform_connection: " + std::to_string(clipped) +
                      " x-nodes map outside the y-chart");
  return apply_connection_law(at_x, b.J);
}

struct SplitTransform {
  ConnectionField tilde;
  GridField inhom; // J^-1 dJ as a matrix 1-form
};

/// Gamma_x = Gamma~ + J^-1 dJ.
inline SplitTransform split_transform(const ConnectionField &gx, const JacobianField &J) {
  if (!(gx.chart() == J.chart()))
    throw ShapeError("split_transform: chart mismatch");
  GridField inhom = product(J.inverse(), exterior_derivative(J.j()));
  return {ConnectionField(gx.form() - inhom), std::move(inhom)};
}

/// Pointwise y-components of a connection given in x-indices, without the
/// inhomogeneous term: J Gamma~ J^-1 J^-1, still on the x-chart.
inline ConnectionField tensor_push(const ConnectionField &tilde, const JacobianField &J) {
  const int n = tilde.dim();
  ConnectionField out(tilde.chart());
  for (std::size_t node = 0; node < tilde.chart().point_count(); ++node) {
    auto j = J.j().node_values(node);
    auto ji = J.inverse().node_values(node);
    auto g = tilde.form().node_values(node);
    for (int c = 0; c < n; ++c)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          double s = 0.0;
          for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
              for (int l = 0; l < n; ++l)
                s += j[c * n + k] * ji[i * n + a] * ji[l * n + b] * gamma_component(g, n, k, i, l);
          out.gamma(node, c, a, b) = s;
        }
  }
  return out;
}

/// Residual report of a discrete identity on one grid.
struct IdentityResidual {
  double residual_lp = 0.0;
  double lhs_lp = 0.0;
  std::string grid;
};

/// delta Gamma_x - (delta Gamma~ + s <dJ^-1; dJ> + J^-1 Laplace J), s the codifferential sign.
inline GridField coderivative_identity_defect(const ConnectionField &gx, const ConnectionField &gt,
                                              const JacobianField &J) {
  GridField lhs = coderivative(gx.form());
  GridField rhs = coderivative(gt.form());
  GridField inner = matrix_inner(exterior_derivative(J.inverse()), exterior_derivative(J.j()));
  inner *= kCodiffSign;
  rhs += inner;
  rhs += product(J.inverse(), laplacian(J.j()));
  return lhs - rhs;
}

/// d Gamma_x - (d Gamma~ + dJ^-1 ^ dJ); `drop_wedge` removes the second term.
inline GridField dgamma_identity_defect(const ConnectionField &gx, const ConnectionField &gt,
                                        const JacobianField &J, bool drop_wedge = false) {
  GridField rhs = exterior_derivative(gt.form());
  if (!drop_wedge)
    rhs += wedge(exterior_derivative(J.inverse()), exterior_derivative(J.j()));
  return exterior_derivative(gx.form()) - rhs;
}

inline IdentityResidual summarize_defect(const GridField &defect, const GridField &lhs, double p,
                                         const Box &window) {
  return {lp_norm(defect, p, window), lp_norm(lhs, p, window), defect.chart().describe()};
}

/// Maps a curve through a coordinate change: positions by `position`,
/// velocities by the Jacobian returned by `jacobian` at the source point.
///
/// Stops (and flags truncation) at the first sample whose image is undefined.
template <class PositionFn, class JacobianFn>
Curve map_curve(const Curve &c, PositionFn position, JacobianFn jacobian) {
  Curve out;
  out.method = c.method;
  out.dt = c.dt;
  out.picard_iterations = c.picard_iterations;
  out.truncated = c.truncated;
  out.truncation = c.truncation;
  for (std::size_t i = 0; i < c.size(); ++i) {
    Point y;
    Eigen::MatrixXd M;
    try {
      y = position(c.x[i]);
      M = jacobian(c.x[i], y);
    } catch (const Error &e) {
      out.truncated = true;
      out.truncation = std::string("pushforward: ") + e.what();
      break;
    }
    const int n = static_cast<int>(y.size());
    Point w(n, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        w[a] += M(a, b) * c.v[i][b];
    out.push(c.t[i], std::move(y), std::move(w));
  }
  return out;
}

/// gamma_y = y(gamma_x), velocity J gamma_x'.
inline Curve pushforward_curve(const Curve &c, const TransformBundle &b) {
  const int n = b.source().dim();
  return map_curve(
      c, [&](const Point &x) { return b.map.forward_at(x); },
      [&](const Point &x, const Point &) {
        return as_matrix(interpolate(b.J.j(), x), n, n);
      });
}

/// gamma_x = x(gamma_y), velocity J^-1 gamma_y', with J^-1 taken at x(gamma_y).
inline Curve pullback_curve(const Curve &c, const TransformBundle &b) {
  const int n = b.source().dim();
  return map_curve(
      c, [&](const Point &y) { return b.map.inverse_at(y); },
      [&](const Point &, const Point &x) {
        return as_matrix(interpolate(b.J.inverse(), x), n, n);
      });
}

/// K in y-components: K_y(t, y, w) = J K_x(t, x(y), J^-1 w).
///
/// Hoelder continuity of K survives Hoelder Jacobians; Lipschitz continuity
/// needs Lipschitz Jacobians, so the declared class is downgraded to Hoelder
/// with the smaller exponent unless `lipschitz_jacobian` holds.
inline ForceField transform_force(const ForceField &K, const TransformBundle &b,
                                  bool lipschitz_jacobian, double jacobian_exponent = 1.0) {
  const int n = b.source().dim();
  ForceField out;
  auto bp = std::make_shared<const TransformBundle>(b);
  out.eval = [K, bp, n](double t, std::span<const double> y, std::span<const double> w) {
    Point x = bp->map.inverse_at(y);
    Eigen::MatrixXd J = as_matrix(interpolate(bp->J.j(), x), n, n);
    Eigen::MatrixXd Ji = as_matrix(interpolate(bp->J.inverse(), x), n, n);
    Eigen::Map<const Eigen::VectorXd> wv(w.data(), n);
    Eigen::VectorXd vx = Ji * wv;
    Point kx = K(t, x, std::span<const double>(vx.data(), n));
    Eigen::VectorXd ky = J * Eigen::Map<Eigen::VectorXd>(kx.data(), n);
    return Point(ky.data(), ky.data() + n);
  };
  out.constant = K.constant;
  if (lipschitz_jacobian) {
    out.continuity = K.continuity;
    out.holder_exponent = K.holder_exponent;
  } else {
    out.continuity = ContinuityClass::Holder;
    out.holder_exponent = std::min(K.holder_exponent, jacobian_exponent);
  }
  return out;
}

} // namespace rtgeo
