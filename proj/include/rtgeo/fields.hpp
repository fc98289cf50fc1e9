#pragma once

#include <rtgeo/chart.hpp>

#include <Eigen/Dense>

#include <optional>

namespace rtgeo {

/// Connection coefficients viewed as an n x n matrix-valued 1-form.
///
/// The classical component Gamma^mu_{rho nu} (rho the differentiating
/// index of the transformation law) lives in matrix slot (mu, nu) and form
/// slot rho. No symmetry in the lower indices is assumed.
class ConnectionField {
public:
  ConnectionField() = default;
  explicit ConnectionField(GridField f) : f_(std::move(f)) {
    if (!(f_.shape() == connection_shape(f_.dim())))
      throw ShapeError("connection field needs shape " + connection_shape(f_.dim()).tag() +
                       ", got " + f_.shape().tag());
  }
  explicit ConnectionField(const Chart &c) : f_(c, connection_shape(c.dim())) {}

  const GridField &form() const { return f_; }
  GridField &form() { return f_; }
  const Chart &chart() const { return f_.chart(); }
  int dim() const { return f_.dim(); }

  /// Gamma^mu_{rho nu} at a node.
  double gamma(std::size_t node, int mu, int rho, int nu) const {
    return f_.at(node, slot(mu, rho, nu));
  }
  double &gamma(std::size_t node, int mu, int rho, int nu) {
    return f_.at(node, slot(mu, rho, nu));
  }
  int slot(int mu, int rho, int nu) const { return (mu * dim() + nu) * dim() + rho; }

private:
  GridField f_;
};

/// Gamma^mu_{rho nu} from a packed component vector in connection layout.
inline double gamma_component(std::span<const double> v, int n, int mu, int rho, int nu) {
  return v[(mu * n + nu) * n + rho];
}

/// Sample a connection from a closed form Gamma(x, mu, rho, nu).
inline ConnectionField
sample_connection(const Chart &c,
                  const std::function<double(std::span<const double>, int, int, int)> &g) {
  const int n = c.dim();
  return ConnectionField(sample_field(
      c,
      [&](std::span<const double> x, std::span<double> out) {
        for (int mu = 0; mu < n; ++mu)
          for (int rho = 0; rho < n; ++rho)
            for (int nu = 0; nu < n; ++nu)
              out[(mu * n + nu) * n + rho] = g(x, mu, rho, nu);
      },
      connection_shape(n)));
}

inline Eigen::MatrixXd node_matrix(const GridField &f, std::size_t node) {
  Eigen::MatrixXd m(f.shape().rows, f.shape().cols);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      m(r, c) = f.at(node, f.index(r, c));
  return m;
}

inline void set_node_matrix(GridField &f, std::size_t node, const Eigen::MatrixXd &m) {
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      f.at(node, f.index(r, c)) = m(r, c);
}

inline Eigen::MatrixXd as_matrix(std::span<const double> v, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = v[r * cols + c];
  return m;
}

struct JacobianTolerances {
  double inverse = 1e-9;     // |J J^-1 - I| per node
  double determinant = 1e-6; // |det J| lower bound
};

/// J = dy/dx sampled as a matrix 0-form with its inverse and determinant.
class JacobianField {
public:
  JacobianField() = default;

  /// Builds J^-1 and det J from J; throws DeterminantError on near-singular nodes.
  explicit JacobianField(GridField j, JacobianTolerances tol = {})
      : j_(std::move(j)), tol_(tol) {
    const int n = j_.dim();
    if (!(j_.shape() == matrix_shape(n)))
      throw ShapeError("jacobian needs shape " + matrix_shape(n).tag());
    jinv_ = GridField(j_.chart(), matrix_shape(n));
    det_ = GridField(j_.chart(), scalar_shape());
    for (std::size_t k = 0; k < j_.point_count(); ++k) {
      Eigen::MatrixXd m = node_matrix(j_, k);
      double d = m.determinant();
      if (!(std::abs(d) >= tol_.determinant))
        throw DeterminantError("|det J| = " + std::to_string(std::abs(d)) +
                               " below bound at node " + std::to_string(k));
      Eigen::MatrixXd mi = m.inverse();
      set_node_matrix(jinv_, k, mi);
      det_.at(k, 0) = d;
    }
  }

  const GridField &j() const { return j_; }
  const GridField &inverse() const { return jinv_; }
  const GridField &det() const { return det_; }
  const Chart &chart() const { return j_.chart(); }
  int dim() const { return j_.dim(); }

  double min_abs_det() const {
    double m = std::numeric_limits<double>::infinity();
    for (double d : det_.values())
      m = std::min(m, std::abs(d));
    return m;
  }

  /// max over nodes of |J J^-1 - I|_max.
  double inverse_defect() const {
    double worst = 0.0;
    const int n = dim();
    for (std::size_t k = 0; k < j_.point_count(); ++k) {
      Eigen::MatrixXd e = node_matrix(j_, k) * node_matrix(jinv_, k) - Eigen::MatrixXd::Identity(n, n);
      worst = std::max(worst, e.cwiseAbs().maxCoeff());
    }
    return worst;
  }

  bool valid() const {
    return inverse_defect() <= tol_.inverse && min_abs_det() >= tol_.determinant;
  }

private:
  GridField j_, jinv_, det_;
  JacobianTolerances tol_;
};

inline JacobianField identity_jacobian(const Chart &c) {
  const int n = c.dim();
  return JacobianField(sample_field(
      c,
      [n](std::span<const double>, std::span<double> out) {
        for (int r = 0; r < n; ++r)
          for (int s = 0; s < n; ++s)
            out[r * n + s] = r == s ? 1.0 : 0.0;
      },
      matrix_shape(n)));
}

/// Solves interpolate(forward, x) = y for x by damped Newton with a
/// finite-difference Jacobian of the multilinear interpolant.
///
/// Iterates stay inside the source chart; InversionError is raised when the
/// residual cannot be brought below 1e-9 (for example when y is not in the
/// image of the chart).
inline Point solve_forward(const GridField &forward, std::span<const double> y, Point x,
                           double tol = 1e-13) {
  const Chart &c = forward.chart();
  const int n = c.dim();
  auto clamp_into = [&](Point &p) {
    for (int a = 0; a < n; ++a)
      p[a] = std::clamp(p[a], c.bounds()[a].lo, c.bounds()[a].hi);
  };
  auto residual = [&](const Point &p, Eigen::VectorXd &r) {
    Point f = interpolate(forward, p);
    for (int a = 0; a < n; ++a)
      r[a] = f[a] - y[a];
    return r.lpNorm<Eigen::Infinity>();
  };
  double scale = 1.0;
  for (int a = 0; a < n; ++a)
    scale = std::max(scale, std::abs(y[a]));
  clamp_into(x);
  const double step = 1e-3 * c.max_spacing();
  Eigen::VectorXd r(n), rn(n);
  double err = residual(x, r);
  for (int it = 0; it < 60 && err > tol * scale; ++it) {
    Eigen::MatrixXd jac(n, n);
    for (int b = 0; b < n; ++b) {
      Point xp = x, xm = x;
      xp[b] += step;
      xm[b] -= step;
      clamp_into(xp);
      clamp_into(xm);
      Point fp = interpolate(forward, xp), fm = interpolate(forward, xm);
      for (int a = 0; a < n; ++a)
        jac(a, b) = (fp[a] - fm[a]) / (xp[b] - xm[b]);
    }
    Eigen::VectorXd dx = jac.partialPivLu().solve(r);
    double lambda = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      Point xn = x;
      for (int a = 0; a < n; ++a)
        xn[a] -= lambda * dx[a];
      clamp_into(xn);
      double en = residual(xn, rn);
      if (en < err) {
        x = xn;
        err = en;
        r = rn;
        moved = true;
        break;
      }
    }
    if (!moved)
      break;
  }
  if (err <= 1e-9 * scale)
    return x;
  throw InversionError("Newton inversion stalled with residual " + std::to_string(err));
}

/// Coordinate transformation x -> y sampled both ways.
///
/// forward holds y(x) on the x-chart; inverse holds x(y) on the y-chart.
/// forward_at is multilinear; inverse_at polishes the interpolated inverse
/// sample by damped Newton on forward_at, so the two are consistent to
/// the Newton tolerance.
class CoordinateMap {
public:
  CoordinateMap() = default;
  CoordinateMap(GridField forward, GridField inverse, Point basepoint)
      : fwd_(std::move(forward)), inv_(std::move(inverse)), q_(std::move(basepoint)) {
    if (!(fwd_.shape() == vector_shape(fwd_.dim())) || !(inv_.shape() == vector_shape(inv_.dim())))
      throw ShapeError("coordinate map samples must be vector fields");
    q_image_ = forward_at(q_);
  }

  const GridField &forward() const { return fwd_; }
  const GridField &inverse() const { return inv_; }
  const Chart &source_chart() const { return fwd_.chart(); }
  const Chart &target_chart() const { return inv_.chart(); }
  const Point &basepoint() const { return q_; }
  const Point &basepoint_image() const { return q_image_; }

  Point forward_at(std::span<const double> x) const { return interpolate(fwd_, x); }

  /// x(y); throws InversionError when Newton stalls.
  Point inverse_at(std::span<const double> y, double tol = 1e-13) const {
    Point guess = inv_.chart().contains(y) ? interpolate(inv_, y) : Point(y.begin(), y.end());
    return solve_forward(fwd_, y, guess, tol);
  }

private:
  GridField fwd_, inv_;
  Point q_, q_image_;
};

enum class ContinuityClass { Holder, Lipschitz };

/// Right-hand side K(t, x, v) of the forced geodesic equation.
struct ForceField {
  std::function<Point(double, std::span<const double>, std::span<const double>)> eval;
  ContinuityClass continuity = ContinuityClass::Lipschitz;
  double holder_exponent = 1.0;
  double constant = 0.0; // Holder/Lipschitz constant estimate

  Point operator()(double t, std::span<const double> x, std::span<const double> v) const {
    Point k = eval(t, x, v);
    for (double c : k)
      if (!std::isfinite(c))
        throw SamplingError("force evaluator returned a non-finite component");
    return k;
  }
};

inline ForceField zero_force(int n) {
  return {[n](double, std::span<const double>, std::span<const double>) { return Point(n, 0.0); },
          ContinuityClass::Lipschitz, 1.0, 0.0};
}

} // namespace rtgeo
