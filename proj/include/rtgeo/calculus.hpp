#pragma once

#include <rtgeo/chart.hpp>

namespace rtgeo {

/// Sign of the Euclidean codifferential: delta(omega) = kCodiffSign * sum_j D_j omega_j.
/// With -1 the Laplacian delta d + d delta is the positive operator -sum D_j^2.
inline constexpr double kCodiffSign = -1.0;

namespace detail {

// Centered first difference along axis a for every component; boundary
// nodes use one-sided second-order formulas.
inline GridField partial(const GridField &f, int a) {
  const Chart &c = f.chart();
  const int m = c.resolution(a);
  const double h = c.spacing(a);
  const std::size_t s = c.stride(a);
  const int nc = f.components();
  GridField out(c, f.shape());
  const auto &v = f.values();
  auto &o = out.values();
  for (std::size_t node = 0; node < c.point_count(); ++node) {
    int i = c.axis_index(node, a);
    for (int q = 0; q < nc; ++q) {
      auto at = [&](int di) { return v[(node + di * s) * nc + q]; };
      double d;
      if (i == 0)
        d = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
      else if (i == m - 1)
        d = (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h);
      else
        d = (at(1) - at(-1)) / (2.0 * h);
      o[node * nc + q] = d;
    }
  }
  return out;
}

// Second difference along axis a, one-sided at the ends.
inline GridField second_partial(const GridField &f, int a) {
  const Chart &c = f.chart();
  const int m = c.resolution(a);
  const double h2 = c.spacing(a) * c.spacing(a);
  const std::size_t s = c.stride(a);
  const int nc = f.components();
  GridField out(c, f.shape());
  const auto &v = f.values();
  auto &o = out.values();
  for (std::size_t node = 0; node < c.point_count(); ++node) {
    int i = c.axis_index(node, a);
    int dir = i == 0 ? 1 : (i == m - 1 ? -1 : 0);
    for (int q = 0; q < nc; ++q) {
      auto at = [&](int di) { return v[(node + di * s) * nc + q]; };
      double d;
      if (dir == 0)
        d = (at(-1) - 2.0 * at(0) + at(1)) / h2;
      else
        d = (2.0 * at(0) - 5.0 * at(dir) + 4.0 * at(2 * dir) - at(3 * dir)) / h2;
      o[node * nc + q] = d;
    }
  }
  return out;
}

inline void require_degree(const GridField &f, std::initializer_list<int> allowed, const char *op) {
  for (int k : allowed)
    if (f.shape().degree == k)
      return;
  throw DegreeError(std::string(op) + ": unsupported form degree " +
                    std::to_string(f.shape().degree));
}

} // namespace detail

/// First partial derivative along axis a of every component.
inline GridField partial(const GridField &f, int a) { return detail::partial(f, a); }

/// Exterior derivative of a matrix-valued 0- or 1-form.
inline GridField exterior_derivative(const GridField &w) {
  detail::require_degree(w, {0, 1}, "exterior_derivative");
  const Chart &c = w.chart();
  const int n = c.dim();
  const Shape sh = w.shape();
  std::vector<GridField> D;
  for (int a = 0; a < n; ++a)
    D.push_back(detail::partial(w, a));
  GridField out(c, {sh.degree + 1, sh.rows, sh.cols});
  for (std::size_t node = 0; node < c.point_count(); ++node)
    for (int r = 0; r < sh.rows; ++r)
      for (int s = 0; s < sh.cols; ++s) {
        if (sh.degree == 0) {
          for (int a = 0; a < n; ++a)
            out.at(node, out.index(r, s, a)) = D[a].at(node, w.index(r, s));
        } else {
          for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
              out.at(node, out.index(r, s, pair_slot(n, a, b).slot)) =
                  D[a].at(node, w.index(r, s, b)) - D[b].at(node, w.index(r, s, a));
        }
      }
  return out;
}

/// Euclidean codifferential of a matrix-valued 1- or 2-form.
inline GridField coderivative(const GridField &w) {
  detail::require_degree(w, {1, 2}, "coderivative");
  const Chart &c = w.chart();
  const int n = c.dim();
  const Shape sh = w.shape();
  GridField out(c, {sh.degree - 1, sh.rows, sh.cols});
  for (int a = 0; a < n; ++a) {
    GridField Da = detail::partial(w, a);
    for (std::size_t node = 0; node < c.point_count(); ++node)
      for (int r = 0; r < sh.rows; ++r)
        for (int s = 0; s < sh.cols; ++s) {
          if (sh.degree == 1) {
            out.at(node, out.index(r, s)) += kCodiffSign * Da.at(node, w.index(r, s, a));
          } else {
            for (int b = 0; b < n; ++b) {
              if (b == a)
                continue;
              PairSlot ps = pair_slot(n, a, b);
              out.at(node, out.index(r, s, b)) +=
                  kCodiffSign * ps.sign * Da.at(node, w.index(r, s, ps.slot));
            }
          }
        }
  }
  return out;
}

/// Positive Laplacian -sum_j D_j D_j, componentwise on 0- and 1-forms.
///
/// Built from the same first differences as d and delta, so it equals
/// delta d + d delta as an operator; poisson_solve inverts exactly this.
inline GridField laplacian(const GridField &f) {
  detail::require_degree(f, {0, 1}, "laplacian");
  GridField out(f.chart(), f.shape());
  for (int a = 0; a < f.dim(); ++a)
    out -= detail::partial(detail::partial(f, a), a);
  return out;
}

/// Standard compact (2n+1)-point Laplacian, one-sided at the boundary.
inline GridField compact_laplacian(const GridField &f) {
  detail::require_degree(f, {0, 1}, "compact_laplacian");
  GridField out(f.chart(), f.shape());
  for (int a = 0; a < f.dim(); ++a)
    out -= detail::second_partial(f, a);
  return out;
}

/// The two pieces delta d and d delta of the Hodge Laplacian.
struct HodgeParts {
  GridField delta_d;
  GridField d_delta;
  GridField sum() const { return delta_d + d_delta; }
};

inline HodgeParts hodge_parts(const GridField &f) {
  detail::require_degree(f, {0, 1}, "hodge_parts");
  HodgeParts hp{coderivative(exterior_derivative(f)), GridField(f.chart(), f.shape())};
  if (f.shape().degree == 1)
    hp.d_delta = exterior_derivative(coderivative(f));
  return hp;
}

/// delta d + d delta composed from the first-order operators above.
inline GridField hodge_laplacian(const GridField &f) { return hodge_parts(f).sum(); }

/// Pointwise matrix product of a 0-form with a k-form (either order).
inline GridField product(const GridField &a, const GridField &b) {
  if (!(a.chart() == b.chart()))
    throw ShapeError("product: chart mismatch");
  if (a.shape().degree != 0 && b.shape().degree != 0)
    throw DegreeError("product: one factor must be a 0-form");
  if (a.shape().cols != b.shape().rows)
    throw ShapeError("product: inner matrix dimensions differ");
  const int k = a.shape().degree + b.shape().degree;
  Shape sh{k, a.shape().rows, b.shape().cols};
  GridField out(a.chart(), sh);
  const int fc = out.form_count();
  for (std::size_t node = 0; node < a.point_count(); ++node)
    for (int f = 0; f < fc; ++f)
      for (int r = 0; r < sh.rows; ++r)
        for (int c = 0; c < sh.cols; ++c) {
          double acc = 0.0;
          for (int m = 0; m < a.shape().cols; ++m) {
            int fa = a.shape().degree ? f : 0, fb = b.shape().degree ? f : 0;
            acc += a.at(node, a.index(r, m, fa)) * b.at(node, b.index(m, c, fb));
          }
          out.at(node, out.index(r, c, f)) = acc;
        }
  return out;
}

/// Wedge of matrix-valued 1-forms: (a ^ b)_{rt} = a_r b_t - a_t b_r (matrix products).
inline GridField wedge(const GridField &a, const GridField &b) {
  if (!(a.chart() == b.chart()))
    throw ShapeError("wedge: chart mismatch");
  if (a.shape().degree != 1 || b.shape().degree != 1)
    throw DegreeError("wedge: both factors must be 1-forms");
  if (a.shape().cols != b.shape().rows)
    throw ShapeError("wedge: inner matrix dimensions differ");
  const int n = a.dim();
  Shape sh{2, a.shape().rows, b.shape().cols};
  GridField out(a.chart(), sh);
  const int inner = a.shape().cols;
  for (std::size_t node = 0; node < a.point_count(); ++node)
    for (int p = 0; p < n; ++p)
      for (int t = p + 1; t < n; ++t) {
        int slot = pair_slot(n, p, t).slot;
        for (int r = 0; r < sh.rows; ++r)
          for (int c = 0; c < sh.cols; ++c) {
            double acc = 0.0;
            for (int m = 0; m < inner; ++m)
              acc += a.at(node, a.index(r, m, p)) * b.at(node, b.index(m, c, t)) -
                     a.at(node, a.index(r, m, t)) * b.at(node, b.index(m, c, p));
            out.at(node, out.index(r, c, slot)) = acc;
          }
      }
  return out;
}

/// Matrix inner product <a;b> = sum_j a_j b_j of two matrix-valued 1-forms.
inline GridField matrix_inner(const GridField &a, const GridField &b) {
  if (!(a.chart() == b.chart()))
    throw ShapeError("matrix_inner: chart mismatch");
  if (a.shape().degree != 1 || b.shape().degree != 1)
    throw DegreeError("matrix_inner: both factors must be 1-forms");
  if (a.shape().cols != b.shape().rows)
    throw ShapeError("matrix_inner: inner matrix dimensions differ");
  const int n = a.dim();
  Shape sh{0, a.shape().rows, b.shape().cols};
  GridField out(a.chart(), sh);
  for (std::size_t node = 0; node < a.point_count(); ++node)
    for (int r = 0; r < sh.rows; ++r)
      for (int c = 0; c < sh.cols; ++c) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j)
          for (int m = 0; m < a.shape().cols; ++m)
            acc += a.at(node, a.index(r, m, j)) * b.at(node, b.index(m, c, j));
        out.at(node, out.index(r, c)) = acc;
      }
  return out;
}

/// Divergence over the second form index: (div w)_r = sum_t D_t w_{rt}.
inline GridField form_divergence(const GridField &w) {
  if (w.shape().degree != 2)
    throw DegreeError("form_divergence: needs a 2-form");
  const int n = w.dim();
  const Shape sh = w.shape();
  GridField out(w.chart(), {1, sh.rows, sh.cols});
  for (int t = 0; t < n; ++t) {
    GridField Dt = detail::partial(w, t);
    for (std::size_t node = 0; node < w.point_count(); ++node)
      for (int r = 0; r < sh.rows; ++r)
        for (int c = 0; c < sh.cols; ++c)
          for (int p = 0; p < n; ++p) {
            if (p == t)
              continue;
            PairSlot ps = pair_slot(n, p, t);
            out.at(node, out.index(r, c, p)) += ps.sign * Dt.at(node, w.index(r, c, ps.slot));
          }
  }
  return out;
}

/// Moves the column index of a matrix 0-form into the form slot:
/// B^a_nu becomes the vector-valued 1-form with component (a, form nu).
inline GridField vectorize(const GridField &m) {
  if (m.shape().degree != 0 || m.shape().cols != m.dim())
    throw ShapeError("vectorize: needs an n x n matrix 0-form");
  GridField out(m.chart(), {1, m.shape().rows, 1});
  out.values() = m.values(); // identical memory layout
  return out;
}

inline GridField devectorize(const GridField &v) {
  if (v.shape().degree != 1 || v.shape().cols != 1)
    throw ShapeError("devectorize: needs a vector-valued 1-form");
  GridField out(v.chart(), {0, v.shape().rows, v.dim()});
  out.values() = v.values();
  return out;
}

/// Vector-valued 2-form built from a matrix 2-form M:
/// (div M)^a_{bc} = s (F^a_{c,b} - F^a_{b,c}), F = form_divergence(M).
///
/// For C = J Gamma this is the exterior derivative of vectorize(delta C) up
/// to a term that vanishes when the lower indices of Gamma are symmetric,
/// which is the right-hand side used for the B-vec equation.
inline GridField vector_divergence(const GridField &M) {
  if (M.shape().degree != 2 || M.shape().cols != M.dim())
    throw ShapeError("vector_divergence: needs an n x n matrix 2-form");
  const int n = M.dim();
  GridField F = form_divergence(M);
  GridField out(M.chart(), {2, M.shape().rows, 1});
  for (std::size_t node = 0; node < M.point_count(); ++node)
    for (int r = 0; r < M.shape().rows; ++r)
      for (int b = 0; b < n; ++b)
        for (int c = b + 1; c < n; ++c)
          out.at(node, out.index(r, 0, pair_slot(n, b, c).slot)) =
              kCodiffSign * (F.at(node, F.index(r, c, b)) - F.at(node, F.index(r, b, c)));
  return out;
}

} // namespace rtgeo
