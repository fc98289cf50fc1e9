#pragma once

#include <rtgeo/chart.hpp>

#include <map>

namespace rtgeo {

/// How the kernel treats nodes whose support crosses the chart boundary.
enum class MollifyBoundary {
  Truncate, // drop outside samples and renormalize the kernel mass
  Reflect,  // odd reflection f(b - i) = 2 f(b) - f(b + i); keeps affine data exact
};

/// Bump (1 - r^2)^4 on r < 1.
inline double mollifier_kernel(double r) {
  if (r >= 1.0)
    return 0.0;
  double u = 1.0 - r * r;
  return u * u * u * u;
}

namespace detail {

struct KernelTap {
  std::vector<int> offset;
  double weight;
};

inline std::vector<KernelTap> kernel_taps(const Chart &c, double eps) {
  const int n = c.dim();
  std::vector<int> rad(n);
  for (int a = 0; a < n; ++a)
    rad[a] = static_cast<int>(std::ceil(eps / c.spacing(a)));
  std::vector<KernelTap> taps;
  std::vector<int> cur(n);
  for (int a = 0; a < n; ++a)
    cur[a] = -rad[a];
  for (;;) {
    double r2 = 0.0;
    for (int a = 0; a < n; ++a)
      r2 += std::pow(cur[a] * c.spacing(a) / eps, 2);
    double w = mollifier_kernel(std::sqrt(r2));
    if (w > 0.0)
      taps.push_back({cur, w});
    int a = n - 1;
    while (a >= 0 && ++cur[a] > rad[a]) {
      cur[a] = -rad[a];
      --a;
    }
    if (a < 0)
      break;
  }
  return taps;
}

// Value of component q at a possibly out-of-range multi-index, extended by
// odd reflection one axis at a time (exact for multilinear data).
inline double reflected(const GridField &f, std::vector<int> &idx, int q, int axis) {
  const Chart &c = f.chart();
  const int n = c.dim();
  for (int a = axis; a < n; ++a) {
    const int m = c.resolution(a);
    int i = idx[a];
    if (i >= 0 && i < m)
      continue;
    int b = i < 0 ? 0 : m - 1;
    int mirror = 2 * b - i;
    idx[a] = b;
    double fb = reflected(f, idx, q, a + 1);
    idx[a] = mirror;
    double fm = reflected(f, idx, q, a + 1);
    idx[a] = i;
    return 2.0 * fb - fm;
  }
  return f.at(c.flat_index(idx), q);
}

} // namespace detail

/// Convolution with the normalized bump of radius eps.
///
/// Throws ResolutionError when eps < 2 max h, since the kernel is then not
/// resolved by the grid.
inline GridField mollify(const GridField &f, double eps,
                         MollifyBoundary mode = MollifyBoundary::Truncate) {
  const Chart &c = f.chart();
  const int n = c.dim();
  if (!(eps >= 2.0 * c.max_spacing() * (1.0 - 1e-12)))
    throw ResolutionError("mollify: eps = " + std::to_string(eps) + " is below 2h = " +
                          std::to_string(2.0 * c.max_spacing()));
  auto taps = detail::kernel_taps(c, eps);
  if (mode == MollifyBoundary::Reflect)
    for (int a = 0; a < n; ++a)
      if (std::ceil(eps / c.spacing(a)) > c.resolution(a) - 1)
        throw ResolutionError("mollify: reflection needs eps below the chart width");
  const int nc = f.components();
  GridField out(c, f.shape());
  std::vector<int> base(n), idx(n);
  for (std::size_t node = 0; node < c.point_count(); ++node) {
    c.multi_index(node, base);
    auto o = out.node_values(node);
    double mass = 0.0;
    for (const auto &t : taps) {
      bool inside = true;
      for (int a = 0; a < n; ++a) {
        idx[a] = base[a] + t.offset[a];
        inside &= idx[a] >= 0 && idx[a] < c.resolution(a);
      }
      if (inside) {
        auto v = f.node_values(c.flat_index(idx));
        for (int q = 0; q < nc; ++q)
          o[q] += t.weight * v[q];
        mass += t.weight;
      } else if (mode == MollifyBoundary::Reflect) {
        for (int q = 0; q < nc; ++q)
          o[q] += t.weight * detail::reflected(f, idx, q, 0);
        mass += t.weight;
      }
    }
    for (int q = 0; q < nc; ++q)
      o[q] /= mass;
  }
  return out;
}

} // namespace rtgeo

namespace rtgeo {

/// Mollification in y of a field known at the images of the x-nodes.
///
/// With G_k = G(y(x_k)) the convolution is evaluated by change of variables,
///   (phi_eps * G)(q) = sum_k w_k |det J_k| phi((q - y_k)/eps) G_k / (same sum with G = 1),
/// so G is never resampled on a y-grid. `queries` is a vector field of points
/// q; the result lives on its chart. The renormalization truncates the kernel
/// at the edge of the image.
inline GridField mollify_through_map(const GridField &g_at_x, const GridField &y_of_x,
                                     const GridField &detJ, const GridField &queries, double eps) {
  const Chart &cx = g_at_x.chart();
  const int n = cx.dim();
  if (!(y_of_x.chart() == cx) || !(detJ.chart() == cx))
    throw ShapeError("mollify_through_map: fields must share the x-chart");
  if (!(eps >= 2.0 * cx.max_spacing() * (1.0 - 1e-12)))
    throw ResolutionError("mollify_through_map: eps = " + std::to_string(eps) + " is below 2h = " +
                          std::to_string(2.0 * cx.max_spacing()));
  // bucket the images on a lattice of cell size eps
  auto cell_of = [eps](std::span<const double> y, int a) { return static_cast<long>(std::floor(y[a] / eps)); };
  std::map<std::vector<long>, std::vector<std::size_t>> buckets;
  for (std::size_t k = 0; k < cx.point_count(); ++k) {
    std::vector<long> key(n);
    for (int a = 0; a < n; ++a)
      key[a] = cell_of(y_of_x.node_values(k), a);
    buckets[key].push_back(k);
  }
  const Chart &cq = queries.chart();
  const int nc = g_at_x.components();
  GridField out(cq, g_at_x.shape());
  std::vector<long> key(n), base(n), off(n);
  for (std::size_t node = 0; node < cq.point_count(); ++node) {
    auto q = queries.node_values(node);
    for (int a = 0; a < n; ++a)
      base[a] = cell_of(q, a);
    double mass = 0.0;
    auto o = out.node_values(node);
    std::fill(off.begin(), off.end(), -1);
    for (;;) {
      for (int a = 0; a < n; ++a)
        key[a] = base[a] + off[a];
      auto it = buckets.find(key);
      if (it != buckets.end())
        for (std::size_t k : it->second) {
          auto y = y_of_x.node_values(k);
          double r2 = 0.0;
          for (int a = 0; a < n; ++a)
            r2 += (q[a] - y[a]) * (q[a] - y[a]);
          double w = mollifier_kernel(std::sqrt(r2) / eps);
          if (w == 0.0)
            continue;
          w *= cx.quadrature_weight(k) * std::abs(detJ.at(k, 0));
          mass += w;
          auto g = g_at_x.node_values(k);
          for (int c = 0; c < nc; ++c)
            o[c] += w * g[c];
        }
      int a = n - 1;
      while (a >= 0 && ++off[a] > 1) {
        off[a] = -1;
        --a;
      }
      if (a < 0)
        break;
    }
    if (!(mass > 0.0))
      throw SamplingError("mollify_through_map: query point outside the image of the chart");
    for (int c = 0; c < nc; ++c)
      o[c] /= mass;
  }
  return out;
}

} // namespace rtgeo
