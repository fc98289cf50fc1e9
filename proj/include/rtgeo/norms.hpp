#pragma once

#include <rtgeo/calculus.hpp>

#include <nlohmann/json.hpp>

#include <limits>
#include <optional>

namespace rtgeo {

/// Sobolev and Holder size of a sampled field.
struct NormReport {
  double p = 2.0;
  double alpha = 1.0;
  double lp = 0.0;
  double w1p = 0.0;
  double c0 = 0.0;
  double c0alpha = 0.0;
  double pair_floor = 0.0;
};

inline void to_json(nlohmann::json &j, const NormReport &r) {
  j = {{"p", std::isinf(r.p) ? nlohmann::json("inf") : nlohmann::json(r.p)},
       {"alpha", r.alpha},
       {"lp", r.lp},
       {"w1p", r.w1p},
       {"c0", r.c0},
       {"c0alpha", r.c0alpha},
       {"pair_floor", r.pair_floor}};
}

struct NormOptions {
  std::optional<Box> window; // restrict every reduction to this box
  bool holder = true;        // the pair scan is quadratic in the node count
  double floor_factor = 4.0; // pair separation floor in units of max h
};

namespace detail {

inline bool in_window(const Chart &c, std::size_t node, const std::optional<Box> &w) {
  return !w || w->contains(c.node_point(node));
}

inline double magnitude(std::span<const double> v) {
  double s = 0.0;
  for (double x : v)
    s += x * x;
  return std::sqrt(s);
}

// L^p of a pointwise nonnegative quantity.
inline double lp_of(const Chart &c, const std::vector<double> &mag, double p,
                    const std::optional<Box> &w) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k)
      if (in_window(c, k, w))
        m = std::max(m, mag[k]);
    return m;
  }
  double s = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k)
    if (in_window(c, k, w))
      s += c.quadrature_weight(k) * std::pow(mag[k], p);
  return std::pow(s, 1.0 / p);
}

} // namespace detail

/// Pointwise Euclidean magnitude over all components.
inline std::vector<double> magnitudes(const GridField &f) {
  std::vector<double> m(f.point_count());
  for (std::size_t k = 0; k < m.size(); ++k)
    m[k] = detail::magnitude(f.node_values(k));
  return m;
}

/// L^p norm (trapezoid quadrature) of the pointwise magnitude; p may be infinite.
inline double lp_norm(const GridField &f, double p, const std::optional<Box> &window = {}) {
  return detail::lp_of(f.chart(), magnitudes(f), p, window);
}

inline double lp_distance(const GridField &a, const GridField &b, double p,
                          const std::optional<Box> &window = {}) {
  return lp_norm(a - b, p, window);
}

/// L^p norm of the finite-difference gradient magnitude.
inline double gradient_lp(const GridField &f, double p, const std::optional<Box> &window = {}) {
  std::vector<double> g(f.point_count(), 0.0);
  for (int a = 0; a < f.dim(); ++a) {
    GridField d = partial(f, a);
    for (std::size_t k = 0; k < g.size(); ++k)
      for (double v : d.node_values(k))
        g[k] += v * v;
  }
  for (double &v : g)
    v = std::sqrt(v);
  return detail::lp_of(f.chart(), g, p, window);
}

/// Largest |f(u) - f(v)| / |u - v|^alpha over node pairs at least `floor` apart.
inline double holder_quotient(const GridField &f, double alpha, double floor,
                              const std::optional<Box> &window = {}) {
  const Chart &c = f.chart();
  const int n = c.dim();
  const int nc = f.components();
  std::vector<char> inside(c.point_count());
  for (std::size_t k = 0; k < inside.size(); ++k)
    inside[k] = detail::in_window(c, k, window);
  // Iterate over offset vectors with a lexicographically positive first
  // nonzero entry; each unordered pair is visited once.
  std::vector<int> lo(n), hi(n), off(n), idx(n);
  for (int a = 0; a < n; ++a) {
    lo[a] = -(c.resolution(a) - 1);
    hi[a] = c.resolution(a) - 1;
  }
  double best = 0.0;
  std::vector<int> cur(lo);
  for (;;) {
    bool positive = false;
    for (int a = 0; a < n; ++a)
      if (cur[a] != 0) {
        positive = cur[a] > 0;
        break;
      }
    double dist2 = 0.0;
    for (int a = 0; a < n; ++a)
      dist2 += std::pow(cur[a] * c.spacing(a), 2);
    double dist = std::sqrt(dist2);
    if (positive && dist >= floor - 1e-12 * floor) {
      const double wscale = std::pow(dist, -alpha);
      // range of base indices keeping base+cur inside the grid
      std::vector<int> b0(n), b1(n);
      for (int a = 0; a < n; ++a) {
        b0[a] = std::max(0, -cur[a]);
        b1[a] = std::min(c.resolution(a) - 1, c.resolution(a) - 1 - cur[a]);
      }
      std::ptrdiff_t shift = 0;
      for (int a = 0; a < n; ++a)
        shift += static_cast<std::ptrdiff_t>(cur[a]) * static_cast<std::ptrdiff_t>(c.stride(a));
      idx = b0;
      bool empty = false;
      for (int a = 0; a < n; ++a)
        empty |= b0[a] > b1[a];
      while (!empty) {
        std::size_t u = c.flat_index(idx);
        std::size_t v = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(u) + shift);
        if (inside[u] && inside[v]) {
          const double *fu = f.values().data() + u * nc;
          const double *fv = f.values().data() + v * nc;
          double s = 0.0;
          for (int q = 0; q < nc; ++q)
            s += (fu[q] - fv[q]) * (fu[q] - fv[q]);
          best = std::max(best, std::sqrt(s) * wscale);
        }
        int a = n - 1;
        while (a >= 0 && ++idx[a] > b1[a]) {
          idx[a] = b0[a];
          --a;
        }
        if (a < 0)
          break;
      }
    }
    int a = n - 1;
    while (a >= 0 && ++cur[a] > hi[a]) {
      cur[a] = lo[a];
      --a;
    }
    if (a < 0)
      break;
  }
  return best;
}

/// L^p, W^{1,p}, C^0 and C^{0,alpha} norms of f.
inline NormReport norm_report(const GridField &f, double p, double alpha,
                              const NormOptions &opt = {}) {
  if (!(p > f.dim()) || std::isnan(p))
    throw ConfigError("norm_report: p must exceed the dimension (or be infinite)");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("norm_report: alpha must lie in (0, 1]");
  NormReport r;
  r.p = p;
  r.alpha = alpha;
  r.pair_floor = opt.floor_factor * f.chart().max_spacing();
  r.lp = lp_norm(f, p, opt.window);
  r.w1p = r.lp + gradient_lp(f, p, opt.window);
  r.c0 = lp_norm(f, std::numeric_limits<double>::infinity(), opt.window);
  r.c0alpha = r.c0 + (opt.holder ? holder_quotient(f, alpha, r.pair_floor, opt.window) : 0.0);
  return r;
}

/// Morrey exponent 1 - n/p.
inline double morrey_exponent(int n, double p) { return std::isinf(p) ? 1.0 : 1.0 - n / p; }

} // namespace rtgeo
