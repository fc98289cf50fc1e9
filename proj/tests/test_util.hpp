#pragma once

#include <rtgeo/rtgeo.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

namespace rtgeo::test {

inline Chart square(int res, double lo = 0.0, double hi = 1.0) {
  return make_chart(2, {{lo, hi}, {lo, hi}}, {res, res});
}

using ScalarFn = std::function<double(double, double)>;

inline GridField scalar_field(const Chart &c, const ScalarFn &f) {
  return sample_field(
      c, [&](std::span<const double> x, std::span<double> o) { o[0] = f(x[0], x[1]); }, scalar_shape());
}

/// Largest |value| over interior nodes at least `cells` away from the boundary.
inline double interior_max(const GridField &f, int comp, int cells = 2) {
  const Chart &c = f.chart();
  std::vector<int> idx(c.dim());
  double m = 0.0;
  for (std::size_t node = 0; node < c.point_count(); ++node) {
    c.multi_index(node, idx);
    bool inside = true;
    for (int a = 0; a < c.dim(); ++a)
      inside = inside && idx[a] >= cells && idx[a] < c.resolution(a) - cells;
    if (inside)
      m = std::max(m, std::abs(f.at(node, comp)));
  }
  return m;
}

inline double max_abs(const GridField &f) {
  double m = 0.0;
  for (double v : f.values())
    m = std::max(m, std::abs(v));
  return m;
}

inline std::string source_path(const std::string &rel) { return std::string(RTGEO_SOURCE_DIR) + "/" + rel; }

} // namespace rtgeo::test
