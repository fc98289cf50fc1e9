#pragma once

#include <rtgeo/chart.hpp>

namespace rtgeo {

/// Time-sampled trajectory with its velocity.
struct Curve {
  std::vector<double> t;
  std::vector<Point> x;
  std::vector<Point> v;
  std::string method;
  double dt = 0.0;
  int picard_iterations = 0;
  bool truncated = false;      // realized interval shorter than requested
  std::string truncation;      // reason when truncated
  bool nonuniqueness_flag = false;

  std::size_t size() const { return t.size(); }
  int dim() const { return x.empty() ? 0 : static_cast<int>(x.front().size()); }
  double t0() const { return t.front(); }
  double t1() const { return t.back(); }
  double length() const { return t.empty() ? 0.0 : t.back() - t.front(); }

  void push(double time, Point pos, Point vel) {
    t.push_back(time);
    x.push_back(std::move(pos));
    v.push_back(std::move(vel));
  }
};

/// Sup over common nodes of |x_a - x_b| + |v_a - v_b| (Euclidean per sample).
///
/// Both curves must share t0 and step; the comparison stops at the shorter one.
inline double c1_distance(const Curve &a, const Curve &b) {
  const std::size_t m = std::min(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double dx = 0.0, dv = 0.0;
    for (std::size_t k = 0; k < a.x[i].size(); ++k) {
      dx += std::pow(a.x[i][k] - b.x[i][k], 2);
      dv += std::pow(a.v[i][k] - b.v[i][k], 2);
    }
    worst = std::max(worst, std::sqrt(dx) + std::sqrt(dv));
  }
  return worst;
}

/// Truncates to the first m samples.
inline Curve head(const Curve &c, std::size_t m) {
  Curve out = c;
  m = std::min(m, c.size());
  out.t.resize(m);
  out.x.resize(m);
  out.v.resize(m);
  return out;
}

} // namespace rtgeo
