#pragma once

#include <rtgeo/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace rtgeo {

using Point = std::vector<double>;

/// Closed interval bounds of a single axis.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
  bool operator==(const Interval &) const = default;
};

/// Rectangular coordinate domain carrying a uniform tensor-product grid.
///
/// Nodes are ordered lexicographically with axis 0 slowest, so the flat
/// node index is sum_a i_a * stride_a with stride_{n-1} = 1.
class Chart {
public:
  Chart() = default;

  Chart(std::vector<Interval> bounds, std::vector<int> resolution)
      : bounds_(std::move(bounds)), res_(std::move(resolution)) {
    if (bounds_.size() < 2)
      throw ConfigError("chart dimension must be at least 2");
    if (res_.size() != bounds_.size())
      throw ConfigError("chart dimension/resolution mismatch: " +
                        std::to_string(bounds_.size()) + " bounds vs " +
                        std::to_string(res_.size()) + " resolutions");
    for (std::size_t a = 0; a < bounds_.size(); ++a) {
      if (!(bounds_[a].hi > bounds_[a].lo) || !std::isfinite(bounds_[a].lo) ||
          !std::isfinite(bounds_[a].hi))
        throw ConfigError("empty interval on axis " + std::to_string(a));
      if (res_[a] < 8)
        throw ConfigError("resolution on axis " + std::to_string(a) +
                          " must be at least 8");
    }
    const int n = dim();
    h_.resize(n);
    stride_.resize(n);
    for (int a = 0; a < n; ++a)
      h_[a] = bounds_[a].length() / (res_[a] - 1);
    stride_[n - 1] = 1;
    for (int a = n - 2; a >= 0; --a)
      stride_[a] = stride_[a + 1] * static_cast<std::size_t>(res_[a + 1]);
    points_ = stride_[0] * static_cast<std::size_t>(res_[0]);
  }

  int dim() const { return static_cast<int>(bounds_.size()); }
  const std::vector<Interval> &bounds() const { return bounds_; }
  const std::vector<int> &resolution() const { return res_; }
  const std::vector<double> &spacing() const { return h_; }
  double spacing(int a) const { return h_[a]; }
  double max_spacing() const { return *std::max_element(h_.begin(), h_.end()); }
  int resolution(int a) const { return res_[a]; }
  std::size_t stride(int a) const { return stride_[a]; }
  std::size_t point_count() const { return points_; }

  double volume() const {
    double v = 1.0;
    for (const auto &b : bounds_)
      v *= b.length();
    return v;
  }

  void multi_index(std::size_t node, std::span<int> idx) const {
    for (int a = 0; a < dim(); ++a) {
      idx[a] = static_cast<int>(node / stride_[a]);
      node %= stride_[a];
    }
  }

  std::size_t flat_index(std::span<const int> idx) const {
    std::size_t k = 0;
    for (int a = 0; a < dim(); ++a)
      k += static_cast<std::size_t>(idx[a]) * stride_[a];
    return k;
  }

  int axis_index(std::size_t node, int a) const {
    return static_cast<int>((node / stride_[a]) % static_cast<std::size_t>(res_[a]));
  }

  double coordinate(int a, int i) const { return bounds_[a].lo + i * h_[a]; }

  Point node_point(std::size_t node) const {
    Point x(dim());
    for (int a = 0; a < dim(); ++a)
      x[a] = coordinate(a, axis_index(node, a));
    return x;
  }

  bool is_boundary(std::size_t node) const {
    for (int a = 0; a < dim(); ++a) {
      int i = axis_index(node, a);
      if (i == 0 || i == res_[a] - 1)
        return true;
    }
    return false;
  }

  /// True when x lies in the closed chart, up to a relative slack.
  bool contains(std::span<const double> x, double slack = 1e-12) const {
    for (int a = 0; a < dim(); ++a) {
      double tol = slack * bounds_[a].length();
      if (!(x[a] >= bounds_[a].lo - tol && x[a] <= bounds_[a].hi + tol))
        return false;
    }
    return true;
  }

  /// Trapezoidal quadrature weight of a node (sums to the chart volume).
  double quadrature_weight(std::size_t node) const {
    double w = 1.0;
    for (int a = 0; a < dim(); ++a) {
      int i = axis_index(node, a);
      w *= (i == 0 || i == res_[a] - 1) ? 0.5 * h_[a] : h_[a];
    }
    return w;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "n=" << dim() << " bounds=";
    for (int a = 0; a < dim(); ++a) {
      if (a)
        os << 'x';
      os << '[' << bounds_[a].lo << ',' << bounds_[a].hi << ']';
    }
    os << " res=";
    for (int a = 0; a < dim(); ++a) {
      if (a)
        os << 'x';
      os << res_[a];
    }
    return os.str();
  }

  bool operator==(const Chart &o) const {
    return bounds_ == o.bounds_ && res_ == o.res_;
  }

private:
  std::vector<Interval> bounds_;
  std::vector<int> res_;
  std::vector<double> h_;
  std::vector<std::size_t> stride_;
  std::size_t points_ = 0;
};

inline Chart make_chart(int n, std::vector<Interval> bounds, std::vector<int> resolution) {
  if (n < 2)
    throw ConfigError("chart dimension must be at least 2");
  if (static_cast<int>(bounds.size()) != n || static_cast<int>(resolution.size()) != n)
    throw ConfigError("chart dimension/resolution mismatch");
  return Chart(std::move(bounds), std::move(resolution));
}

/// Same bounds, uniform resolution on every axis.
inline Chart with_resolution(const Chart &c, int res) {
  return Chart(c.bounds(), std::vector<int>(c.dim(), res));
}

/// Axis-aligned sub-box used to restrict reductions to an interior region.
struct Box {
  std::vector<Interval> bounds;
  bool contains(std::span<const double> x) const {
    for (std::size_t a = 0; a < bounds.size(); ++a)
      if (x[a] < bounds[a].lo - 1e-12 || x[a] > bounds[a].hi + 1e-12)
        return false;
    return true;
  }
};

/// The chart with a margin removed on every side.
inline Box shrink(const Chart &c, double margin) {
  Box b;
  for (const auto &iv : c.bounds())
    b.bounds.push_back({iv.lo + margin, iv.hi - margin});
  return b;
}

/// Inner box leaving max(fraction * length, cells * h) on every side of each axis.
inline Box inset(const Chart &c, double fraction, double cells = 0.0) {
  Box b;
  for (int a = 0; a < c.dim(); ++a) {
    const auto &iv = c.bounds()[a];
    double m = std::max(fraction * iv.length(), cells * c.spacing(a));
    b.bounds.push_back({iv.lo + m, iv.hi - m});
  }
  return b;
}

inline int binomial(int n, int k) {
  if (k < 0 || k > n)
    return 0;
  int r = 1;
  for (int i = 1; i <= k; ++i)
    r = r * (n - k + i) / i;
  return r;
}

/// Component layout of a sampled field: an (rows x cols) matrix whose
/// entries are differential forms of the given degree.
///
/// Components are ordered (row, col, form) lexicographically; degree-2 form
/// slots enumerate pairs (a,b) with a<b lexicographically. A scalar is
/// form0:1x1, a vector form0:nx1, a connection form1:nxn.
struct Shape {
  int degree = 0;
  int rows = 1;
  int cols = 1;

  int form_count(int n) const { return binomial(n, degree); }
  int components(int n) const { return rows * cols * form_count(n); }
  bool operator==(const Shape &) const = default;

  std::string tag() const {
    return "form" + std::to_string(degree) + ":" + std::to_string(rows) + "x" +
           std::to_string(cols);
  }

  static Shape parse(const std::string &s) {
    Shape sh;
    char x = 0;
    std::istringstream is(s);
    if (s.rfind("form", 0) != 0)
      throw ConfigError("bad shape tag '" + s + "'");
    is.ignore(4);
    char colon = 0;
    if (!(is >> sh.degree >> colon >> sh.rows >> x >> sh.cols) || colon != ':' || x != 'x' ||
        sh.degree < 0 || sh.degree > 2 || sh.rows < 1 || sh.cols < 1)
      throw ConfigError("bad shape tag '" + s + "'");
    return sh;
  }
};

inline Shape scalar_shape() { return {0, 1, 1}; }
inline Shape vector_shape(int n) { return {0, n, 1}; }
inline Shape matrix_shape(int n) { return {0, n, n}; }
inline Shape connection_shape(int n) { return {1, n, n}; }
inline Shape curvature_shape(int n) { return {2, n, n}; }

/// Slot of the 2-form pair (a,b), a != b, and the sign relating the stored
/// canonical (min,max) component to the requested one.
struct PairSlot {
  int slot;
  double sign;
};

inline PairSlot pair_slot(int n, int a, int b) {
  double sign = 1.0;
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }
  // pairs (0,1),(0,2)..(0,n-1),(1,2)...
  int slot = a * n - a * (a + 1) / 2 + (b - a - 1);
  return {slot, sign};
}

/// Sampled field: values stored point-major, then component order of Shape.
class GridField {
public:
  GridField() = default;
  GridField(Chart chart, Shape shape)
      : chart_(std::move(chart)), shape_(shape),
        ncomp_(shape.components(chart_.dim())),
        values_(chart_.point_count() * ncomp_, 0.0) {}
  GridField(Chart chart, Shape shape, std::vector<double> values)
      : chart_(std::move(chart)), shape_(shape), ncomp_(shape.components(chart_.dim())),
        values_(std::move(values)) {
    if (values_.size() != chart_.point_count() * ncomp_)
      throw ShapeError("value count does not match chart x shape");
  }

  const Chart &chart() const { return chart_; }
  const Shape &shape() const { return shape_; }
  int dim() const { return chart_.dim(); }
  int components() const { return ncomp_; }
  int form_count() const { return shape_.form_count(chart_.dim()); }
  std::size_t point_count() const { return chart_.point_count(); }

  std::vector<double> &values() { return values_; }
  const std::vector<double> &values() const { return values_; }

  double &at(std::size_t node, int comp) { return values_[node * ncomp_ + comp]; }
  double at(std::size_t node, int comp) const { return values_[node * ncomp_ + comp]; }

  std::span<double> node_values(std::size_t node) {
    return {values_.data() + node * ncomp_, static_cast<std::size_t>(ncomp_)};
  }
  std::span<const double> node_values(std::size_t node) const {
    return {values_.data() + node * ncomp_, static_cast<std::size_t>(ncomp_)};
  }

  int index(int r, int c, int f = 0) const { return (r * shape_.cols + c) * form_count() + f; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  GridField &operator+=(const GridField &o) {
    require_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i)
      values_[i] += o.values_[i];
    return *this;
  }
  GridField &operator-=(const GridField &o) {
    require_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i)
      values_[i] -= o.values_[i];
    return *this;
  }
  GridField &operator*=(double s) {
    for (double &v : values_)
      v *= s;
    return *this;
  }

  void require_same(const GridField &o) const {
    if (!(chart_ == o.chart_))
      throw ShapeError("chart mismatch");
    if (!(shape_ == o.shape_))
      throw ShapeError("shape mismatch: " + shape_.tag() + " vs " + o.shape_.tag());
  }

private:
  Chart chart_;
  Shape shape_;
  int ncomp_ = 0;
  std::vector<double> values_;
};

inline GridField operator+(GridField a, const GridField &b) { return a += b; }
inline GridField operator-(GridField a, const GridField &b) { return a -= b; }
inline GridField operator*(double s, GridField a) { return a *= s; }

/// Pointwise evaluator: writes all components at x into out.
using Evaluator = std::function<void(std::span<const double> x, std::span<double> out)>;

inline GridField sample_field(const Chart &chart, const Evaluator &eval, Shape shape) {
  GridField f(chart, shape);
  for (std::size_t k = 0; k < chart.point_count(); ++k) {
    Point x = chart.node_point(k);
    auto out = f.node_values(k);
    eval(x, out);
    for (double v : out) {
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite sample at node " << k << " (";
        for (std::size_t a = 0; a < x.size(); ++a)
          os << (a ? "," : "") << x[a];
        os << ")";
        throw SamplingError(os.str());
      }
    }
  }
  return f;
}

/// Multilinear interpolation of every component at x.
///
/// Throws DomainError when x lies outside the chart; callers integrating
/// curves treat that as the end of the realized interval.
inline void interpolate_into(const GridField &field, std::span<const double> x,
                             std::span<double> out) {
  const Chart &c = field.chart();
  const int n = c.dim();
  if (!c.contains(x))
    throw DomainError("point outside chart");
  int base[8];
  double frac[8];
  std::vector<int> basev, idx(n);
  std::vector<double> fracv;
  int *b = base;
  double *fr = frac;
  if (n > 8) {
    basev.resize(n);
    fracv.resize(n);
    b = basev.data();
    fr = fracv.data();
  }
  for (int a = 0; a < n; ++a) {
    double s = (x[a] - c.bounds()[a].lo) / c.spacing(a);
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 0, c.resolution(a) - 2);
    b[a] = i;
    fr[a] = std::clamp(s - i, 0.0, 1.0);
  }
  const int nc = field.components();
  std::fill(out.begin(), out.end(), 0.0);
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1.0;
    std::size_t node = 0;
    for (int a = 0; a < n; ++a) {
      int bit = (corner >> a) & 1;
      w *= bit ? fr[a] : 1.0 - fr[a];
      node += static_cast<std::size_t>(b[a] + bit) * c.stride(a);
    }
    if (w == 0.0)
      continue;
    auto v = field.node_values(node);
    for (int q = 0; q < nc; ++q)
      out[q] += w * v[q];
  }
}

inline std::vector<double> interpolate(const GridField &field, std::span<const double> x) {
  std::vector<double> out(field.components());
  interpolate_into(field, x, out);
  return out;
}

} // namespace rtgeo
