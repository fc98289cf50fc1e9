#pragma once

#include <rtgeo/curve.hpp>
#include <rtgeo/fields.hpp>
#include <rtgeo/norms.hpp>

#include <nlohmann/json.hpp>

#include <functional>
#include <numbers>
#include <optional>

namespace rtgeo {

/// Pointwise access to Gamma^mu_{rho nu}(x) in connection slot layout,
/// either interpolated from a grid or given in closed form.
struct ConnectionSource {
  using Eval = std::function<void(std::span<const double>, std::span<double>)>;

  Chart chart;
  Eval eval;
  double c0 = 0.0;        // sup of the pointwise magnitude
  double lipschitz = 0.0; // sup of the gradient magnitude

  int dim() const { return chart.dim(); }

  static ConnectionSource grid(const ConnectionField &g) {
    auto form = std::make_shared<const GridField>(g.form());
    ConnectionSource s{g.chart(),
                       [form](std::span<const double> x, std::span<double> o) {
                         interpolate_into(*form, x, o);
                       }};
    s.estimate_constants(*form);
    return s;
  }

  /// Closed-form evaluator; constants are estimated from samples on `c`.
  static ConnectionSource analytic(const Chart &c, Eval fn) {
    ConnectionSource s{c, fn};
    s.estimate_constants(sample_field(c, fn, connection_shape(c.dim())));
    return s;
  }

private:
  void estimate_constants(const GridField &f) {
    auto m = magnitudes(f);
    c0 = m.empty() ? 0.0 : *std::max_element(m.begin(), m.end());
    lipschitz = 0.0;
    std::vector<GridField> D;
    for (int a = 0; a < f.dim(); ++a)
      D.push_back(partial(f, a));
    for (std::size_t node = 0; node < f.chart().point_count(); ++node) {
      double s2 = 0.0;
      for (const auto &d : D)
        for (double v : d.node_values(node))
          s2 += v * v;
      lipschitz = std::max(lipschitz, std::sqrt(s2));
    }
  }
};

inline ConnectionSource zero_source(const Chart &c) {
  return ConnectionSource::analytic(c, [](std::span<const double>, std::span<double> o) {
    std::fill(o.begin(), o.end(), 0.0);
  });
}

/// Initial value problem for gamma'' + Gamma(gamma) gamma' gamma' = K.
struct GeodesicProblem {
  ConnectionSource source;
  double t0 = 0.0;
  Point x0;
  Point v0;
  double interval = 1.0; // requested length of I, capped at 1
  std::optional<ForceField> force;
};

enum class OdeMethod { Picard, RK4 };

inline const char *to_string(OdeMethod m) { return m == OdeMethod::Picard ? "picard" : "rk4"; }

inline OdeMethod parse_method(const std::string &s) {
  if (s == "picard")
    return OdeMethod::Picard;
  if (s == "rk4")
    return OdeMethod::RK4;
  throw ConfigError("unknown ODE method '" + s + "' (use picard or rk4)");
}

struct OdeOptions {
  double dt = 0.0;          // 0 selects min(h, 1/256)
  double tol_ode = 1e-12;   // Picard sup-norm increment
  int max_sweeps = 500;
  double velocity_ball = 1.0;
  double max_interval = 1.0;
};

inline double default_dt(const Chart &c) { return std::min(c.max_spacing(), 1.0 / 256.0); }

namespace detail {

struct OdeSystem {
  const GeodesicProblem &pb;
  int n;
  mutable std::vector<double> g;

  explicit OdeSystem(const GeodesicProblem &p)
      : pb(p), n(p.source.dim()), g(static_cast<std::size_t>(n * n * n)) {}

  bool admissible(const Point &x, const Point &v, double ball) const {
    if (!pb.source.chart.contains(x))
      return false;
    double d = 0.0;
    for (int a = 0; a < n; ++a)
      d += std::pow(v[a] - pb.v0[a], 2);
    return std::sqrt(d) <= ball;
  }

  // Acceleration -Gamma^mu_{rho nu} v^rho v^nu + K^mu.
  Point accel(double t, const Point &x, const Point &v) const {
    pb.source.eval(x, g);
    Point a(n, 0.0);
    for (int mu = 0; mu < n; ++mu)
      for (int rho = 0; rho < n; ++rho)
        for (int nu = 0; nu < n; ++nu)
          a[mu] -= gamma_component(g, n, mu, rho, nu) * v[rho] * v[nu];
    if (pb.force) {
      Point k = (*pb.force)(t, x, v);
      for (int mu = 0; mu < n; ++mu)
        a[mu] += k[mu];
    }
    return a;
  }
};

inline Point axpy(const Point &x, double s, const Point &d) {
  Point r = x;
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] += s * d[i];
  return r;
}

inline void check_start(const GeodesicProblem &pb) {
  const int n = pb.source.dim();
  if (static_cast<int>(pb.x0.size()) != n || static_cast<int>(pb.v0.size()) != n)
    throw ShapeError("geodesic problem: x0 and v0 need " + std::to_string(n) + " components");
  const Chart &c = pb.source.chart;
  for (int a = 0; a < n; ++a) {
    const auto &iv = c.bounds()[a];
    if (!(pb.x0[a] > iv.lo && pb.x0[a] < iv.hi))
      throw DomainError("geodesic problem: x0 is not strictly inside the chart");
  }
  for (double v : pb.v0)
    if (!std::isfinite(v))
      throw DomainError("geodesic problem: v0 is not finite");
}

// One classical RK4 step; empty when a stage leaves the chart or the velocity ball.
inline std::optional<std::pair<Point, Point>> rk4_step(const OdeSystem &sys, double t, double dt,
                                                       const Point &x, const Point &v, double ball) {
  Point k1x = v, k1v = sys.accel(t, x, v);
  Point x2 = axpy(x, dt / 2, k1x), v2 = axpy(v, dt / 2, k1v);
  if (!sys.admissible(x2, v2, ball))
    return std::nullopt;
  Point k2x = v2, k2v = sys.accel(t + dt / 2, x2, v2);
  Point x3 = axpy(x, dt / 2, k2x), v3 = axpy(v, dt / 2, k2v);
  if (!sys.admissible(x3, v3, ball))
    return std::nullopt;
  Point k3x = v3, k3v = sys.accel(t + dt / 2, x3, v3);
  Point x4 = axpy(x, dt, k3x), v4 = axpy(v, dt, k3v);
  if (!sys.admissible(x4, v4, ball))
    return std::nullopt;
  Point k4x = v4, k4v = sys.accel(t + dt, x4, v4);
  Point xn(x.size()), vn(v.size());
  for (std::size_t a = 0; a < x.size(); ++a) {
    xn[a] = x[a] + dt / 6 * (k1x[a] + 2 * k2x[a] + 2 * k3x[a] + k4x[a]);
    vn[a] = v[a] + dt / 6 * (k1v[a] + 2 * k2v[a] + 2 * k3v[a] + k4v[a]);
  }
  if (!sys.admissible(xn, vn, ball))
    return std::nullopt;
  return std::make_pair(std::move(xn), std::move(vn));
}

inline Curve rk4(const GeodesicProblem &pb, double dt, int steps, const OdeOptions &opt) {
  OdeSystem sys(pb);
  Curve c;
  c.method = "rk4";
  c.dt = dt;
  Point x = pb.x0, v = pb.v0;
  c.push(pb.t0, x, v);
  for (int i = 0; i < steps; ++i) {
    auto next = rk4_step(sys, pb.t0 + i * dt, dt, x, v, opt.velocity_ball);
    if (!next) {
      c.truncated = true;
      c.truncation = "left the chart or the velocity ball |v - v0| <= " +
                     std::to_string(opt.velocity_ball);
      break;
    }
    std::tie(x, v) = std::move(*next);
    c.push(pb.t0 + (i + 1) * dt, x, v);
  }
  return c;
}

inline Curve picard(const GeodesicProblem &pb, double dt, int steps, const OdeOptions &opt) {
  OdeSystem sys(pb);
  const int n = sys.n;
  Curve c;
  c.method = "picard";
  c.dt = dt;
  int m = steps + 1;
  std::vector<Point> X(m), V(m);
  for (int i = 0; i < m; ++i) {
    X[i] = axpy(pb.x0, i * dt, pb.v0);
    V[i] = pb.v0;
  }
  std::vector<double> incs;
  for (int sweep = 1;; ++sweep) {
    // shrink the grid to the admissible prefix of the current iterate
    for (int i = 1; i < m; ++i)
      if (!sys.admissible(X[i], V[i], opt.velocity_ball)) {
        m = i;
        c.truncated = true;
        c.truncation = "left the chart or the velocity ball |v - v0| <= " +
                       std::to_string(opt.velocity_ball);
        break;
      }
    std::vector<Point> A(m);
    for (int i = 0; i < m; ++i)
      A[i] = sys.accel(pb.t0 + i * dt, X[i], V[i]);
    std::vector<Point> Xn(m), Vn(m);
    Xn[0] = pb.x0;
    Vn[0] = pb.v0;
    for (int i = 1; i < m; ++i) {
      Xn[i] = Xn[i - 1];
      Vn[i] = Vn[i - 1];
      for (int a = 0; a < n; ++a) {
        Xn[i][a] += 0.5 * dt * (V[i - 1][a] + V[i][a]);
        Vn[i][a] += 0.5 * dt * (A[i - 1][a] + A[i][a]);
      }
    }
    double inc = 0.0;
    for (int i = 0; i < m; ++i)
      for (int a = 0; a < n; ++a)
        inc = std::max({inc, std::abs(Xn[i][a] - X[i][a]), std::abs(Vn[i][a] - V[i][a])});
    X.assign(Xn.begin(), Xn.end());
    V.assign(Vn.begin(), Vn.end());
    incs.push_back(inc);
    c.picard_iterations = sweep;
    if (inc < opt.tol_ode)
      break;
    const std::size_t k = incs.size();
    if (k >= 4 && incs[k - 1] > incs[k - 2] && incs[k - 2] > incs[k - 3] && incs[k - 3] > incs[k - 4])
      throw ConvergenceError("Picard iteration diverges: increment grew over 3 sweeps", incs);
    if (sweep >= opt.max_sweeps)
      throw ConvergenceError("Picard iteration hit the sweep cap", incs);
  }
  for (int i = 0; i < m; ++i)
    c.push(pb.t0 + i * dt, X[i], V[i]);
  return c;
}

} // namespace detail

/// Solves the IVP on [t0, t0 + |I|] with |I| <= 1, truncated where the curve
/// leaves the chart or the ball |v - v0| <= 1.
inline Curve solve_geodesic(const GeodesicProblem &pb, OdeMethod method, const OdeOptions &opt = {}) {
  detail::check_start(pb);
  double dt = opt.dt > 0.0 ? opt.dt : default_dt(pb.source.chart);
  double len = std::min(pb.interval, opt.max_interval);
  if (!(len > 0.0))
    throw DomainError("geodesic problem: interval length must be positive");
  int steps = static_cast<int>(std::floor(len / dt + 1e-9));
  Curve c = method == OdeMethod::RK4 ? detail::rk4(pb, dt, steps, opt) : detail::picard(pb, dt, steps, opt);
  if (pb.interval > opt.max_interval && !c.truncated) {
    c.truncated = true;
    c.truncation = "interval capped at " + std::to_string(opt.max_interval);
  }
  return c;
}

/// Forced variant; the problem must carry a force field.
inline Curve solve_forced(const GeodesicProblem &pb, OdeMethod method, const OdeOptions &opt = {}) {
  if (!pb.force)
    throw ConfigError("solve_forced: problem has no force field");
  return solve_geodesic(pb, method, opt);
}

/// Hoelder norm in time: sup |f| + sup |f(s) - f(t)| / |s - t|^alpha over
/// pairs at least `floor_steps` samples apart.
inline double time_holder_norm(const Curve &c, bool velocity, double alpha, int floor_steps = 4) {
  const auto &f = velocity ? c.v : c.x;
  auto dist = [](const Point &a, const Point &b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
      s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
  };
  double sup = 0.0, quot = 0.0;
  const Point zero(c.dim(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    sup = std::max(sup, dist(f[i], zero));
    for (std::size_t j = i + floor_steps; j < f.size(); ++j)
      quot = std::max(quot, dist(f[i], f[j]) / std::pow(c.t[j] - c.t[i], alpha));
  }
  return sup + quot;
}

/// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) {
  return std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
}

struct UniformBound {
  double lhs = 0.0;
  double rhs = 0.0;
  double alpha = 0.0;
  bool holds = false;
};

inline void to_json(nlohmann::json &j, const UniformBound &b) {
  j = {{"lhs", b.lhs}, {"rhs", b.rhs}, {"alpha", b.alpha}, {"holds", b.holds}};
}

/// |gamma|_{C^{0,alpha}} + |gamma'|_{C^{0,alpha}} <= b_n |Gamma|_{C^0} + b_n^2 + |gamma(t0)| + |gamma'(t0)|.
inline UniformBound uniform_bound_check(const Curve &c, double gamma_c0, double alpha) {
  UniformBound b;
  b.alpha = alpha;
  if (c.size() == 0)
    return b;
  const double bn = unit_ball_volume(c.dim());
  auto norm = [](const Point &p) {
    double s = 0.0;
    for (double v : p)
      s += v * v;
    return std::sqrt(s);
  };
  b.lhs = time_holder_norm(c, false, alpha) + time_holder_norm(c, true, alpha);
  b.rhs = bn * gamma_c0 + bn * bn + norm(c.x.front()) + norm(c.v.front());
  b.holds = b.lhs <= b.rhs;
  return b;
}

struct GronwallReport {
  double delta0 = 0.0;
  double constant = 0.0;       // Lipschitz estimate of the first-order field
  double max_ratio = 0.0;      // sup_t |u1 - u2|(t) / (|u1 - u2|(t0) e^{C(t - t0)})
  double max_separation = 0.0;
  bool holds = false;
};

inline void to_json(nlohmann::json &j, const GronwallReport &r) {
  j = {{"delta0", r.delta0},
       {"C", r.constant},
       {"max_ratio", r.max_ratio},
       {"max_separation", r.max_separation},
       {"holds", r.holds}};
}

/// Solves twice with v0 shifted by delta0 along the first axis and checks the
/// exponential envelope; with delta0 = 0 the curves must coincide to 1e-8.
inline GronwallReport gronwall_uniqueness_check(const GeodesicProblem &pb, double delta0,
                                                const OdeOptions &opt = {}) {
  GeodesicProblem q = pb;
  q.v0[0] += delta0;
  Curve a = solve_geodesic(pb, OdeMethod::RK4, opt);
  Curve b = solve_geodesic(q, OdeMethod::RK4, opt);
  double vmax = 0.0;
  for (double v : pb.v0)
    vmax += v * v;
  vmax = std::sqrt(vmax) + opt.velocity_ball;
  GronwallReport r;
  r.delta0 = delta0;
  r.constant = 1.0 + 2.0 * pb.source.c0 * vmax + pb.source.lipschitz * vmax * vmax;
  const std::size_t m = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (int k = 0; k < a.dim(); ++k)
      s += std::pow(a.x[i][k] - b.x[i][k], 2) + std::pow(a.v[i][k] - b.v[i][k], 2);
    s = std::sqrt(s);
    r.max_separation = std::max(r.max_separation, s);
    if (delta0 > 0.0)
      r.max_ratio = std::max(r.max_ratio, s / (delta0 * std::exp(r.constant * (a.t[i] - a.t0()))));
  }
  r.holds = delta0 > 0.0 ? r.max_ratio <= 1.0 + 1e-9 : r.max_separation <= 1e-8;
  return r;
}

} // namespace rtgeo
