#pragma once

#include <rtgeo/geodesics.hpp>
#include <rtgeo/transform.hpp>

#include <Eigen/Dense>

#include <random>

namespace rtgeo {

/// Closed-form coordinate change y(x) with its Jacobian and inverse.
struct AnalyticMap {
  std::string kind;
  std::function<Point(const Point &)> forward;
  std::function<Eigen::MatrixXd(const Point &)> jacobian;
  std::function<Point(const Point &)> inverse;
};

namespace detail {

// Newton on the closed form, started at y.
inline std::function<Point(const Point &)> newton_inverse(std::function<Point(const Point &)> f,
                                                          std::function<Eigen::MatrixXd(const Point &)> J) {
  return [f, J](const Point &y) {
    const int n = static_cast<int>(y.size());
    Point x = y;
    for (int it = 0; it < 100; ++it) {
      Point r = f(x);
      Eigen::VectorXd res(n);
      for (int a = 0; a < n; ++a)
        res[a] = r[a] - y[a];
      if (res.lpNorm<Eigen::Infinity>() < 1e-15 * (1.0 + Eigen::Map<const Eigen::VectorXd>(y.data(), n).lpNorm<Eigen::Infinity>()))
        return x;
      Eigen::VectorXd dx = J(x).partialPivLu().solve(res);
      for (int a = 0; a < n; ++a)
        x[a] -= dx[a];
    }
    Point r = f(x);
    for (int a = 0; a < n; ++a)
      if (std::abs(r[a] - y[a]) > 1e-12)
        throw InversionError("closed-form map: Newton did not converge");
    return x;
  };
}

} // namespace detail

inline AnalyticMap identity_map(int n) {
  return {"identity", [](const Point &x) { return x; },
          [n](const Point &) { return Eigen::MatrixXd::Identity(n, n).eval(); },
          [](const Point &y) { return y; }};
}

/// y1 = x1, y2 = x2 + (x1)^2 / 2; pulls the zero connection back to Gamma^2_11 = 1.
inline AnalyticMap quadratic_map() {
  return {"quadratic", [](const Point &x) { return Point{x[0], x[1] + 0.5 * x[0] * x[0]}; },
          [](const Point &x) {
            Eigen::MatrixXd J(2, 2);
            J << 1, 0, x[0], 1;
            return J;
          },
          [](const Point &y) { return Point{y[0], y[1] - 0.5 * y[0] * y[0]}; }};
}

/// y1 = x1 + c |x1 - 1/2|^{1+beta}, y2 = x2: Jacobian only beta-Hoelder at x1 = 1/2.
inline AnalyticMap rough_map(double c, double beta) {
  if (!(beta > 0.0 && beta < 1.0))
    throw ConfigError("rough map needs beta in (0,1)");
  if (!(c >= 0.0 && c * (1.0 + beta) * std::pow(0.5, beta) < 1.0))
    throw ConfigError("rough map amplitude makes the map non-monotone on [0,1]");
  auto g = [c, beta](double s) { return c * std::pow(std::abs(s), 1.0 + beta); };
  AnalyticMap m;
  m.kind = "rough";
  m.forward = [g](const Point &x) {
    Point y = x;
    y[0] = x[0] + g(x[0] - 0.5);
    return y;
  };
  m.jacobian = [c, beta](const Point &x) {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
    double s = x[0] - 0.5;
    J(0, 0) = 1.0 + c * (1.0 + beta) * std::pow(std::abs(s), beta) * (s >= 0 ? 1.0 : -1.0);
    return J;
  };
  // the first coordinate is monotone, so bracket and bisect
  m.inverse = [g](const Point &y) {
    Point x = y;
    double lo = y[0] - 2.0, hi = y[0] + 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * (1.0 + std::abs(lo)); ++it) {
      double mid = 0.5 * (lo + hi);
      (mid + g(mid - 0.5) < y[0] ? lo : hi) = mid;
    }
    x[0] = 0.5 * (lo + hi);
    return x;
  };
  return m;
}

/// Smooth map with a cubic term, for the identity refinement studies (its
/// Jacobian is not affine, unlike the quadratic map).
inline AnalyticMap cubic_map() {
  AnalyticMap m;
  m.kind = "cubic";
  m.forward = [](const Point &x) {
    return Point{x[0] + 0.2 * x[0] * x[1] * x[1], x[1] + 0.5 * x[0] * x[0] + 0.1 * std::pow(x[0], 3)};
  };
  m.jacobian = [](const Point &x) {
    Eigen::MatrixXd J(2, 2);
    J << 1 + 0.2 * x[1] * x[1], 0.4 * x[0] * x[1], x[0] + 0.3 * x[0] * x[0], 1;
    return J;
  };
  m.inverse = detail::newton_inverse(m.forward, m.jacobian);
  return m;
}

/// y = x + sum_k a_k sin(w_k . x + phi_k) e_{axis_k}, amplitudes small enough
/// to keep J close to the identity; drawn from the seed.
inline AnalyticMap trig_map(int n, std::uint64_t seed, int terms = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.02, 0.05), freq(1.0, 3.0), phase(0.0, 2 * std::numbers::pi);
  std::uniform_int_distribution<int> axis(0, n - 1);
  struct Term {
    int axis;
    double a, phi;
    std::vector<double> w;
  };
  std::vector<Term> ts;
  for (int k = 0; k < terms; ++k) {
    Term t{axis(rng), amp(rng), phase(rng), std::vector<double>(n)};
    for (auto &w : t.w)
      w = freq(rng);
    ts.push_back(t);
  }
  AnalyticMap m;
  m.kind = "trig";
  m.forward = [ts](const Point &x) {
    Point y = x;
    for (const auto &t : ts) {
      double arg = t.phi;
      for (std::size_t a = 0; a < x.size(); ++a)
        arg += t.w[a] * x[a];
      y[t.axis] += t.a * std::sin(arg);
    }
    return y;
  };
  m.jacobian = [ts, n](const Point &x) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
    for (const auto &t : ts) {
      double arg = t.phi;
      for (int a = 0; a < n; ++a)
        arg += t.w[a] * x[a];
      for (int b = 0; b < n; ++b)
        J(t.axis, b) += t.a * std::cos(arg) * t.w[b];
    }
    return J;
  };
  m.inverse = detail::newton_inverse(m.forward, m.jacobian);
  return m;
}

/// Unit-sphere Christoffels in (theta, phi).
inline void sphere_christoffel(std::span<const double> x, std::span<double> o) {
  std::fill(o.begin(), o.end(), 0.0);
  const int n = 2;
  double th = x[0];
  o[(0 * n + 1) * n + 1] = -std::sin(th) * std::cos(th); // Gamma^theta_{phi phi}
  o[(1 * n + 1) * n + 0] = std::cos(th) / std::sin(th);  // Gamma^phi_{theta phi}
  o[(1 * n + 0) * n + 1] = std::cos(th) / std::sin(th);  // Gamma^phi_{phi theta}
}

/// Torsion-free connection with polynomial coefficients and nonzero curvature.
inline void polynomial_christoffel(std::span<const double> y, std::span<double> o) {
  std::fill(o.begin(), o.end(), 0.0);
  const int n = 2;
  auto set = [&](int mu, int rho, int nu, double v) {
    o[(mu * n + nu) * n + rho] = v;
    o[(mu * n + rho) * n + nu] = v;
  };
  set(0, 0, 0, 0.2 * y[1]);
  set(0, 0, 1, 0.1 * y[0]);
  set(1, 0, 0, 0.1 * (y[0] - y[1]));
  set(1, 1, 1, 0.15 * y[0] * y[1]);
}

struct ScenarioSpec {
  std::string name = "scenario";
  std::string hidden = "zero"; // zero | sphere | polynomial
  std::string map = "identity"; // identity | quadratic | rough
  double beta = 0.6;
  double amplitude = 0.3;
  std::vector<Interval> bounds{{0.0, 1.0}, {0.0, 1.0}};
  int resolution = 65;
  double p = 4.0;
  std::vector<double> eps{0.125, 0.0625, 0.03125};
  std::vector<int> grids{33, 65, 129};
  double t0 = 0.0;
  Point x0{0.2, 0.6};
  Point v0{0.5, 0.25};
  double interval = 1.0;
  double dt = 0.0; // 0 selects the default step
  std::uint64_t seed = 1;
};

inline AnalyticMap scenario_map(const ScenarioSpec &s) {
  const int n = static_cast<int>(s.bounds.size());
  if (s.map == "identity")
    return identity_map(n);
  if (s.map == "quadratic") {
    if (n != 2)
      throw ConfigError("quadratic map is two-dimensional");
    return quadratic_map();
  }
  if (s.map == "rough")
    return rough_map(s.amplitude, s.beta);
  throw ConfigError("unknown map '" + s.map + "' (identity, quadratic, rough)");
}

inline ConnectionSource::Eval hidden_connection(const ScenarioSpec &s) {
  if (s.hidden == "zero")
    return [](std::span<const double>, std::span<double> o) { std::fill(o.begin(), o.end(), 0.0); };
  if (s.hidden == "sphere") {
    if (s.bounds.size() != 2)
      throw ConfigError("sphere connection is two-dimensional");
    return sphere_christoffel;
  }
  if (s.hidden == "polynomial") {
    if (s.bounds.size() != 2)
      throw ConfigError("polynomial connection is two-dimensional");
    return polynomial_christoffel;
  }
  throw ConfigError("unknown hidden connection '" + s.hidden + "' (zero, sphere, polynomial)");
}

/// Ground truth the checker may read and the pipeline may not.
struct HiddenTruth {
  ConnectionField gamma_y;
  TransformBundle bundle; // x -> y
  AnalyticMap map;
  Curve reference_y;
  Curve reference_x;
};

struct Scenario {
  ScenarioSpec spec;
  ConnectionField gamma_x;
  GeodesicProblem problem; // in x-coordinates, source = grid Gamma_x
  HiddenTruth hidden;

  const Chart &chart() const { return gamma_x.chart(); }
  OdeOptions ode() const {
    OdeOptions o;
    o.dt = spec.dt;
    return o;
  }
};

/// Bounding box of the map's image of the x-chart, as a chart of the same resolution.
inline Chart image_chart(const GridField &ysamples) {
  const Chart &c = ysamples.chart();
  const int n = c.dim();
  std::vector<Interval> b(n, {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
  for (std::size_t k = 0; k < c.point_count(); ++k)
    for (int a = 0; a < n; ++a) {
      b[a].lo = std::min(b[a].lo, ysamples.at(k, a));
      b[a].hi = std::max(b[a].hi, ysamples.at(k, a));
    }
  return Chart(b, c.resolution());
}

/// Samples the map, pushes the hidden Gamma_y to Gamma_x by the connection law,
/// and solves the reference geodesic in y before mapping it back.
inline Scenario generate_scenario(const ScenarioSpec &spec) {
  const int n = static_cast<int>(spec.bounds.size());
  if (n < 2)
    throw ConfigError("scenario charts need at least two dimensions");
  if (static_cast<int>(spec.x0.size()) != n || static_cast<int>(spec.v0.size()) != n)
    throw ConfigError("x0 and v0 need one entry per axis");
  Scenario s;
  s.spec = spec;
  Chart cx(spec.bounds, std::vector<int>(n, spec.resolution));
  AnalyticMap map = scenario_map(spec);
  GridField ysamples = sample_field(
      cx,
      [&](std::span<const double> x, std::span<double> o) {
        Point y = map.forward(Point(x.begin(), x.end()));
        std::copy(y.begin(), y.end(), o.begin());
      },
      vector_shape(n));
  Chart cy = image_chart(ysamples);
  auto hidden = hidden_connection(spec);
  s.hidden.map = map;
  s.hidden.gamma_y = ConnectionField(sample_field(cy, hidden, connection_shape(n)));
  try {
    s.hidden.bundle = make_bundle(ysamples, cy, spec.x0);
  } catch (const Error &e) {
    throw ConfigError(std::string("scenario map is not invertible: ") + e.what());
  }
  s.gamma_x = transform_connection(s.hidden.gamma_y, s.hidden.bundle);
  for (double v : s.gamma_x.form().values())
    if (!std::isfinite(v))
      throw SamplingError("generated connection has non-finite samples");
  s.problem = {ConnectionSource::grid(s.gamma_x), spec.t0, spec.x0, spec.v0, spec.interval, std::nullopt};

  // reference: classical solve on the closed-form Gamma_y, mapped back in closed form
  GeodesicProblem py{ConnectionSource::analytic(cy, hidden), spec.t0, map.forward(spec.x0), {}, spec.interval,
                     std::nullopt};
  Eigen::VectorXd w = map.jacobian(spec.x0) * Eigen::Map<const Eigen::VectorXd>(spec.v0.data(), n);
  py.v0 = Point(w.data(), w.data() + n);
  OdeOptions o = s.ode();
  if (!(o.dt > 0.0))
    o.dt = default_dt(cx);
  s.hidden.reference_y = solve_geodesic(py, OdeMethod::RK4, o);
  s.hidden.reference_x = map_curve(
      s.hidden.reference_y, [&](const Point &y) { return map.inverse(y); },
      [&](const Point &, const Point &x) { return map.jacobian(x).inverse().eval(); });
  return s;
}

} // namespace rtgeo
