#include "test_util.hpp"

using namespace rtgeo;
using namespace rtgeo::test;

namespace {

constexpr double kPi = std::numbers::pi;

Chart sphere_chart(int res = 33) { return make_chart(2, {{0.3, kPi - 0.3}, {-1.0, 3.0}}, {res, res}); }

ConnectionSource sphere_source(int res = 33) { return ConnectionSource::analytic(sphere_chart(res), sphere_christoffel); }

// Gamma^1_{00} = 1: the flat plane seen through y1 = x1 + x0^2 / 2.
ConnectionSource flat_in_disguise_source(const Chart &c) {
  return ConnectionSource::analytic(c, [](std::span<const double>, std::span<double> o) {
    std::fill(o.begin(), o.end(), 0.0);
    o[(1 * 2 + 0) * 2 + 0] = 1.0;
  });
}

GeodesicProblem problem(ConnectionSource s, Point x0, Point v0, double interval = 1.0) {
  return {std::move(s), 0.0, std::move(x0), std::move(v0), interval, std::nullopt};
}

OdeOptions with_dt(double dt) {
  OdeOptions o;
  o.dt = dt;
  return o;
}

double dist(const Point &a, const Point &b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

std::array<double, 3> embed(const Point &x) {
  return {std::sin(x[0]) * std::cos(x[1]), std::sin(x[0]) * std::sin(x[1]), std::cos(x[0])};
}

std::array<double, 3> embed_velocity(const Point &x, const Point &v) {
  return {std::cos(x[0]) * std::cos(x[1]) * v[0] - std::sin(x[0]) * std::sin(x[1]) * v[1],
          std::cos(x[0]) * std::sin(x[1]) * v[0] + std::sin(x[0]) * std::cos(x[1]) * v[1],
          -std::sin(x[0]) * v[0]};
}

std::array<double, 3> cross(const std::array<double, 3> &a, const std::array<double, 3> &b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

const Point kSphereX0{1.2, 0.1};
const Point kSphereV0{0.3, 0.8};

} // namespace

TEST(Geodesic, ZeroConnectionGivesStraightLines) {
  GeodesicProblem pb = problem(zero_source(square(17)), {0.2, 0.3}, {0.4, 0.25});
  for (OdeMethod m : {OdeMethod::RK4, OdeMethod::Picard}) {
    Curve c = solve_geodesic(pb, m);
    EXPECT_FALSE(c.truncated);
    EXPECT_NEAR(c.length(), 1.0, 1e-12);
    for (std::size_t i = 0; i < c.size(); ++i) {
      double s = c.t[i];
      EXPECT_LT(dist(c.x[i], {0.2 + 0.4 * s, 0.3 + 0.25 * s}), 1e-13);
      EXPECT_LT(dist(c.v[i], {0.4, 0.25}), 1e-13);
    }
  }
}

TEST(Geodesic, DefaultStepIsGridSpacingCappedAt1Over256) {
  EXPECT_DOUBLE_EQ(default_dt(square(17)), 1.0 / 256);
  EXPECT_DOUBLE_EQ(default_dt(square(9)), 1.0 / 256);
  Curve c = solve_geodesic(problem(zero_source(square(17)), {0.5, 0.5}, {0.1, 0.1}), OdeMethod::RK4);
  EXPECT_DOUBLE_EQ(c.dt, 1.0 / 256);
  EXPECT_EQ(c.size(), 257u);
}

TEST(Geodesic, ConstantConnectionGivesTheParabola) {
  Chart c = square(17, -2.0, 2.0);
  const Point x0{-0.5, 0.2}, v0{0.7, 0.3};
  for (OdeMethod m : {OdeMethod::RK4, OdeMethod::Picard}) {
    Curve g = solve_geodesic(problem(flat_in_disguise_source(c), x0, v0), m);
    ASSERT_FALSE(g.truncated);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double s = g.t[i];
      EXPECT_LT(dist(g.x[i], {x0[0] + v0[0] * s, x0[1] + v0[1] * s - 0.5 * v0[0] * v0[0] * s * s}), 1e-12);
      EXPECT_LT(dist(g.v[i], {v0[0], v0[1] - v0[0] * v0[0] * s}), 1e-12);
    }
  }
}

TEST(Geodesic, SphereCurvesAreGreatCircles) {
  Curve c = solve_geodesic(problem(sphere_source(), kSphereX0, kSphereV0), OdeMethod::RK4);
  ASSERT_FALSE(c.truncated);
  const auto normal = cross(embed(kSphereX0), embed_velocity(kSphereX0, kSphereV0));
  const double speed2 = kSphereV0[0] * kSphereV0[0] + std::pow(std::sin(kSphereX0[0]) * kSphereV0[1], 2);
  const double momentum = std::pow(std::sin(kSphereX0[0]), 2) * kSphereV0[1];
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto X = embed(c.x[i]);
    EXPECT_NEAR(X[0] * normal[0] + X[1] * normal[1] + X[2] * normal[2], 0.0, 1e-10);
    const double th = c.x[i][0];
    EXPECT_NEAR(c.v[i][0] * c.v[i][0] + std::pow(std::sin(th) * c.v[i][1], 2), speed2, 1e-10);
    EXPECT_NEAR(std::pow(std::sin(th), 2) * c.v[i][1], momentum, 1e-10);
  }
}

TEST(Geodesic, EquatorIsTraversedAtConstantSpeed) {
  Curve c = solve_geodesic(problem(sphere_source(), {kPi / 2, 0.0}, {0.0, 1.0}), OdeMethod::RK4);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(c.x[i][0], kPi / 2, 1e-12);
    EXPECT_NEAR(c.x[i][1], c.t[i], 1e-12);
  }
}

TEST(Geodesic, RK4IsFourthOrder) {
  GeodesicProblem pb = problem(sphere_source(), kSphereX0, kSphereV0);
  Curve ref = solve_geodesic(pb, OdeMethod::RK4, with_dt(1.0 / 1024));
  auto end_error = [&](double dt) {
    Curve c = solve_geodesic(pb, OdeMethod::RK4, with_dt(dt));
    return dist(c.x.back(), ref.x.back()) + dist(c.v.back(), ref.v.back());
  };
  const double ratio = end_error(1.0 / 16) / end_error(1.0 / 32);
  EXPECT_GE(ratio, 12.0);
  EXPECT_LE(ratio, 20.0);
}

TEST(Geodesic, PicardAgreesWithRK4) {
  GeodesicProblem pb = problem(sphere_source(), kSphereX0, kSphereV0);
  Curve a = solve_geodesic(pb, OdeMethod::RK4);
  Curve b = solve_geodesic(pb, OdeMethod::Picard);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_GT(b.picard_iterations, 1);
  EXPECT_LT(c1_distance(a, b), 1e-4);
  // trapezoidal collocation is second order
  Curve b2 = solve_geodesic(pb, OdeMethod::Picard, with_dt(1.0 / 512));
  Curve a2 = solve_geodesic(pb, OdeMethod::RK4, with_dt(1.0 / 512));
  const double e1 = dist(a.x.back(), b.x.back()), e2 = dist(a2.x.back(), b2.x.back());
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e1 / e2, 4.5);
}

TEST(Geodesic, TimeReversalRetracesTheCurve) {
  ConnectionSource s = sphere_source();
  Curve fwd = solve_geodesic(problem(s, kSphereX0, kSphereV0), OdeMethod::RK4);
  Point vback = fwd.v.back();
  for (double &v : vback)
    v = -v;
  GeodesicProblem back{s, fwd.t1(), fwd.x.back(), vback, 1.0, std::nullopt};
  Curve bwd = solve_geodesic(back, OdeMethod::RK4);
  ASSERT_EQ(bwd.size(), fwd.size());
  EXPECT_LT(dist(bwd.x.back(), kSphereX0), 1e-10);
  EXPECT_LT(dist(bwd.v.back(), {-kSphereV0[0], -kSphereV0[1]}), 1e-10);
}

TEST(Geodesic, GridSourceConvergesToAnalyticSource) {
  GeodesicProblem exact = problem(sphere_source(), kSphereX0, kSphereV0);
  Curve ref = solve_geodesic(exact, OdeMethod::RK4);
  std::vector<double> err;
  for (int res : {33, 65, 129}) {
    Chart c = sphere_chart(res);
    ConnectionField g(sample_field(c, sphere_christoffel, connection_shape(2)));
    Curve cg = solve_geodesic(problem(ConnectionSource::grid(g), kSphereX0, kSphereV0), OdeMethod::RK4);
    err.push_back(c1_distance(cg, ref));
  }
  EXPECT_GT(err[0] / err[1], 3.0);
  EXPECT_GT(err[1] / err[2], 3.0);
}

TEST(ForcedGeodesic, ConstantForce) {
  GeodesicProblem pb = problem(zero_source(square(17, -2.0, 2.0)), {0.0, 0.0}, {0.3, -0.2});
  pb.force = ForceField{[](double, std::span<const double>, std::span<const double>) { return Point{0.5, -1.0}; }};
  for (OdeMethod m : {OdeMethod::RK4, OdeMethod::Picard}) {
    Curve c = solve_forced(pb, m);
    for (std::size_t i = 0; i < c.size(); ++i) {
      double s = c.t[i];
      EXPECT_LT(dist(c.x[i], {0.3 * s + 0.25 * s * s, -0.2 * s - 0.5 * s * s}), 1e-12);
    }
  }
}

TEST(ForcedGeodesic, LinearDrag) {
  const double k = 1.5;
  GeodesicProblem pb = problem(zero_source(square(17, -2.0, 2.0)), {0.0, 0.1}, {0.8, 0.4});
  pb.force = ForceField{[k](double, std::span<const double>, std::span<const double> v) {
    return Point{-k * v[0], -k * v[1]};
  }};
  Curve c = solve_forced(pb, OdeMethod::RK4);
  for (std::size_t i = 0; i < c.size(); ++i) {
    double e = std::exp(-k * c.t[i]);
    EXPECT_LT(dist(c.x[i], {0.8 * (1 - e) / k, 0.1 + 0.4 * (1 - e) / k}), 1e-10);
    EXPECT_LT(dist(c.v[i], {0.8 * e, 0.4 * e}), 1e-10);
  }
}

TEST(ForcedGeodesic, MissingForceIsRejected) {
  EXPECT_THROW(solve_forced(problem(zero_source(square(9)), {0.5, 0.5}, {0.1, 0.1}), OdeMethod::RK4),
               ConfigError);
}

TEST(Geodesic, TruncatesWhenLeavingTheChart) {
  GeodesicProblem pb = problem(zero_source(square(17)), {0.9, 0.5}, {0.5, 0.0});
  for (OdeMethod m : {OdeMethod::RK4, OdeMethod::Picard}) {
    Curve c = solve_geodesic(pb, m);
    EXPECT_TRUE(c.truncated);
    EXPECT_FALSE(c.truncation.empty());
    EXPECT_LT(c.length(), 0.2 + 1e-12);
    EXPECT_GT(c.length(), 0.2 - 2.0 / 256);
    EXPECT_TRUE(square(17).contains(c.x.back()));
  }
}

TEST(Geodesic, TruncatesWhenLeavingTheVelocityBall) {
  GeodesicProblem pb = problem(zero_source(square(17, -5.0, 5.0)), {0.0, 0.0}, {0.0, 0.0});
  pb.force = ForceField{[](double, std::span<const double>, std::span<const double>) { return Point{2.0, 0.0}; }};
  Curve c = solve_geodesic(pb, OdeMethod::RK4);
  EXPECT_TRUE(c.truncated);
  EXPECT_NEAR(c.length(), 0.5, 1.0 / 256);
  EXPECT_LE(dist(c.v.back(), pb.v0), 1.0);
}

TEST(Geodesic, IntervalIsCappedAtOne) {
  Curve c = solve_geodesic(problem(zero_source(square(17, -5.0, 5.0)), {0.0, 0.0}, {0.1, 0.0}, 2.0),
                           OdeMethod::RK4);
  EXPECT_TRUE(c.truncated);
  EXPECT_NEAR(c.length(), 1.0, 1e-12);
  Curve half = solve_geodesic(problem(zero_source(square(17)), {0.5, 0.5}, {0.1, 0.0}, 0.5), OdeMethod::RK4);
  EXPECT_FALSE(half.truncated);
  EXPECT_NEAR(half.length(), 0.5, 1e-12);
}

TEST(Geodesic, InvalidProblemsAreRejected) {
  ConnectionSource z = zero_source(square(9));
  EXPECT_THROW(solve_geodesic(problem(z, {0.5}, {0.1, 0.1}), OdeMethod::RK4), ShapeError);
  EXPECT_THROW(solve_geodesic(problem(z, {1.5, 0.5}, {0.1, 0.1}), OdeMethod::RK4), DomainError);
  EXPECT_THROW(solve_geodesic(problem(z, {0.0, 0.5}, {0.1, 0.1}), OdeMethod::RK4), DomainError);
  EXPECT_THROW(solve_geodesic(problem(z, {0.5, 0.5}, {NAN, 0.1}), OdeMethod::RK4), DomainError);
  EXPECT_THROW(solve_geodesic(problem(z, {0.5, 0.5}, {0.1, 0.1}, 0.0), OdeMethod::RK4), DomainError);
  EXPECT_THROW(parse_method("euler"), ConfigError);
  EXPECT_EQ(parse_method("picard"), OdeMethod::Picard);
}

TEST(UniformBound, UnitBallVolumes) {
  EXPECT_NEAR(unit_ball_volume(1), 2.0, 1e-14);
  EXPECT_NEAR(unit_ball_volume(2), kPi, 1e-14);
  EXPECT_NEAR(unit_ball_volume(3), 4 * kPi / 3, 1e-14);
}

TEST(UniformBound, HoelderNormOfALine) {
  // x(t) = (t, 0) on [0, 1]: sup 1 plus quotient sup t^{1 - alpha} = 1
  Curve c = solve_geodesic(problem(zero_source(square(17, -1.0, 2.0)), {1e-3, 0.5}, {1.0, 0.0}), OdeMethod::RK4,
                           with_dt(1.0 / 64));
  for (auto &x : c.x)
    x[1] = 0.0;
  EXPECT_NEAR(time_holder_norm(c, false, 0.5), 1.001 + 1.0, 1e-9);
  EXPECT_NEAR(time_holder_norm(c, true, 0.5), 1.0, 1e-12);
}

TEST(UniformBound, HoldsForSphereAndFlatGeodesics) {
  ConnectionSource s = sphere_source();
  Curve c = solve_geodesic(problem(s, kSphereX0, kSphereV0), OdeMethod::RK4);
  UniformBound b = uniform_bound_check(c, s.c0, 0.5);
  EXPECT_TRUE(b.holds);
  EXPECT_GT(b.lhs, 0.0);
  EXPECT_NEAR(b.rhs, kPi * s.c0 + kPi * kPi + dist(kSphereX0, {0, 0}) + dist(kSphereV0, {0, 0}), 1e-12);
  ConnectionSource f = flat_in_disguise_source(square(17, -2.0, 2.0));
  EXPECT_TRUE(uniform_bound_check(solve_geodesic(problem(f, {0.0, 0.0}, {0.7, 0.3}), OdeMethod::RK4), f.c0, 0.5).holds);
}

TEST(Gronwall, PerturbedCurvesStayInsideTheEnvelope) {
  GeodesicProblem pb = problem(sphere_source(), kSphereX0, kSphereV0);
  GronwallReport r = gronwall_uniqueness_check(pb, 1e-6);
  EXPECT_TRUE(r.holds);
  EXPECT_GT(r.max_separation, 0.0);
  EXPECT_LE(r.max_ratio, 1.0);
  EXPECT_GT(r.constant, 1.0);
}

TEST(Gronwall, IdenticalDataGiveIdenticalCurves) {
  GronwallReport r = gronwall_uniqueness_check(problem(sphere_source(), kSphereX0, kSphereV0), 0.0);
  EXPECT_TRUE(r.holds);
  EXPECT_LE(r.max_separation, 1e-8);
}

TEST(ConnectionSource, ConstantsOfClosedForms) {
  ConnectionSource z = zero_source(square(9));
  EXPECT_EQ(z.c0, 0.0);
  EXPECT_EQ(z.lipschitz, 0.0);
  ConnectionSource f = flat_in_disguise_source(square(9));
  EXPECT_DOUBLE_EQ(f.c0, 1.0);
  EXPECT_LT(f.lipschitz, 1e-12);
}
