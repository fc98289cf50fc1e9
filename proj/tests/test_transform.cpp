#include "test_util.hpp"

using namespace rtgeo;
using namespace rtgeo::test;

namespace {

GridField map_samples(const Chart &c, const AnalyticMap &m) {
  return sample_field(
      c,
      [&](std::span<const double> x, std::span<double> o) {
        Point y = m.forward(Point(x.begin(), x.end()));
        std::copy(y.begin(), y.end(), o.begin());
      },
      vector_shape(c.dim()));
}

TransformBundle analytic_bundle(const Chart &c, const AnalyticMap &m, const Point &q) {
  GridField y = map_samples(c, m);
  return make_bundle(y, image_chart(y), q);
}

GridField jacobian_of(const Chart &c, const AnalyticMap &m) {
  return sample_field(
      c,
      [&](std::span<const double> x, std::span<double> o) {
        Eigen::MatrixXd J = m.jacobian(Point(x.begin(), x.end()));
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            o[a * 2 + b] = J(a, b);
      },
      matrix_shape(2));
}

ConnectionField smooth_connection(const Chart &c) {
  return ConnectionField(sample_field(
      c,
      [](std::span<const double> x, std::span<double> o) {
        for (std::size_t k = 0; k < o.size(); ++k)
          o[k] = 0.2 * std::cos(0.5 * k + x[0] - 0.7 * x[1] * (1 + k % 2));
      },
      connection_shape(2)));
}

AnalyticMap linear_map() {
  AnalyticMap m;
  m.kind = "linear";
  m.forward = [](const Point &x) { return Point{2 * x[0] + 0.5 * x[1], -0.25 * x[0] + x[1]}; };
  m.jacobian = [](const Point &) {
    Eigen::MatrixXd A(2, 2);
    A << 2, 0.5, -0.25, 1;
    return A;
  };
  m.inverse = [](const Point &y) {
    Eigen::MatrixXd A(2, 2);
    A << 2, 0.5, -0.25, 1;
    Eigen::Vector2d x = A.inverse() * Eigen::Vector2d(y[0], y[1]);
    return Point{x[0], x[1]};
  };
  return m;
}

} // namespace

TEST(TransformConnection, IdentityMapKeepsConnection) {
  Chart c = square(17);
  ConnectionField gy = smooth_connection(c);
  TransformBundle b = analytic_bundle(c, identity_map(2), {0.5, 0.5});
  ConnectionField gx = transform_connection(gy, b);
  EXPECT_LT(max_abs(gx.form() - gy.form()), 1e-12);
}

TEST(TransformConnection, LinearMapOfZeroIsZero) {
  Chart c = square(17);
  TransformBundle b = analytic_bundle(c, linear_map(), {0.5, 0.5});
  ConnectionField gy(b.target());
  EXPECT_LT(max_abs(transform_connection(gy, b).form()), 1e-12);
}

TEST(TransformConnection, QuadraticMapOfZeroHasSingleComponent) {
  // J = [[1,0],[x1,1]], J^-1 dJ has only (Gamma_x)^2_{11} = 1
  Chart c = square(17);
  TransformBundle b = analytic_bundle(c, quadratic_map(), {0.5, 0.5});
  ConnectionField gx = transform_connection(ConnectionField(b.target()), b);
  for (std::size_t k = 0; k < c.point_count(); ++k)
    for (int mu = 0; mu < 2; ++mu)
      for (int rho = 0; rho < 2; ++rho)
        for (int nu = 0; nu < 2; ++nu)
          EXPECT_NEAR(gx.gamma(k, mu, rho, nu), mu == 1 && rho == 0 && nu == 0 ? 1.0 : 0.0, 1e-11);
}

TEST(TransformConnection, MapLeavingTargetIsDomainError) {
  Chart c = square(17);
  TransformBundle b = analytic_bundle(c, linear_map(), {0.5, 0.5});
  ConnectionField small(square(17, 0.0, 0.5));
  EXPECT_THROW(transform_connection(small, b), DomainError);
}

TEST(TransformConnection, InverseBundleUndoesTheTransformation) {
  // Gamma_y on a box inside the image, pushed to x and back
  std::vector<double> err;
  for (int res : {33, 65}) {
    Chart cx = make_chart(2, {{-1.0, 1.0}, {-1.0, 1.0}}, {res, res});
    Chart cy = make_chart(2, {{-0.5, 0.5}, {-0.25, 0.75}}, {res, res});
    GridField y = map_samples(cx, quadratic_map());
    TransformBundle b = make_bundle(y, cy, {0.0, 0.0});
    ConnectionField gy_big = smooth_connection(image_chart(y));
    ConnectionField gx = transform_connection(gy_big, b);
    ConnectionField back = transform_connection(gx, inverse_bundle(b));
    ConnectionField want = smooth_connection(cy);
    err.push_back(lp_norm(back.form() - want.form(), std::numeric_limits<double>::infinity(), inset(cy, 0.0, 2)));
  }
  EXPECT_LT(err[1], 1e-2);
  EXPECT_GT(err[0] / err[1], 2.5);
}

TEST(SplitTransform, IdentityJacobianLeavesConnection) {
  Chart c = square(17);
  ConnectionField gx = smooth_connection(c);
  SplitTransform s = split_transform(gx, identity_jacobian(c));
  EXPECT_EQ(max_abs(s.inhom), 0.0);
  EXPECT_EQ(s.tilde.form().values(), gx.form().values());
}

TEST(SplitTransform, FlatInDisguiseHasZeroTilde) {
  Chart c = square(17);
  JacobianField J(jacobian_of(c, quadratic_map()));
  ConnectionField gx = sample_connection(
      c, [](std::span<const double>, int mu, int rho, int nu) { return mu == 1 && rho == 0 && nu == 0 ? 1.0 : 0.0; });
  EXPECT_LT(max_abs(split_transform(gx, J).tilde.form()), 1e-12);
}

TEST(SplitTransform, ReassemblesExactly) {
  Chart c = square(17);
  JacobianField J(jacobian_of(c, trig_map(2, 3)));
  ConnectionField gx = smooth_connection(c);
  SplitTransform s = split_transform(gx, J);
  EXPECT_LT(max_abs(s.tilde.form() + s.inhom - gx.form()), 1e-15);
}

TEST(Identities, IdentityJacobianHasNoDefect) {
  Chart c = square(17);
  ConnectionField gx = smooth_connection(c);
  JacobianField I = identity_jacobian(c);
  EXPECT_LT(max_abs(coderivative_identity_defect(gx, gx, I)), 1e-13);
  EXPECT_LT(max_abs(dgamma_identity_defect(gx, gx, I)), 1e-13);
}

TEST(Identities, AffineJacobianIsExact) {
  Chart c = square(33);
  JacobianField J(jacobian_of(c, quadratic_map()));
  ConnectionField gt = smooth_connection(c);
  ConnectionField gx(gt.form() + product(J.inverse(), exterior_derivative(J.j())));
  EXPECT_LT(lp_norm(coderivative_identity_defect(gx, gt, J), 4.0), 1e-10);
  EXPECT_LT(lp_norm(dgamma_identity_defect(gx, gt, J), 4.0), 1e-10);
}

TEST(Identities, SmoothJacobianConvergesAtSecondOrder) {
  for (const AnalyticMap &m : {cubic_map(), trig_map(2, 1)}) {
    std::vector<double> co, dg, drop;
    for (int res : {33, 65, 129}) {
      Chart c = square(res);
      JacobianField J(jacobian_of(c, m));
      ConnectionField gt = smooth_connection(c);
      ConnectionField gx(gt.form() + product(J.inverse(), exterior_derivative(J.j())));
      co.push_back(lp_norm(coderivative_identity_defect(gx, gt, J), 4.0));
      dg.push_back(lp_norm(dgamma_identity_defect(gx, gt, J), 4.0));
      drop.push_back(lp_norm(dgamma_identity_defect(gx, gt, J, true), 4.0));
    }
    for (std::size_t i = 1; i < co.size(); ++i) {
      EXPECT_NEAR(co[i - 1] / co[i], 4.0, 1.0) << m.kind;
      EXPECT_NEAR(dg[i - 1] / dg[i], 4.0, 1.0) << m.kind;
    }
    // without the wedge term the defect is O(1) and does not shrink
    EXPECT_GT(drop.back(), 100 * dg.back()) << m.kind;
    EXPECT_GT(drop.back(), 0.5 * drop.front()) << m.kind;
  }
}

TEST(IntegrateJacobian, IdentityGivesIdentity) {
  Chart c = square(17);
  IntegrationResult r = integrate_jacobian(identity_jacobian(c), {0.0, 0.0}, {0.0, 0.0}, c);
  for (std::size_t k = 0; k < c.point_count(); ++k) {
    Point x = c.node_point(k);
    EXPECT_NEAR(r.map.forward().at(k, 0), x[0], 1e-14);
    EXPECT_NEAR(r.map.forward().at(k, 1), x[1], 1e-14);
  }
  EXPECT_LT(r.path_discrepancy, 1e-14);
}

TEST(IntegrateJacobian, RecoversQuadraticMap) {
  Chart c = square(33);
  JacobianField J(jacobian_of(c, quadratic_map()));
  Chart target = image_chart(map_samples(c, quadratic_map()));
  IntegrationResult r = integrate_jacobian(J, {0.0, 0.0}, {0.0, 0.0}, target);
  for (std::size_t k = 0; k < c.point_count(); ++k) {
    Point x = c.node_point(k);
    EXPECT_NEAR(r.map.forward().at(k, 0), x[0], 1e-12);
    EXPECT_NEAR(r.map.forward().at(k, 1), x[1] + 0.5 * x[0] * x[0], 1e-3);
  }
  // the Jacobian of the integrated map reproduces J
  EXPECT_LT(lp_norm(jacobian_samples(r.map.forward()) - J.j(), std::numeric_limits<double>::infinity()), 1e-2);
}

TEST(IntegrateJacobian, CurlIsNonIntegrable) {
  // J = [[1,0],[x2,1]]: the second row is not a gradient
  Chart c = square(17);
  GridField Js = sample_field(
      c,
      [](std::span<const double> x, std::span<double> o) {
        o[0] = 1;
        o[1] = 0;
        o[2] = x[1];
        o[3] = 1;
      },
      matrix_shape(2));
  EXPECT_THROW(integrate_jacobian(JacobianField(Js), {0.0, 0.0}, {0.0, 0.0}, c), NonIntegrableError);
}

TEST(InvertMap, IdentityAndQuadratic) {
  Chart c = square(33);
  InversionResult id = invert_map(map_samples(c, identity_map(2)), c);
  EXPECT_LT(max_abs(id.inverse - map_samples(c, identity_map(2))), 1e-12);
  EXPECT_DOUBLE_EQ(id.coverage, 1.0);

  Chart cx = make_chart(2, {{-1.0, 1.0}, {-1.0, 1.0}}, {33, 33});
  Chart cy = make_chart(2, {{-0.5, 0.5}, {-0.25, 0.75}}, {17, 17});
  GridField fwd = map_samples(cx, quadratic_map());
  InversionResult q = invert_map(fwd, cy);
  EXPECT_DOUBLE_EQ(q.coverage, 1.0);
  double worst = 0.0, round_trip = 0.0;
  for (std::size_t k = 0; k < cy.point_count(); ++k) {
    Point y = cy.node_point(k);
    auto x = q.inverse.node_values(k);
    // the sampled map is the multilinear interpolant, so compare with O(h^2) slack
    worst = std::max(worst, std::abs(x[0] - y[0]) + std::abs(x[1] - (y[1] - 0.5 * y[0] * y[0])));
    Point back = interpolate(fwd, Point(x.begin(), x.end()));
    round_trip = std::max(round_trip, std::abs(back[0] - y[0]) + std::abs(back[1] - y[1]));
  }
  EXPECT_LT(worst, 2e-3);
  EXPECT_LT(round_trip, 2e-12);
}

TEST(Curves, IdentityPushforwardIsSameCurve) {
  Chart c = square(17);
  TransformBundle b = analytic_bundle(c, identity_map(2), {0.5, 0.5});
  Curve s;
  for (int i = 0; i <= 10; ++i)
    s.push(0.1 * i, {0.1 + 0.05 * i, 0.3 + 0.02 * i}, {0.5, 0.2});
  Curve p = pushforward_curve(s, b);
  ASSERT_EQ(p.size(), s.size());
  ASSERT_FALSE(p.truncated);
  EXPECT_LT(c1_distance(p, s), 1e-12);
}

TEST(Curves, StraightLinePullsBackToParabola) {
  // in y: y(t) = y0 + w t; in x: x1 = y1, x2 = y2 - y1^2 / 2
  Chart cx = make_chart(2, {{-0.5, 1.5}, {-1.0, 1.5}}, {129, 129});
  GridField fwd = map_samples(cx, quadratic_map());
  Chart cy = make_chart(2, {{0.0, 1.0}, {0.0, 1.0}}, {65, 65});
  TransformBundle b = make_bundle(fwd, cy, {0.2, 0.6});
  const Point y0{0.2, 0.62}, w{0.5, 0.35};
  Curve line;
  for (int i = 0; i <= 64; ++i) {
    double t = i / 64.0;
    line.push(t, {y0[0] + w[0] * t, y0[1] + w[1] * t}, w);
  }
  Curve px = pullback_curve(line, b);
  ASSERT_EQ(px.size(), line.size());
  double pos = 0.0, vel = 0.0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    double y1 = line.x[i][0], y2 = line.x[i][1];
    pos = std::max(pos, std::abs(px.x[i][0] - y1) + std::abs(px.x[i][1] - (y2 - 0.5 * y1 * y1)));
    vel = std::max(vel, std::abs(px.v[i][0] - w[0]) + std::abs(px.v[i][1] - (w[1] - y1 * w[0])));
  }
  EXPECT_LT(pos, 1e-4);
  EXPECT_LT(vel, 1e-3);
  // chain rule: differences of mapped positions against mapped velocities
  double chain = 0.0;
  for (std::size_t i = 1; i + 1 < px.size(); ++i)
    for (int a = 0; a < 2; ++a) {
      double d = (px.x[i + 1][a] - px.x[i - 1][a]) / (px.t[i + 1] - px.t[i - 1]);
      chain = std::max(chain, std::abs(d - px.v[i][a]));
    }
  EXPECT_LT(chain, 1e-3);
}

TEST(Curves, LeavingTheChartTruncates) {
  Chart c = square(17);
  TransformBundle b = analytic_bundle(c, identity_map(2), {0.5, 0.5});
  Curve s;
  s.push(0.0, {0.5, 0.5}, {1, 0});
  s.push(1.0, {1.5, 0.5}, {1, 0});
  Curve p = pushforward_curve(s, b);
  EXPECT_TRUE(p.truncated);
  EXPECT_EQ(p.size(), 1u);
}

TEST(TransformForce, ZeroAndConstantForces) {
  Chart c = square(17, -1.0, 1.0);
  TransformBundle b = analytic_bundle(c, linear_map(), {0.0, 0.0});
  ForceField k0 = transform_force(zero_force(2), b, true);
  Point y{0.1, 0.2}, w{0.3, -0.4};
  for (double v : k0(0.0, y, w))
    EXPECT_EQ(v, 0.0);
  ForceField K;
  K.eval = [](double, std::span<const double>, std::span<const double>) { return Point{1.0, -2.0}; };
  Point ky = transform_force(K, b, true)(0.0, y, w);
  // A = [[2, 0.5], [-0.25, 1]]
  EXPECT_NEAR(ky[0], 2 * 1.0 + 0.5 * -2.0, 1e-12);
  EXPECT_NEAR(ky[1], -0.25 * 1.0 + 1 * -2.0, 1e-12);
}

TEST(TransformForce, PositionDependentForceThroughQuadraticMap) {
  // K_x(x, v) = (x2, x1 v1); with x = (y1, y2 - y1^2/2), v = J^-1 w:
  // K_y = J K_x = (x2, x1 x2 + x1 w1)
  Chart cx = make_chart(2, {{-1.0, 1.0}, {-1.0, 1.0}}, {65, 65});
  GridField fwd = map_samples(cx, quadratic_map());
  TransformBundle b = make_bundle(fwd, image_chart(fwd), {0.0, 0.0});
  ForceField K;
  K.eval = [](double, std::span<const double> x, std::span<const double> v) { return Point{x[1], x[0] * v[0]}; };
  K.continuity = ContinuityClass::Lipschitz;
  for (const Point &y : {Point{0.2, 0.1}, Point{-0.4, 0.3}, Point{0.6, -0.2}}) {
    Point w{0.7, -0.3};
    Point ky = transform_force(K, b, true)(0.0, y, w);
    double x1 = y[0], x2 = y[1] - 0.5 * y[0] * y[0];
    EXPECT_NEAR(ky[0], x2, 1e-3);
    EXPECT_NEAR(ky[1], x1 * x2 + x1 * w[0], 1e-3);
  }
  ForceField rough = transform_force(K, b, false, 0.4);
  EXPECT_EQ(rough.continuity, ContinuityClass::Holder);
  EXPECT_DOUBLE_EQ(rough.holder_exponent, 0.4);
  EXPECT_EQ(transform_force(K, b, true).continuity, ContinuityClass::Lipschitz);
}
