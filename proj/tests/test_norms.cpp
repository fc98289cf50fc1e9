#include "test_util.hpp"

using namespace rtgeo;
using namespace rtgeo::test;

TEST(Norms, ConstantField) {
  GridField f = scalar_field(square(17), [](double, double) { return -2.5; });
  NormReport r = norm_report(f, 4.0, 0.5);
  EXPECT_NEAR(r.lp, 2.5, 1e-12);
  EXPECT_NEAR(r.c0, 2.5, 1e-15);
  EXPECT_NEAR(r.c0alpha, 2.5, 1e-15);
  EXPECT_NEAR(r.w1p, 2.5, 1e-12);
}

TEST(Norms, CoordinateFunctionLipschitz) {
  GridField f = scalar_field(square(33), [](double x, double) { return x; });
  NormReport r = norm_report(f, 4.0, 1.0);
  EXPECT_NEAR(r.c0, 1.0, 1e-15);
  EXPECT_NEAR(r.c0alpha, 2.0, 1e-12);
}

TEST(Norms, SquareRootHalfHolderQuotient) {
  // |sqrt a - sqrt b| / sqrt|a - b| <= 1, with equality when one end is 0
  GridField f = scalar_field(square(129), [](double x, double) { return std::sqrt(x); });
  NormReport r = norm_report(f, 4.0, 0.5);
  EXPECT_NEAR(r.c0alpha - r.c0, 1.0, 0.05);
  EXPECT_NEAR(r.pair_floor, 4.0 / 128, 1e-15);
}

TEST(Norms, InvalidExponentsAreRejected) {
  GridField f = scalar_field(square(9), [](double x, double) { return x; });
  EXPECT_THROW(norm_report(f, 2.0, 0.5), ConfigError);
  EXPECT_THROW(norm_report(f, 4.0, 0.0), ConfigError);
  EXPECT_THROW(norm_report(f, 4.0, 1.5), ConfigError);
  EXPECT_NO_THROW(norm_report(f, std::numeric_limits<double>::infinity(), 1.0));
}

TEST(Norms, OrderingsHold) {
  Chart c = make_chart(2, {{0.0, 2.0}, {0.0, 1.5}}, {33, 25});
  for (int seed = 0; seed < 5; ++seed) {
    GridField f = scalar_field(c, [seed](double x, double y) {
      return std::sin(3 * x + seed) * std::cos(5 * y * (1 + seed)) + 0.1 * seed;
    });
    for (double p : {3.0, 4.0, 8.0}) {
      NormReport r = norm_report(f, p, morrey_exponent(2, p));
      EXPECT_GE(r.lp, 0.0);
      EXPECT_GE(r.w1p, r.lp);
      EXPECT_GE(r.c0alpha, r.c0);
      EXPECT_LE(r.lp, r.c0 * std::pow(c.volume(), 1.0 / p) * (1 + 1e-12));
    }
  }
}

TEST(Norms, MollificationDoesNotIncreaseSobolevNormOfRoughField) {
  Chart c = square(129);
  GridField f = scalar_field(c, [](double x, double y) {
    return std::pow(std::abs(x - 0.5), 0.3) + std::sin(60 * x) * std::sin(50 * y) * 0.2;
  });
  GridField g = mollify(f, 1.0 / 16);
  NormOptions o;
  o.holder = false;
  EXPECT_LE(norm_report(g, 4.0, 0.5, o).w1p, norm_report(f, 4.0, 0.5, o).w1p);
}

TEST(Norms, JsonKeys) {
  nlohmann::json j = norm_report(scalar_field(square(9), [](double x, double) { return x; }), 4.0, 0.5);
  for (const char *k : {"p", "alpha", "lp", "w1p", "c0", "c0alpha", "pair_floor"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j.size(), 7u);
}
