#include "test_util.hpp"

#include <sstream>

using namespace rtgeo;
using namespace rtgeo::test;

namespace {

ExperimentConfig parse(const std::string &text) {
  std::istringstream is(text);
  return parse_config(is, "inline");
}

// A small flat-in-disguise run that exercises every stage in a few seconds.
ExperimentConfig small_flat() {
  ExperimentConfig c = load_config(source_path("configs/flat_disguise.cfg"));
  c.scenario.resolution = 33;
  c.scenario.grids = {33, 65};
  c.scenario.eps = {0.25, 0.125, 0.0625};
  return c;
}

nlohmann::json without_timings(nlohmann::json j) {
  j.erase("timings");
  return j;
}

} // namespace

TEST(Config, ShippedConfigsParse) {
  for (const char *name : {"flat_disguise.cfg", "sphere.cfg", "rough_beta06.cfg"}) {
    ExperimentConfig c = load_config(source_path(std::string("configs/") + name));
    EXPECT_NO_THROW(validate_checks(c)) << name;
    EXPECT_EQ(c.scenario.bounds.size(), 2u);
    EXPECT_DOUBLE_EQ(c.rt.p, c.scenario.p);
  }
  ExperimentConfig s = load_config(source_path("configs/sphere.cfg"));
  EXPECT_DOUBLE_EQ(s.scenario.bounds[0].lo, std::numbers::pi / 4);
  EXPECT_DOUBLE_EQ(s.scenario.bounds[0].hi, 3 * std::numbers::pi / 4);
  EXPECT_EQ(s.checks.closed_form, ClosedForm::GreatCircle);
  EXPECT_EQ(s.mode, PipelineMode::Uniqueness);
}

TEST(Config, ScalarsAcceptMultiplesOfPi) {
  EXPECT_DOUBLE_EQ(detail::parse_scalar("pi", "k"), std::numbers::pi);
  EXPECT_DOUBLE_EQ(detail::parse_scalar("-pi/2", "k"), -std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(detail::parse_scalar("3pi/4", "k"), 3 * std::numbers::pi / 4);
  EXPECT_DOUBLE_EQ(detail::parse_scalar("0.5*pi", "k"), std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(detail::parse_scalar(" 1e-3 ", "k"), 1e-3);
  EXPECT_THROW(detail::parse_scalar("tau", "k"), ConfigError);
  EXPECT_THROW(detail::parse_scalar("1.5x", "k"), ConfigError);
}

TEST(Config, DefaultsFromAnEmptyFile) {
  ExperimentConfig c = parse("");
  EXPECT_EQ(c.scenario.hidden, "zero");
  EXPECT_EQ(c.scenario.resolution, 65);
  EXPECT_EQ(c.mode, PipelineMode::Existence);
}

TEST(Config, UnknownSectionsAndKeysAreErrors) {
  EXPECT_THROW(parse("[nope]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse("[scenario]\ncolour = red\n"), ConfigError);
  EXPECT_THROW(load_config(source_path("tests/data/bad_key.cfg")), ConfigError);
  EXPECT_THROW(load_config(source_path("configs/missing.cfg")), ConfigError);
  try {
    parse("[rt]\nmax_iteration = 3\n");
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("max_iteration"), std::string::npos);
  }
}

TEST(Config, InvalidValuesAreErrors) {
  EXPECT_THROW(parse("[chart]\nlo = 0, 0\n"), ConfigError);
  EXPECT_THROW(parse("[chart]\nlo = 0, 0\nhi = 1\n"), ConfigError);
  EXPECT_THROW(parse("[chart]\nlo = 0, 1\nhi = 1, 1\n"), ConfigError);
  EXPECT_THROW(parse("[chart]\nresolution = 4\n"), ConfigError);
  EXPECT_THROW(parse("[chart]\nresolution = 33.5\n"), ConfigError);
  EXPECT_THROW(parse("[problem]\nx0 = 0.5\n"), ConfigError);
  EXPECT_THROW(parse("[analysis]\np = 2\n"), ConfigError);
  EXPECT_THROW(parse("[analysis]\neps = 0.1, -0.1\n"), ConfigError);
  EXPECT_THROW(parse("[analysis]\ngrids = 33, 4\n"), ConfigError);
  EXPECT_THROW(parse("[analysis]\nmode = maybe\n"), ConfigError);
  EXPECT_THROW(parse("[rt]\ndamping = 1.5\n"), ConfigError);
  EXPECT_THROW(parse("[rt]\nretry_subchart = perhaps\n"), ConfigError);
  EXPECT_THROW(parse("[checks]\nclosed_form = ellipse\n"), ConfigError);
  EXPECT_THROW(parse("[scenario\n"), ConfigError);
}

TEST(Config, CheckSelectionMustMatchTheScenario) {
  ExperimentConfig c = parse("[checks]\nclosed_form = parabola\n");
  EXPECT_THROW(validate_checks(c), ConfigError);
  c = parse("[checks]\nclosed_form = great_circle\n");
  EXPECT_THROW(validate_checks(c), ConfigError);
  c = parse("[checks]\nsolver_cross_check = true\n");
  EXPECT_THROW(validate_checks(c), ConfigError);
  c = parse("[analysis]\ngrids = 33\n");
  EXPECT_THROW(validate_checks(c), ConfigError);
  c = parse("[scenario]\nhidden = torus\n");
  EXPECT_THROW(generate_scenario(c.scenario), ConfigError);
}

TEST(IdentityStudy, ShippedSuitesPass) {
  IdentityStudy s = identity_study(identity_maps(1), {33, 65, 129}, kIdentityExponent);
  EXPECT_TRUE(s.pass);
  EXPECT_FALSE(s.suites.empty());
  nlohmann::json j = s;
  EXPECT_TRUE(j["pass"].get<bool>());
}

TEST(Experiment, SmallFlatRunPassesEveryCheck) {
  ExperimentRun r = run_experiment(small_flat());
  EXPECT_EQ(r.exit_code, kExitPass) << r.report["verdict"].dump();
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.failed_stage.empty());
  for (const char *k : {"scenario", "generate", "identities", "pipeline", "convergence", "uniform_bounds",
                        "cancellation", "regularity", "lemma_b1", "gronwall", "verdict", "timings"})
    EXPECT_TRUE(r.report.contains(k)) << k;
  EXPECT_TRUE(r.report["verdict"]["checks"]["closed_form"].get<bool>());
}

TEST(Experiment, ReportIsDeterministicApartFromTimings) {
  ExperimentRun a = run_experiment(small_flat());
  ExperimentRun b = run_experiment(small_flat());
  EXPECT_EQ(without_timings(a.report).dump(), without_timings(b.report).dump());
}

TEST(Experiment, PipelineNeverReadsTheHiddenTruth) {
  ExperimentConfig cfg = load_config(source_path("configs/rough_beta06.cfg"));
  cfg.scenario.resolution = 33;
  Scenario honest = generate_scenario(cfg.scenario);
  Scenario tampered = honest;
  for (auto &x : tampered.hidden.reference_x.x)
    x[0] += 0.05;
  tampered.hidden.gamma_y = ConnectionField(tampered.hidden.gamma_y.chart());
  PipelineOptions po;
  po.rt = cfg.rt;
  po.ode = honest.ode();
  PipelineResult a = weak_solution_pipeline(honest.gamma_x, honest.problem, cfg.mode, po);
  PipelineResult b = weak_solution_pipeline(tampered.gamma_x, tampered.problem, cfg.mode, po);
  EXPECT_EQ(c1_distance(a.curve_x, b.curve_x), 0.0);
  EXPECT_EQ(a.provenance.dump(), b.provenance.dump());
  const std::size_t m = honest.hidden.reference_x.size();
  const double tol = cfg.checks.pipeline_tolerance;
  EXPECT_LE(c1_distance(head(a.curve_x, m), honest.hidden.reference_x), tol);
  EXPECT_GT(c1_distance(head(b.curve_x, m), tampered.hidden.reference_x), tol);
}

TEST(Experiment, StageFailureGivesExitOneAndNamesTheStage) {
  ExperimentConfig c = small_flat();
  c.scenario.name = "broken";
  c.scenario.hidden = "sphere";
  c.scenario.map = "rough";
  c.checks.closed_form = ClosedForm::None;
  c.rt.max_iterations = 1;
  c.rt.retry_subchart = false;
  ExperimentRun r = run_experiment(c);
  EXPECT_EQ(r.exit_code, kExitStageFailure);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.failed_stage, "pass1.rt");
  EXPECT_TRUE(r.report.contains("failure"));
  EXPECT_FALSE(r.report["verdict"]["pass"].get<bool>());
}

TEST(Experiment, InvalidCheckSelectionIsRejectedBeforeRunning) {
  ExperimentConfig c = small_flat();
  c.scenario.map = "identity";
  EXPECT_THROW(run_experiment(c), ConfigError);
}

TEST(Experiment, ArtifactsAreWritten) {
  ExperimentConfig c = small_flat();
  ExperimentRun r = run_experiment(c);
  const auto dir = std::filesystem::temp_directory_path() / "rtgeo_artifacts_test";
  std::filesystem::remove_all(dir);
  write_artifacts(r, dir);
  for (const char *f : {"report.json", "gamma_x.csv", "gamma_y.csv", "J.csv", "y.csv", "x_of_y.csv",
                        "curve_x.csv", "curve_y.csv", "curve_reference.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  GridField back = read_field((dir / "gamma_x.csv").string());
  EXPECT_EQ(max_abs(back - r.scenario->gamma_x.form()), 0.0);
  std::ifstream is(dir / "report.json");
  EXPECT_EQ(nlohmann::json::parse(is)["verdict"], r.report["verdict"]);
  std::filesystem::remove_all(dir);
}
