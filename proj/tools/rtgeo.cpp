#include <rtgeo/rtgeo.hpp>

#include <CLI11.hpp>

#include <future>
#include <iostream>
#include <mutex>

namespace {

using namespace rtgeo;

struct Globals {
  std::string out;
  int grid = 0;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

Point parse_point(const std::string &s, const std::string &what) { return detail::parse_list(s, what); }

// Resamples onto a uniform N-node grid over the same bounds when --grid is set.
GridField maybe_resample(const GridField &f, int grid) {
  if (grid <= 0)
    return f;
  Chart c = with_resolution(f.chart(), grid);
  return sample_field(
      c, [&](std::span<const double> x, std::span<double> o) { interpolate_into(f, x, o); }, f.shape());
}

ConnectionField read_connection(const std::string &path, int grid) {
  GridField f = maybe_resample(read_field(path), grid);
  if (!(f.shape() == connection_shape(f.dim())))
    throw ConfigError(path + ": expected a connection field (shape " + connection_shape(f.dim()).tag() + ")");
  return ConnectionField(std::move(f));
}

void emit(const Globals &g, const std::string &file, const std::function<void(std::ostream &)> &write) {
  if (g.out.empty()) {
    write(std::cout);
    return;
  }
  std::filesystem::create_directories(g.out);
  std::ofstream os(std::filesystem::path(g.out) / file);
  if (!os)
    throw ConfigError("cannot write '" + file + "' in '" + g.out + "'");
  write(os);
}

int cmd_run(const Globals &g, const std::vector<std::string> &configs, int jobs) {
  std::vector<ExperimentConfig> cfgs;
  for (const auto &path : configs) {
    ExperimentConfig c = load_config(path);
    if (g.grid > 0)
      c.scenario.resolution = g.grid;
    if (g.seed)
      c.scenario.seed = *g.seed;
    validate_checks(c);
    cfgs.push_back(std::move(c));
  }
  std::mutex io;
  auto one = [&](const ExperimentConfig &c) {
    RunOptions ro;
    if (!g.quiet)
      ro.log = [&io, name = c.scenario.name](const std::string &line) {
        std::lock_guard<std::mutex> lock(io);
        std::cerr << "[" << name << "] " << line << std::endl;
      };
    ExperimentRun r = run_experiment(c, ro);
    if (!g.out.empty())
      write_artifacts(r, std::filesystem::path(g.out) / c.scenario.name);
    return r;
  };
  std::vector<ExperimentRun> runs;
  if (jobs <= 1) {
    for (const auto &c : cfgs)
      runs.push_back(one(c));
  } else {
    std::vector<std::future<ExperimentRun>> futs;
    for (const auto &c : cfgs)
      futs.push_back(std::async(std::launch::async, one, std::cref(c)));
    for (auto &f : futs)
      runs.push_back(f.get());
  }
  int code = kExitPass;
  nlohmann::json summary = nlohmann::json::array();
  for (const auto &r : runs) {
    summary.push_back({{"scenario", r.config.scenario.name},
                       {"pass", r.pass},
                       {"checks", r.report["verdict"]["checks"]},
                       {"failed_stage", r.failed_stage},
                       {"seconds", r.report["timings"]["total"]}});
    if (r.exit_code != kExitPass)
      code = kExitStageFailure;
  }
  if (runs.size() == 1 && g.out.empty())
    std::cout << runs.front().report.dump(2) << '\n';
  else
    std::cout << summary.dump(2) << '\n';
  return code;
}

int cmd_identities(const Globals &g, const std::string &path) {
  ExperimentConfig c = load_config(path);
  std::uint64_t seed = g.seed.value_or(c.scenario.seed);
  IdentityStudy s = identity_study(identity_maps(seed), c.scenario.grids, kIdentityExponent);
  emit(g, "identities.json", [&](std::ostream &os) { os << nlohmann::json(s).dump(2) << '\n'; });
  return s.pass ? kExitPass : kExitStageFailure;
}

int cmd_rt_solve(const Globals &g, const std::string &path, double p) {
  ConnectionField gx = read_connection(path, g.grid);
  RTConfig cfg;
  cfg.p = p;
  const Chart &c = gx.chart();
  Point q(c.dim());
  for (int a = 0; a < c.dim(); ++a)
    q[a] = 0.5 * (c.bounds()[a].lo + c.bounds()[a].hi);
  RegularizationPass r = regularize(gx, q, cfg, "rt");
  nlohmann::json j = r.rt;
  j["gamma_y"] = norm_report(r.gamma_y.form(), p, morrey_exponent(c.dim(), p));
  emit(g, "rt.json", [&](std::ostream &os) { os << j.dump(2) << '\n'; });
  if (!g.out.empty()) {
    emit(g, "J.csv", [&](std::ostream &os) { write_field(os, r.rt.J); });
    emit(g, "y.csv", [&](std::ostream &os) { write_field(os, r.bundle.map.forward()); });
    emit(g, "gamma_y.csv", [&](std::ostream &os) { write_field(os, r.gamma_y.form()); });
  }
  return kExitPass;
}

int cmd_geodesic(const Globals &g, const std::string &path, const std::string &x0, const std::string &v0,
                 double t0, const std::string &method, double interval, double dt) {
  ConnectionField gx = read_connection(path, g.grid);
  GeodesicProblem pb{ConnectionSource::grid(gx), t0, parse_point(x0, "x0"), parse_point(v0, "v0"), interval,
                     std::nullopt};
  if (static_cast<int>(pb.x0.size()) != gx.dim() || static_cast<int>(pb.v0.size()) != gx.dim())
    throw ConfigError("--x0 and --v0 need one entry per axis");
  OdeOptions o;
  o.dt = dt;
  Curve c = solve_geodesic(pb, parse_method(method), o);
  emit(g, "curve.csv", [&](std::ostream &os) { write_curve(os, c); });
  if (c.truncated && !g.quiet)
    std::cerr << "interval truncated: " << c.truncation << '\n';
  return kExitPass;
}

int cmd_norms(const Globals &g, const std::string &path, double p, double alpha) {
  GridField f = maybe_resample(read_field(path), g.grid);
  NormReport r = norm_report(f, p, alpha);
  emit(g, "norms.json", [&](std::ostream &os) { os << nlohmann::json(r).dump(2) << '\n'; });
  return kExitPass;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Regularity transformation experiments on affine connections"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--out", g.out, "Directory for reports, fields and curves");
  app.add_option("--grid", g.grid, "Override the grid resolution per axis")->check(CLI::Range(8, 4097));
  app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t &s) { g.seed = s; },
                                         "Override the scenario seed");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  std::vector<std::string> configs;
  int jobs = 1;
  auto *run = app.add_subcommand("run", "Run the full experiment on one or more configs");
  run->add_option("config", configs, "Config files")->required()->check(CLI::ExistingFile);
  run->add_option("--jobs", jobs, "Scenarios run concurrently")->check(CLI::PositiveNumber);

  std::string id_config;
  auto *ids = app.add_subcommand("check-identities", "Transformation identity suites");
  ids->add_option("config", id_config, "Config file")->required()->check(CLI::ExistingFile);

  std::string field;
  double p = 4.0;
  auto *rt = app.add_subcommand("rt-solve", "Solve the reduced RT system for a connection field");
  rt->add_option("field", field, "Connection field CSV")->required()->check(CLI::ExistingFile);
  rt->add_option("--p", p, "Lebesgue exponent");

  std::string x0 = "", v0 = "", method = "rk4";
  double t0 = 0.0, interval = 1.0, dt = 0.0;
  auto *geo = app.add_subcommand("geodesic", "Integrate a geodesic through a connection field");
  geo->add_option("field", field, "Connection field CSV")->required()->check(CLI::ExistingFile);
  geo->add_option("--x0", x0, "Initial position, comma separated")->required();
  geo->add_option("--v0", v0, "Initial velocity, comma separated")->required();
  geo->add_option("--t0", t0, "Initial time");
  geo->add_option("--method", method, "rk4 or picard");
  geo->add_option("--interval", interval, "Requested interval length (at most 1)");
  geo->add_option("--dt", dt, "Time step (default min(h, 1/256))");

  double np = 4.0, alpha = 0.5;
  auto *norms = app.add_subcommand("norms", "Lebesgue, Sobolev and Hoelder norms of a field");
  norms->add_option("field", field, "Field CSV")->required()->check(CLI::ExistingFile);
  norms->add_option("--p", np, "Lebesgue exponent");
  norms->add_option("--alpha", alpha, "Hoelder exponent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  try {
    if (*run)
      return cmd_run(g, configs, jobs);
    if (*ids)
      return cmd_identities(g, id_config);
    if (*rt)
      return cmd_rt_solve(g, field, p);
    if (*geo)
      return cmd_geodesic(g, field, x0, v0, t0, method, interval, dt);
    if (*norms)
      return cmd_norms(g, field, np, alpha);
  } catch (const ConfigError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const StageError &e) {
    std::cerr << "stage " << e.stage() << " failed: " << e.what() << '\n';
    return kExitStageFailure;
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStageFailure;
  }
  return kExitUsage;
}
