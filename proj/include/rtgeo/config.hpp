#pragma once

#include <rtgeo/field_io.hpp>
#include <rtgeo/pipeline.hpp>
#include <rtgeo/scenario.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <numbers>
#include <set>

namespace rtgeo {

/// Which closed-form curve the pipeline output is compared against.
enum class ClosedForm { None, Parabola, GreatCircle };

/// Scenario-specific checks that enter the pass verdict.
struct CheckSelection {
  ClosedForm closed_form = ClosedForm::None;
  bool regularity_gain = false;  // W^{1,p} of Gamma_x grows under refinement, Gamma_y stays put
  bool cancellation = false;     // first RT residual stays small while delta Gamma_x grows
  bool gronwall = false;         // Gamma_x Lipschitz enough for the uniqueness check
  bool solver_cross_check = false;
  double pipeline_tolerance = 1e-2; // C^1 distance of the pipeline curve to the reference
  Point cross_check_x0{1.2, 0.1};    // off-equator start for the halving and Picard checks
  Point cross_check_v0{0.3, 0.8};
};

struct ExperimentConfig {
  ScenarioSpec scenario;
  RTConfig rt;
  PipelineMode mode = PipelineMode::Existence;
  int knot_cells = 1;
  double window_fraction = 0.25;
  double delta0 = 1e-6;
  CheckSelection checks;
};

namespace detail {

// A number, or a multiple/fraction of pi such as `pi/4`, `3pi/4`, `-0.5*pi`.
inline double parse_scalar(const std::string &raw, const std::string &key) {
  std::string s;
  for (char ch : raw)
    if (!std::isspace(static_cast<unsigned char>(ch)))
      s += ch;
  static const std::regex pi(R"(^([+-]?[0-9.eE+-]*?)\*?pi(/([0-9.eE+-]+))?$)");
  std::smatch m;
  if (std::regex_match(s, m, pi)) {
    double a = 1.0;
    std::string lead = m[1];
    if (lead == "-")
      a = -1.0;
    else if (!lead.empty() && lead != "+")
      a = parse_double(lead, key);
    double b = m[3].matched ? parse_double(m[3], key) : 1.0;
    return a * std::numbers::pi / b;
  }
  return parse_double(s, key);
}

inline std::vector<double> parse_list(const std::string &s, const std::string &key) {
  std::vector<double> out;
  for (const auto &cell : split(s, ','))
    out.push_back(parse_scalar(cell, key));
  if (out.empty())
    throw ConfigError(key + ": empty list");
  return out;
}

inline int parse_int(const std::string &s, const std::string &key) {
  double v = parse_scalar(s, key);
  if (v != std::floor(v) || std::abs(v) > 1e9)
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

inline bool parse_bool(const std::string &s, const std::string &key) {
  if (s == "true" || s == "1" || s == "yes")
    return true;
  if (s == "false" || s == "0" || s == "no")
    return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

} // namespace detail

/// Parses the INI experiment description. Unknown sections or keys are errors.
inline ExperimentConfig parse_config(std::istream &is, const std::string &name = "config") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error &e) {
    throw ConfigError(name + ": " + e.message() + " at line " + std::to_string(e.line()));
  }
  static const std::map<std::string, std::set<std::string>> known = {
      {"scenario", {"name", "hidden", "map", "beta", "amplitude", "seed"}},
      {"chart", {"lo", "hi", "resolution"}},
      {"problem", {"t0", "x0", "v0", "interval", "dt"}},
      {"analysis", {"p", "eps", "grids", "mode", "knot_cells", "window_fraction", "delta0"}},
      {"rt",
       {"max_iterations", "elliptic_tolerance", "fixed_point_tolerance", "damping", "determinant_bound",
        "retry_subchart"}},
      {"checks",
       {"closed_form", "regularity_gain", "cancellation", "gronwall", "solver_cross_check",
        "pipeline_tolerance", "cross_check_x0", "cross_check_v0"}}};
  for (const auto &[section, body] : tree) {
    auto it = known.find(section);
    if (it == known.end())
      throw ConfigError(name + ": unknown section [" + section + "]");
    for (const auto &[key, v] : body)
      if (!it->second.count(key))
        throw ConfigError(name + ": unknown key '" + key + "' in [" + section + "]");
  }
  auto get = [&](const std::string &path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(path))
      return *v;
    return std::nullopt;
  };

  ExperimentConfig cfg;
  ScenarioSpec &s = cfg.scenario;
  if (auto v = get("scenario.name"))
    s.name = *v;
  if (auto v = get("scenario.hidden"))
    s.hidden = *v;
  if (auto v = get("scenario.map"))
    s.map = *v;
  if (auto v = get("scenario.beta"))
    s.beta = detail::parse_scalar(*v, "beta");
  if (auto v = get("scenario.amplitude"))
    s.amplitude = detail::parse_scalar(*v, "amplitude");
  if (auto v = get("scenario.seed"))
    s.seed = static_cast<std::uint64_t>(detail::parse_int(*v, "seed"));

  auto lo = get("chart.lo"), hi = get("chart.hi");
  if (lo.has_value() != hi.has_value())
    throw ConfigError(name + ": [chart] needs both lo and hi");
  if (lo) {
    auto l = detail::parse_list(*lo, "lo"), h = detail::parse_list(*hi, "hi");
    if (l.size() != h.size())
      throw ConfigError(name + ": lo and hi differ in length");
    s.bounds.clear();
    for (std::size_t a = 0; a < l.size(); ++a) {
      if (!(h[a] > l[a]))
        throw ConfigError(name + ": empty interval on axis " + std::to_string(a));
      s.bounds.push_back({l[a], h[a]});
    }
  }
  if (auto v = get("chart.resolution"))
    s.resolution = detail::parse_int(*v, "resolution");

  if (auto v = get("problem.t0"))
    s.t0 = detail::parse_scalar(*v, "t0");
  if (auto v = get("problem.x0"))
    s.x0 = detail::parse_list(*v, "x0");
  if (auto v = get("problem.v0"))
    s.v0 = detail::parse_list(*v, "v0");
  if (auto v = get("problem.interval"))
    s.interval = detail::parse_scalar(*v, "interval");
  if (auto v = get("problem.dt"))
    s.dt = detail::parse_scalar(*v, "dt");

  if (auto v = get("analysis.p"))
    s.p = detail::parse_scalar(*v, "p");
  if (auto v = get("analysis.eps"))
    s.eps = detail::parse_list(*v, "eps");
  if (auto v = get("analysis.grids")) {
    s.grids.clear();
    for (double g : detail::parse_list(*v, "grids"))
      s.grids.push_back(detail::parse_int(std::to_string(g), "grids"));
  }
  if (auto v = get("analysis.mode")) {
    if (*v == "existence")
      cfg.mode = PipelineMode::Existence;
    else if (*v == "uniqueness")
      cfg.mode = PipelineMode::Uniqueness;
    else
      throw ConfigError(name + ": mode must be existence or uniqueness");
  }
  if (auto v = get("analysis.knot_cells"))
    cfg.knot_cells = detail::parse_int(*v, "knot_cells");
  if (auto v = get("analysis.window_fraction"))
    cfg.window_fraction = detail::parse_scalar(*v, "window_fraction");
  if (auto v = get("analysis.delta0"))
    cfg.delta0 = detail::parse_scalar(*v, "delta0");

  if (auto v = get("rt.max_iterations"))
    cfg.rt.max_iterations = detail::parse_int(*v, "max_iterations");
  if (auto v = get("rt.elliptic_tolerance"))
    cfg.rt.elliptic_tolerance = detail::parse_scalar(*v, "elliptic_tolerance");
  if (auto v = get("rt.fixed_point_tolerance"))
    cfg.rt.fixed_point_tolerance = detail::parse_scalar(*v, "fixed_point_tolerance");
  if (auto v = get("rt.damping"))
    cfg.rt.damping = detail::parse_scalar(*v, "damping");
  if (auto v = get("rt.determinant_bound"))
    cfg.rt.determinant_bound = detail::parse_scalar(*v, "determinant_bound");
  if (auto v = get("rt.retry_subchart"))
    cfg.rt.retry_subchart = detail::parse_bool(*v, "retry_subchart");
  cfg.rt.p = s.p;

  if (auto v = get("checks.closed_form")) {
    if (*v == "none")
      cfg.checks.closed_form = ClosedForm::None;
    else if (*v == "parabola")
      cfg.checks.closed_form = ClosedForm::Parabola;
    else if (*v == "great_circle")
      cfg.checks.closed_form = ClosedForm::GreatCircle;
    else
      throw ConfigError(name + ": closed_form must be none, parabola or great_circle");
  }
  if (auto v = get("checks.regularity_gain"))
    cfg.checks.regularity_gain = detail::parse_bool(*v, "regularity_gain");
  if (auto v = get("checks.cancellation"))
    cfg.checks.cancellation = detail::parse_bool(*v, "cancellation");
  if (auto v = get("checks.gronwall"))
    cfg.checks.gronwall = detail::parse_bool(*v, "gronwall");
  if (auto v = get("checks.solver_cross_check"))
    cfg.checks.solver_cross_check = detail::parse_bool(*v, "solver_cross_check");
  if (auto v = get("checks.pipeline_tolerance"))
    cfg.checks.pipeline_tolerance = detail::parse_scalar(*v, "pipeline_tolerance");
  if (auto v = get("checks.cross_check_x0"))
    cfg.checks.cross_check_x0 = detail::parse_list(*v, "cross_check_x0");
  if (auto v = get("checks.cross_check_v0"))
    cfg.checks.cross_check_v0 = detail::parse_list(*v, "cross_check_v0");

  // validation
  const int n = static_cast<int>(s.bounds.size());
  if (n < 2)
    throw ConfigError(name + ": charts need at least two axes");
  if (s.resolution < 8)
    throw ConfigError(name + ": resolution must be at least 8");
  if (static_cast<int>(s.x0.size()) != n || static_cast<int>(s.v0.size()) != n)
    throw ConfigError(name + ": x0 and v0 need one entry per axis");
  if (!(s.p > n))
    throw ConfigError(name + ": p must exceed the dimension");
  for (double e : s.eps)
    if (!(e > 0.0))
      throw ConfigError(name + ": eps entries must be positive");
  for (int g : s.grids)
    if (g < 8)
      throw ConfigError(name + ": grids must have at least 8 nodes per axis");
  if (!(cfg.rt.damping > 0.0 && cfg.rt.damping <= 1.0))
    throw ConfigError(name + ": damping must lie in (0, 1]");
  if (cfg.rt.max_iterations < 1)
    throw ConfigError(name + ": max_iterations must be positive");
  if (cfg.knot_cells < 1)
    throw ConfigError(name + ": knot_cells must be positive");
  if (!(s.interval > 0.0))
    throw ConfigError(name + ": interval must be positive");
  return cfg;
}

inline ExperimentConfig load_config(const std::string &path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open config '" + path + "'");
  return parse_config(is, path);
}

} // namespace rtgeo
