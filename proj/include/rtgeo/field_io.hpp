#pragma once

#include <rtgeo/chart.hpp>
#include <rtgeo/curve.hpp>

#include <charconv>
#include <fstream>
#include <regex>

namespace rtgeo {

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string &s, const std::string &context) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception &) {
    throw ConfigError(context + ": cannot parse number '" + s + "'");
  }
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
    ++pos;
  if (pos != s.size())
    throw ConfigError(context + ": cannot parse number '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep))
    out.push_back(cur);
  if (!s.empty() && s.back() == sep)
    out.emplace_back();
  return out;
}

} // namespace detail

/// `# chart n=<n> bounds=[lo,hi]x... res=<r>x... shape=<tag>`
inline std::string field_header(const GridField &f) {
  return "# chart " + f.chart().describe() + " shape=" + f.shape().tag();
}

/// One row per node: coordinates then components, 17 significant digits.
inline void write_field(std::ostream &os, const GridField &f) {
  os << field_header(f) << '\n';
  const Chart &c = f.chart();
  for (std::size_t node = 0; node < c.point_count(); ++node) {
    Point x = c.node_point(node);
    bool first = true;
    for (double v : x) {
      os << (first ? "" : ",") << detail::format_double(v);
      first = false;
    }
    for (double v : f.node_values(node))
      os << ',' << detail::format_double(v);
    os << '\n';
  }
}

inline void write_field(const std::string &path, const GridField &f) {
  std::ofstream os(path);
  if (!os)
    throw ConfigError("cannot open '" + path + "' for writing");
  write_field(os, f);
}

inline GridField read_field(std::istream &is, const std::string &name = "field") {
  std::string header;
  if (!std::getline(is, header))
    throw ConfigError(name + ": empty file");
  static const std::regex re(
      R"(^#\s*chart\s+n=(\d+)\s+bounds=(\S+)\s+res=(\S+)\s+shape=(\S+)\s*$)");
  std::smatch m;
  if (!std::regex_match(header, m, re))
    throw ConfigError(name + ": malformed header '" + header + "'");
  const int n = std::stoi(m[1]);
  std::vector<Interval> bounds;
  static const std::regex iv(R"(\[([^,\]]+),([^\]]+)\])");
  std::string bs = m[2];
  for (auto it = std::sregex_iterator(bs.begin(), bs.end(), iv); it != std::sregex_iterator(); ++it)
    bounds.push_back({detail::parse_double((*it)[1], name), detail::parse_double((*it)[2], name)});
  std::vector<int> res;
  for (const auto &r : detail::split(m[3], 'x'))
    res.push_back(static_cast<int>(detail::parse_double(r, name)));
  Chart c = make_chart(n, bounds, res);
  GridField f(c, Shape::parse(m[4]));
  const int nc = f.components();
  std::string line;
  std::size_t node = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    if (node >= c.point_count())
      throw ConfigError(name + ": more rows than grid nodes");
    auto cells = detail::split(line, ',');
    if (static_cast<int>(cells.size()) != n + nc)
      throw ConfigError(name + ": row " + std::to_string(node) + " has " +
                        std::to_string(cells.size()) + " columns, expected " +
                        std::to_string(n + nc));
    Point want = c.node_point(node);
    for (int a = 0; a < n; ++a) {
      double x = detail::parse_double(cells[a], name);
      if (std::abs(x - want[a]) > 1e-9 * (1.0 + std::abs(want[a])))
        throw ConfigError(name + ": row " + std::to_string(node) + " coordinates do not match the chart");
    }
    for (int q = 0; q < nc; ++q)
      f.at(node, q) = detail::parse_double(cells[n + q], name);
    ++node;
  }
  if (node != c.point_count())
    throw ConfigError(name + ": " + std::to_string(node) + " rows for " +
                      std::to_string(c.point_count()) + " grid nodes");
  return f;
}

inline GridField read_field(const std::string &path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open '" + path + "'");
  return read_field(is, path);
}

/// Columns t, gamma_1..gamma_n, v_1..v_n.
inline void write_curve(std::ostream &os, const Curve &c) {
  const int n = c.dim();
  os << 't';
  for (int k = 1; k <= n; ++k)
    os << ",gamma_" << k;
  for (int k = 1; k <= n; ++k)
    os << ",v_" << k;
  os << '\n';
  for (std::size_t i = 0; i < c.size(); ++i) {
    os << detail::format_double(c.t[i]);
    for (double x : c.x[i])
      os << ',' << detail::format_double(x);
    for (double v : c.v[i])
      os << ',' << detail::format_double(v);
    os << '\n';
  }
}

inline void write_curve(const std::string &path, const Curve &c) {
  std::ofstream os(path);
  if (!os)
    throw ConfigError("cannot open '" + path + "' for writing");
  write_curve(os, c);
}

inline Curve read_curve(std::istream &is) {
  std::string line;
  if (!std::getline(is, line))
    throw ConfigError("curve: empty input");
  const int cols = static_cast<int>(detail::split(line, ',').size());
  if (cols < 3 || cols % 2 == 0)
    throw ConfigError("curve: malformed header '" + line + "'");
  const int n = (cols - 1) / 2;
  Curve c;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    auto cells = detail::split(line, ',');
    if (static_cast<int>(cells.size()) != cols)
      throw ConfigError("curve: row with wrong column count");
    Point x(n), v(n);
    for (int k = 0; k < n; ++k) {
      x[k] = detail::parse_double(cells[1 + k], "curve");
      v[k] = detail::parse_double(cells[1 + n + k], "curve");
    }
    c.push(detail::parse_double(cells[0], "curve"), x, v);
  }
  return c;
}

} // namespace rtgeo
