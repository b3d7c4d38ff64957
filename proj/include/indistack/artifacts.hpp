#pragma once

/// @file
/// @brief Output helpers: CSV number formatting, value-function grids,
/// SVG heatmaps and trajectory plots, and run manifests.

#include "common.hpp"
#include "tasks.hpp"
#include "value_net.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace indistack {

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v)
{
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// Fixed-precision text for SVG coordinates.
inline std::string format_fixed(double v, int digits = 3)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string hex64(std::uint64_t v)
{
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

/// Values of a planar value function on an n x n grid over [lo, hi]^2.
/// values(i, j) is taken at (xs(j), ys(i)).
struct ValueGrid
{
  Vector xs;
  Vector ys;
  Matrix values;
};

inline ValueGrid value_grid(const ValueFunction& value, double lo, double hi, int cells)
{
  if (cells < 2) throw ConfigError("value grid: at least 2 cells per axis are required");
  if (!(hi > lo)) throw ConfigError("value grid: empty range");
  if (value.input_dim() != 2) {
    throw ShapeError("value grid: expected a planar value function, got input dimension " +
                     std::to_string(value.input_dim()));
  }
  ValueGrid g;
  g.xs = Vector::LinSpaced(cells, lo, hi);
  g.ys = g.xs;
  Matrix states(2, static_cast<Eigen::Index>(cells) * cells);
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < cells; ++j) {
      states(0, i * cells + j) = g.xs(j);
      states(1, i * cells + j) = g.ys(i);
    }
  }
  RowVector v;
  value.evaluate(states, v, nullptr);
  g.values.resize(cells, cells);
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < cells; ++j) g.values(i, j) = v(i * cells + j);
  }
  return g;
}

namespace detail {

/// Piecewise-linear blue-green-yellow colormap for t in [0, 1].
inline std::string colormap(double t)
{
  static constexpr double stops[5][3] = {
    {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int k = std::min(3, static_cast<int>(t));
  const double f = t - k;
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(std::lround(stops[k][0] * (1 - f) + stops[k + 1][0] * f)),
                static_cast<int>(std::lround(stops[k][1] * (1 - f) + stops[k + 1][1] * f)),
                static_cast<int>(std::lround(stops[k][2] * (1 - f) + stops[k + 1][2] * f)));
  return buf;
}

struct Canvas
{
  double lo;
  double hi;
  double size;

  double px(double x) const { return (x - lo) / (hi - lo) * size; }
  double py(double y) const { return (hi - y) / (hi - lo) * size; }
};

inline void svg_regions(std::ostringstream& svg, const Canvas& c, const std::vector<Rect>& regions)
{
  for (const auto& r : regions) {
    svg << "<rect x=\"" << format_fixed(c.px(r.xmin)) << "\" y=\"" << format_fixed(c.py(r.ymax)) << "\" width=\""
        << format_fixed(c.px(r.xmax) - c.px(r.xmin)) << "\" height=\"" << format_fixed(c.py(r.ymin) - c.py(r.ymax))
        << "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
  }
}

} // namespace detail

/// Raster of the grid (high values bright) with region outlines.
inline std::string heatmap_svg(const ValueGrid& g, const std::vector<Rect>& regions, const std::string& title = "")
{
  const int n = static_cast<int>(g.xs.size());
  const double lo = g.xs(0);
  const double hi = g.xs(n - 1);
  const double step = (hi - lo) / (n - 1);
  const detail::Canvas c{lo - step / 2, hi + step / 2, 500.0};
  const double vmin = g.values.minCoeff();
  const double vmax = g.values.maxCoeff();
  const double span = vmax > vmin ? vmax - vmin : 1.0;
  const double cell = c.px(lo + step) - c.px(lo);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"530\" viewBox=\"0 0 500 530\">\n";
  if (!title.empty()) svg << "<title>" << title << "</title>\n";
  svg << "<g shape-rendering=\"crispEdges\">\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      svg << "<rect x=\"" << format_fixed(c.px(g.xs(j) - step / 2)) << "\" y=\"" << format_fixed(c.py(g.ys(i) + step / 2))
          << "\" width=\"" << format_fixed(cell + 0.05) << "\" height=\"" << format_fixed(cell + 0.05) << "\" fill=\""
          << detail::colormap((g.values(i, j) - vmin) / span) << "\"/>\n";
    }
  }
  svg << "</g>\n";
  detail::svg_regions(svg, c, regions);
  svg << "<text x=\"5\" y=\"520\" font-family=\"monospace\" font-size=\"12\">min " << format_fixed(vmin, 4) << "  max "
      << format_fixed(vmax, 4) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

/// Paths of every robot in every run over [lo, hi]^2. Each state stacks
/// planar robot positions.
inline std::string trajectory_svg(const std::vector<std::vector<Vector>>& runs, const std::vector<Rect>& regions,
                                  double lo, double hi, const std::vector<Vector>& markers = {})
{
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"};
  const detail::Canvas c{lo, hi, 500.0};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"500\" viewBox=\"0 0 500 500\">\n";
  svg << "<rect width=\"500\" height=\"500\" fill=\"white\"/>\n";
  detail::svg_regions(svg, c, regions);
  for (const auto& run : runs) {
    if (run.empty()) continue;
    const Eigen::Index robots = run.front().size() / 2;
    for (Eigen::Index r = 0; r < robots; ++r) {
      svg << "<polyline fill=\"none\" stroke=\"" << colors[r % 6] << "\" stroke-width=\"1.5\" points=\"";
      // Thin long runs to about 400 points per path.
      const std::size_t stride = std::max<std::size_t>(1, run.size() / 400);
      for (std::size_t k = 0; k < run.size(); k += stride) {
        svg << format_fixed(c.px(run[k](2 * r))) << "," << format_fixed(c.py(run[k](2 * r + 1))) << " ";
      }
      svg << format_fixed(c.px(run.back()(2 * r))) << "," << format_fixed(c.py(run.back()(2 * r + 1)));
      svg << "\"/>\n";
      svg << "<circle cx=\"" << format_fixed(c.px(run.front()(2 * r))) << "\" cy=\""
          << format_fixed(c.py(run.front()(2 * r + 1))) << "\" r=\"3\" fill=\"" << colors[r % 6] << "\"/>\n";
    }
  }
  for (const auto& m : markers) {
    svg << "<path d=\"M " << format_fixed(c.px(m(0)) - 5) << " " << format_fixed(c.py(m(1))) << " h 10 M "
        << format_fixed(c.px(m(0))) << " " << format_fixed(c.py(m(1)) - 5) << " v 10\" stroke=\"black\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

/// Provenance record written next to every artifact a command produces.
struct RunManifest
{
  std::string command;
  std::vector<std::string> arguments;
  std::string scenario_hash;
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json model_digests = nlohmann::json::object();
  std::string tool_version;
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;

  void add_model(const std::string& path) { model_digests[path] = hex64(fnv1a64(read_file(path))); }

  nlohmann::json to_json() const
  {
    return {{"command", command},       {"arguments", arguments},       {"scenario_hash", scenario_hash},
            {"seeds", seeds},           {"model_digests", model_digests}, {"tool_version", tool_version},
            {"wall_seconds", wall_seconds}, {"outputs", outputs}};
  }

  void write(const std::string& path) const { write_file(path, to_json().dump(2) + "\n"); }
};

} // namespace indistack
