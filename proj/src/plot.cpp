#include "npred/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "npred/errors.hpp"
#include "npred/trajectory_log.hpp"

namespace npred {

namespace {

constexpr double kWidth = 720.0;
constexpr double kPanelHeight = 220.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 30.0;
constexpr double kMarginBottom = 40.0;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

struct Range {
  double lo = INFINITY, hi = -INFINITY;
  void add(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void pad() {
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

bool has_points(const std::vector<Panel>& panels) {
  for (const auto& p : panels)
    for (const auto& s : p.series)
      if (!s.x.empty()) return true;
  return false;
}

}  // namespace

std::string render_svg(const std::vector<Panel>& panels) {
  if (!has_points(panels)) throw ConfigError("plot: nothing to draw");
  const double height = kPanelHeight * static_cast<double>(panels.size());
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(kWidth) << "\" height=\""
     << fixed(height) << "\" viewBox=\"0 0 " << fixed(kWidth) << ' ' << fixed(height) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double top = kPanelHeight * static_cast<double>(p);
    double x0 = kMarginLeft, x1 = kWidth - kMarginRight;
    double y0 = top + kMarginTop, y1 = top + kPanelHeight - kMarginBottom;
    Range xr, yr;
    for (const auto& s : panel.series) {
      for (double v : s.x) xr.add(v);
      for (double v : s.y) yr.add(v);
    }
    xr.pad();
    yr.pad();
    if (panel.equal_aspect) {
      const double sx = (x1 - x0) / (xr.hi - xr.lo), sy = (y1 - y0) / (yr.hi - yr.lo);
      const double s = std::min(sx, sy);
      const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
      x0 = cx - 0.5 * s * (xr.hi - xr.lo);
      x1 = cx + 0.5 * s * (xr.hi - xr.lo);
      y0 = cy - 0.5 * s * (yr.hi - yr.lo);
      y1 = cy + 0.5 * s * (yr.hi - yr.lo);
    }
    auto px = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * (x1 - x0); };
    auto py = [&](double v) { return y1 - (v - yr.lo) / (yr.hi - yr.lo) * (y1 - y0); };

    os << "<g class=\"panel\">\n";
    os << "<text x=\"" << fixed(kMarginLeft) << "\" y=\"" << fixed(top + 18.0) << "\" font-size=\"13\">"
       << escape(panel.title) << "</text>\n";
    os << "<rect x=\"" << fixed(x0) << "\" y=\"" << fixed(y0) << "\" width=\"" << fixed(x1 - x0)
       << "\" height=\"" << fixed(y1 - y0) << "\" fill=\"none\" stroke=\"#888\"/>\n";
    os << "<text x=\"" << fixed(0.5 * (x0 + x1)) << "\" y=\"" << fixed(top + kPanelHeight - 8.0)
       << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(panel.x_label) << "</text>\n";
    os << "<text x=\"12\" y=\"" << fixed(0.5 * (y0 + y1)) << "\" font-size=\"11\">" << escape(panel.y_label)
       << "</text>\n";
    for (double v : {xr.lo, xr.hi}) {
      os << "<text x=\"" << fixed(px(v)) << "\" y=\"" << fixed(y1 + 14.0)
         << "\" font-size=\"10\" text-anchor=\"middle\">" << fixed(v) << "</text>\n";
    }
    for (double v : {yr.lo, yr.hi}) {
      os << "<text x=\"" << fixed(x0 - 4.0) << "\" y=\"" << fixed(py(v) + 3.0)
         << "\" font-size=\"10\" text-anchor=\"end\">" << fixed(v) << "</text>\n";
    }
    for (std::size_t s = 0; s < panel.series.size(); ++s) {
      const Series& ser = panel.series[s];
      const char* color = kColors[s % std::size(kColors)];
      os << "<polyline class=\"series\" data-name=\"" << escape(ser.name) << "\" fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"1.2\" points=\"";
      const std::size_t n = std::min(ser.x.size(), ser.y.size());
      for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(ser.x[k]) || !std::isfinite(ser.y[k])) continue;
        os << (k ? " " : "") << fixed(px(ser.x[k])) << ',' << fixed(py(ser.y[k]));
      }
      os << "\"/>\n";
      os << "<text x=\"" << fixed(x1 - 4.0) << "\" y=\"" << fixed(y0 + 14.0 + 13.0 * static_cast<double>(s))
         << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << color << "\">" << escape(ser.name) << "</text>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_csv(const std::vector<Panel>& panels) {
  if (!has_points(panels)) throw ConfigError("plot: nothing to draw");
  std::ostringstream os;
  os << "panel,series,x,y\n";
  for (const auto& panel : panels) {
    for (const auto& s : panel.series) {
      const std::size_t n = std::min(s.x.size(), s.y.size());
      for (std::size_t k = 0; k < n; ++k) {
        os << panel.title << ',' << s.name << ',' << format_double(s.x[k]) << ',' << format_double(s.y[k]) << '\n';
      }
    }
  }
  return os.str();
}

std::vector<Panel> wrench_panels(const std::vector<double>& t, const std::vector<Wrench>& truth,
                                 const std::vector<Wrench>& pred) {
  if (t.empty()) throw ConfigError("plot: empty log");
  if (truth.size() != t.size() || pred.size() != t.size()) {
    throw ConfigError("plot: time, measured and predicted series differ in length");
  }
  static const char* names[] = {"f_x", "f_y", "f_z", "tau_x", "tau_y", "tau_z"};
  std::vector<Panel> out(6);
  for (int i = 0; i < 6; ++i) {
    Panel& p = out[i];
    p.title = names[i];
    p.x_label = "t [s]";
    p.y_label = i < 3 ? "N" : "N m";
    Series a{"measured", t, {}}, b{"predicted", t, {}};
    for (std::size_t k = 0; k < t.size(); ++k) {
      a.y.push_back(truth[k].stacked()(i));
      b.y.push_back(pred[k].stacked()(i));
    }
    p.series = {std::move(a), std::move(b)};
  }
  return out;
}

Panel xy_panel(const std::vector<NamedPath>& paths, const NamedPath& reference) {
  Panel p;
  p.title = "xy";
  p.x_label = "x [m]";
  p.y_label = "y [m]";
  p.equal_aspect = true;
  bool any = false;
  auto add = [&](const NamedPath& path) {
    Series s{path.name, {}, {}};
    for (const auto& q : path.points) {
      s.x.push_back(q.x());
      s.y.push_back(q.y());
    }
    any = any || !s.x.empty();
    p.series.push_back(std::move(s));
  };
  for (const auto& path : paths) add(path);
  add(reference);
  if (!any) throw ConfigError("plot: empty log");
  return p;
}

void write_plot(const std::string& stem, const std::vector<Panel>& panels) {
  const std::string svg = render_svg(panels);
  const std::string csv = render_csv(panels);
  std::ofstream a(stem + ".svg", std::ios::binary), b(stem + ".csv", std::ios::binary);
  if (!a || !b) throw ConfigError("cannot write plot files at " + stem);
  a << svg;
  b << csv;
}

}  // namespace npred
