#pragma once

#include <string>
#include <vector>

#include "npred/types.hpp"

namespace npred {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// One panel of line series sharing axes.
struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool equal_aspect = false;
};

/// Deterministic SVG with the panels stacked vertically. Throws ConfigError
/// when there is nothing to draw.
std::string render_svg(const std::vector<Panel>& panels);
/// Long-format CSV behind the panels: panel,series,x,y.
std::string render_csv(const std::vector<Panel>& panels);

/// Six panels (f_x .. tau_z), measured against predicted.
std::vector<Panel> wrench_panels(const std::vector<double>& t, const std::vector<Wrench>& truth,
                                 const std::vector<Wrench>& pred);

struct NamedPath {
  std::string name;
  std::vector<Vec3> points;
};

/// XY-plane overlay: one polyline per path followed by the reference.
Panel xy_panel(const std::vector<NamedPath>& paths, const NamedPath& reference);

/// Writes <stem>.svg and <stem>.csv.
void write_plot(const std::string& stem, const std::vector<Panel>& panels);

}  // namespace npred
