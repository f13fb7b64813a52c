#include <doctest.h>

#include <regex>
#include <sstream>

#include "npred/errors.hpp"
#include "npred/plot.hpp"
#include "npred/trajectory_log.hpp"

using namespace npred;

namespace {

NamedPath circle_path(const std::string& name, double r, int n) {
  NamedPath p{name, {}};
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * M_PI * k / n;
    p.points.emplace_back(r * std::cos(a), r * std::sin(a), 2.0);
  }
  return p;
}

int count(const std::string& s, const std::string& needle) {
  int n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("svg is deterministic") {
  const Panel p = xy_panel({circle_path("a", 1.0, 50)}, circle_path("ref", 1.1, 50));
  CHECK(render_svg({p}) == render_svg({p}));
  CHECK(render_csv({p}) == render_csv({p}));
}

TEST_CASE("overlay has one polyline per log plus the reference") {
  const Panel p = xy_panel({circle_path("a", 1.0, 30), circle_path("b", 0.9, 30), circle_path("c", 0.8, 30)},
                           circle_path("ref", 1.0, 30));
  CHECK(count(render_svg({p}), "<polyline") == 4);
}

TEST_CASE("empty logs are rejected") {
  CHECK_THROWS_AS(xy_panel({NamedPath{"a", {}}}, NamedPath{"ref", {}}), ConfigError);
  CHECK_THROWS_AS(wrench_panels({}, {}, {}), ConfigError);
  CHECK_THROWS_AS(render_svg({}), ConfigError);
}

TEST_CASE("csv re-renders to the same polyline geometry") {
  std::vector<double> t;
  std::vector<Wrench> a, b;
  for (int k = 0; k < 40; ++k) {
    t.push_back(0.02 * k);
    Wrench w;
    w.f_e = Vec3(std::sin(0.1 * k), 0.0, -9.0 + 0.01 * k);
    w.tau_e = Vec3(0.0, 0.001 * k, 0.0);
    a.push_back(w);
    w.f_e.x() += 0.05;
    b.push_back(w);
  }
  const auto panels = wrench_panels(t, a, b);
  const std::string svg = render_svg(panels);
  const std::string csv = render_csv(panels);

  // Rebuild the panels from the CSV alone and compare the SVG byte for byte.
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  std::vector<Panel> rebuilt;
  while (std::getline(is, line)) {
    const auto f = split_csv_line(line);
    REQUIRE(f.size() == 4);
    if (rebuilt.empty() || rebuilt.back().title != f[0]) rebuilt.push_back(Panel{f[0], "", "", {}, false});
    auto& series = rebuilt.back().series;
    if (series.empty() || series.back().name != f[1]) series.push_back(Series{f[1], {}, {}});
    series.back().x.push_back(*parse_double(f[2]));
    series.back().y.push_back(*parse_double(f[3]));
  }
  REQUIRE(rebuilt.size() == panels.size());
  for (std::size_t i = 0; i < panels.size(); ++i) {
    rebuilt[i].x_label = panels[i].x_label;
    rebuilt[i].y_label = panels[i].y_label;
  }
  CHECK(render_svg(rebuilt) == svg);
}
