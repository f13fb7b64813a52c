#include <doctest.h>

#include <sstream>

#include "npred/errors.hpp"
#include "npred/labeling.hpp"
#include "npred/plant.hpp"

using namespace npred;

namespace {

TrajectoryLog quadratic_log(int n, double dt) {
  TrajectoryLog log;
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    QuadState s;
    s.v_w = Vec3(t * t, 2 * t, -t * t + 3 * t);
    s.omega_b = Vec3(0.5 * t * t, -t, 1.0);
    log.t.push_back(t);
    log.states.push_back(s);
    log.inputs.push_back({20.0, Vec3::Zero()});
  }
  return log;
}

}  // namespace

TEST_CASE("finite differences are exact on quadratics") {
  const TrajectoryLog log = quadratic_log(7, 0.02);
  const Derivatives d = numeric_derivatives(log);
  for (std::size_t k = 0; k < log.size(); ++k) {
    const double t = log.t[k];
    CHECK((d.v_dot[k] - Vec3(2 * t, 2, -2 * t + 3)).norm() < 1e-10);
    CHECK((d.omega_dot[k] - Vec3(t, -1, 0)).norm() < 1e-10);
  }
}

TEST_CASE("jittered timestamps are rejected") {
  TrajectoryLog log = quadratic_log(6, 0.02);
  log.t[3] += 0.001;
  CHECK_THROWS_AS(numeric_derivatives(log), NumericalError);
}

TEST_CASE("labels from exact accelerations recover the true wrench") {
  const PlantParams p;
  QuadState s;
  s.q = Vec4(0.98, 0.1, -0.1, 0.05).normalized();
  s.v_w = Vec3(1.0, 0.3, -0.2);
  s.omega_b = Vec3(0.2, -0.4, 0.1);
  PayloadState ps;
  ps.q = Vec3(0.2, 0.1, -1).normalized();
  ps.q_dot = Vec3(0.3, -0.2, 0.0);
  ps.q_dot -= ps.q_dot.dot(ps.q) * ps.q;
  const ControlInput u{22.0, Vec3(0.01, 0.02, -0.01)};
  const PlantAccelerations acc = plant_accelerations(s, ps, u, p);
  const Wrench label = label_wrench(s, acc.v_dot, acc.omega_dot, u, p);
  const Wrench truth = true_external_wrench(s, ps, u, p);
  CHECK((label.stacked() - truth.stacked()).norm() < 1e-10);
}

TEST_CASE("label CSV round-trips") {
  std::vector<LabeledSample> labels(3);
  for (int i = 0; i < 3; ++i) {
    labels[i].t = 0.02 * i + 1.0 / 3.0;
    labels[i].chi = Wrench::from_stacked(Vec6::Random());
    labels[i].zeta = Vec6::Random();
  }
  std::stringstream ss;
  write_labels_csv(ss, labels);
  const auto back = read_labels_csv(ss);
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].t == labels[i].t);
    CHECK(back[i].chi.stacked() == labels[i].chi.stacked());
    CHECK(back[i].zeta == labels[i].zeta);
  }
}
