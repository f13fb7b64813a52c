#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "npred/metrics.hpp"
#include "npred/npmpc.hpp"
#include "npred/plant.hpp"
#include "npred/reference.hpp"
#include "npred/rigid_body.hpp"

using namespace npred;
using Eigen::VectorXd;

namespace {

QuadState tilted_state() {
  QuadState s;
  s.p_w = Vec3(0.3, -0.2, 1.7);
  s.v_w = Vec3(0.4, 0.1, -0.3);
  s.q = quat_exp(Vec3(0.1, -0.05, 0.3));
  s.omega_b = Vec3(0.2, -0.4, 0.1);
  return s;
}

double state_gap(const QuadState& a, const QuadState& b) {
  return std::max({(a.p_w - b.p_w).cwiseAbs().maxCoeff(), (a.v_w - b.v_w).cwiseAbs().maxCoeff(),
                   (a.q - b.q).cwiseAbs().maxCoeff(), (a.omega_b - b.omega_b).cwiseAbs().maxCoeff()});
}

RolloutOptions hover_options(double duration) {
  RolloutOptions o;
  o.duration = duration;
  o.reference.kind = RefKind::kHover;
  return o;
}

}  // namespace

TEST_CASE("nominal model keeps hover as a fixed point") {
  const NominalParams p;
  QuadState s;
  s.p_w = Vec3(0.0, 0.0, 2.0);
  const ControlInput u{p.m * p.g, Vec3::Zero()};
  QuadState x = s;
  for (int k = 0; k < 50; ++k) x = f_nominal(x, u, 0.02, p);
  CHECK(state_gap(x, s) <= 1e-9);
}

TEST_CASE("nominal model and payload-free plant integrate identically") {
  PlantParams plant;
  plant.m_p = 0.0;
  plant.D_v.setZero();
  plant.D_omega.setZero();
  const NominalParams p = NominalParams::from_plant(plant);
  const QuadState s = tilted_state();
  const ControlInput u{21.0, Vec3(0.01, -0.02, 0.005)};
  const QuadState a = f_nominal(s, u, 0.01, p);
  const QuadState b = step_plant(s, PayloadState{}, u, plant, 0.01).state;
  CHECK(a.p_w == b.p_w);
  CHECK(a.v_w == b.v_w);
  CHECK(a.q == b.q);
  CHECK(a.omega_b == b.omega_b);
}

TEST_CASE("nominal model converges under substep refinement") {
  const NominalParams p;
  const ControlInput u{20.5, Vec3(0.002, -0.001, 0.0005)};
  QuadState coarse = tilted_state(), fine = coarse;
  for (int k = 0; k < 50; ++k) {
    coarse = f_nominal(coarse, u, 0.02, p, 1);
    fine = f_nominal(fine, u, 0.02, p, 10);
  }
  CHECK(state_gap(coarse, fine) <= 1e-7);
}

TEST_CASE("hybrid model: zero wrench, force balance and linearity") {
  const NominalParams p;
  const QuadState s = tilted_state();
  const ControlInput u{19.0, Vec3(0.01, 0.0, -0.01)};
  const QuadState nom = f_nominal(s, u, 0.02, p);
  const QuadState hyb = f_hybrid(s, u, Wrench{}, 0.02, p);
  CHECK(state_gap(nom, hyb) == 0.0);

  // Thrust 2mg against gravity and a -mg wrench balances; 3mg leaves g upward.
  QuadState hover;
  const Wrench down{Vec3(0.0, 0.0, -p.m * p.g), Vec3::Zero()};
  const QuadState still = f_hybrid(hover, ControlInput{2.0 * p.m * p.g, Vec3::Zero()}, down, 0.02, p);
  CHECK(std::abs(still.v_w.z()) <= 1e-9);
  const QuadState up = f_hybrid(hover, ControlInput{3.0 * p.m * p.g, Vec3::Zero()}, down, 0.02, p);
  CHECK(std::abs(up.v_w.z() - p.g * 0.02) <= 1e-9);

  auto delta = [&](const Wrench& w) {
    const QuadState y = f_hybrid(s, u, w, 0.02, p);
    VectorXd d(13);
    d << y.p_w - nom.p_w, y.v_w - nom.v_w, y.q - nom.q, y.omega_b - nom.omega_b;
    return d;
  };
  // Forces enter linearly; torques couple through the attitude at second order.
  const Wrench w1{Vec3(0.3, -0.2, -1.0), Vec3(0.001, 0.0, -0.002)};
  const Wrench w2{Vec3(-0.1, 0.5, 0.4), Vec3(-0.002, 0.002, 0.0)};
  const Wrench mix = Wrench::from_stacked(0.7 * w1.stacked() - 1.3 * w2.stacked());
  const VectorXd lin = 0.7 * delta(w1) - 1.3 * delta(w2);
  CHECK((delta(mix) - lin).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("discrete-add injection adds the scaled wrench after the nominal step") {
  const NominalParams p;
  const QuadState s = tilted_state();
  const ControlInput u{19.0, Vec3::Zero()};
  const Wrench w{Vec3(0.2, 0.0, -1.0), Vec3(0.0, 0.01, 0.0)};
  const QuadState nom = f_nominal(s, u, 0.02, p);
  const QuadState add = f_hybrid(s, u, w, 0.02, p, 1, WrenchInjection::kDiscreteAdd);
  CHECK((add.v_w - nom.v_w - 0.02 * w.f_e / p.m).norm() <= 1e-15);
  CHECK((add.omega_b - nom.omega_b - 0.02 * (p.J.inverse() * w.tau_e)).norm() <= 1e-15);
  CHECK(add.p_w == nom.p_w);
}

TEST_CASE("hybrid one-step prediction beats the nominal model on the payload plant") {
  const PlantParams plant;
  const NominalParams p = NominalParams::from_plant(plant);
  RolloutOptions o;
  o.duration = 6.0;
  MpcConfig cfg;
  const RolloutResult r = run_closed_loop(plant, cfg, std::nullopt, o);
  REQUIRE(r.failure.empty());
  double err_nom = 0.0, err_hyb = 0.0;
  for (std::size_t k = 50; k + 1 < r.log.size(); ++k) {
    const QuadState& s = r.log.states[k];
    const ControlInput& u = r.log.inputs[k];
    const QuadState& next = r.log.states[k + 1];
    err_nom += (f_nominal(s, u, 0.02, p, 20).v_w - next.v_w).squaredNorm();
    err_hyb += (f_hybrid(s, u, r.log.wrenches[k], 0.02, p, 20).v_w - next.v_w).squaredNorm();
  }
  CHECK(std::sqrt(err_hyb) <= 0.2 * std::sqrt(err_nom));
}

TEST_CASE("OCP on the reference reproduces the flat inputs at zero cost") {
  const NominalParams p;
  MpcConfig cfg;
  cfg.state_boxes = false;
  cfg.terminal_box = false;
  ReferenceParams ref;
  QuadMpcModel dyn(p, cfg);
  std::vector<VectorXd> x_ref, u_ref;
  const double t = 0.0;
  horizon_reference(ref, t, cfg, p, x_ref, u_ref);
  // One RK4 step of the flat reference is only accurate to O(dt^5); feed the
  // model's own propagation as the reference so the fixed point is exact.
  for (int i = 0; i < cfg.N; ++i) x_ref[i + 1] = dyn.step(x_ref[i], u_ref[i], i);
  const OcpSolution sol = solve_ocp(dyn, x_ref[0], x_ref, u_ref, cfg.cost(), cfg.bounds(),
                                    cfg.sqp_options());
  CHECK(sol.cost <= 1e-9);
  for (int i = 0; i < cfg.N; ++i) CHECK((sol.u_seq[i] - u_ref[i]).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("re-solving an identical OCP from its solution takes at most two SQP iterations") {
  const NominalParams p;
  MpcConfig cfg;
  ReferenceParams ref;
  QuadMpcModel dyn(p, cfg);
  std::vector<VectorXd> x_ref, u_ref;
  horizon_reference(ref, 1.0, cfg, p, x_ref, u_ref);
  QuadState x0 = from_vector(x_ref[0]);
  x0.p_w += Vec3(0.1, -0.05, 0.08);
  x0.v_w += Vec3(0.0, 0.2, 0.0);
  const OcpSolution first = solve_ocp(dyn, to_vector(x0), x_ref, u_ref, cfg.cost(), cfg.bounds(),
                                      cfg.sqp_options());
  REQUIRE(first.status == SolveStatus::kOptimal);
  const OcpSolution again = solve_ocp(dyn, to_vector(x0), x_ref, u_ref, cfg.cost(), cfg.bounds(),
                                      cfg.sqp_options(), first.u_seq);
  CHECK(again.iterations <= 2);
  CHECK(again.cost <= first.cost + 1e-9);
}

TEST_CASE("known constant wrench removes the hover offset") {
  PlantParams plant = PlantParams{}.nominal();
  const MpcConfig cfg;
  RolloutOptions o = hover_options(8.0);
  const Wrench push{Vec3(0.0, 0.0, -2.55), Vec3::Zero()};

  // The plant has no payload; the constant wrench is emulated by extra mass.
  plant.m = 2.0 + 2.55 / plant.g;
  NominalParams p;
  NpMpcController nominal(p, cfg, o.reference);
  NpMpcController informed(p, cfg, o.reference);
  informed.set_constant_wrench(push);
  const RolloutResult a = simulate_closed_loop(nominal, plant, o);
  const RolloutResult b = simulate_closed_loop(informed, plant, o);
  REQUIRE(a.failure.empty());
  REQUIRE(b.failure.empty());
  const double z_ref = a.reference.back().p_w.z();
  const double off_nom = std::abs(a.log.states.back().p_w.z() - z_ref);
  const double off_np = std::abs(b.log.states.back().p_w.z() - z_ref);
  CHECK(off_nom > 1e-3);
  CHECK(off_np <= 0.05 * off_nom);
}

TEST_CASE("nominal MPC tracks the circle on the payload-free plant") {
  const PlantParams plant = PlantParams{}.nominal();
  RolloutOptions o;
  o.duration = 20.0;
  const RolloutResult r = run_closed_loop(plant, MpcConfig{}, std::nullopt, o);
  REQUIRE(r.failure.empty());
  const TrackingError e = tracking_rmse(r.log.states, r.reference);
  CHECK(e.e_xy <= 0.02);
  std::vector<double> ms;
  for (const auto& d : r.diagnostics) ms.push_back(d.solve_ms);
  std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
  MESSAGE("median solve ms " << ms[ms.size() / 2]);
}
