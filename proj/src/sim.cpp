#include "npred/sim.hpp"

#include <cmath>

#include "npred/errors.hpp"
#include "npred/plant.hpp"

namespace npred {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kMaxIter: return "max_iter";
    case SolveStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

RolloutResult simulate_closed_loop(Controller& controller, const PlantParams& params_in,
                                   const RolloutOptions& opts) {
  if (opts.rate < 10.0) throw ConfigError("sampling rate must be at least 10 Hz");
  if (opts.duration < 0.0) throw ConfigError("duration must be non-negative");
  params_in.validate();
  PlantParams params = params_in;

  const double dt = 1.0 / opts.rate;
  const auto ticks = static_cast<std::size_t>(std::floor(opts.duration * opts.rate + 1e-9));
  const int substeps = std::max(1, static_cast<int>(std::lround(dt / opts.substep)));
  const double h = dt / substeps;

  RolloutResult out;
  out.log.reserve(ticks);
  QuadState x = opts.initial_state
                    ? *opts.initial_state
                    : reference_trajectory(opts.reference, 0.0, params.m, params.J, params.g).x;
  PayloadState payload = opts.initial_payload;
  std::vector<bool> fired(opts.events.size(), false);
  int infeasible_run = 0;

  for (std::size_t k = 0; k < ticks; ++k) {
    const double t = static_cast<double>(k) * dt;
    for (std::size_t e = 0; e < opts.events.size(); ++e) {
      if (fired[e] || t + 1e-12 < opts.events[e].time) continue;
      fired[e] = true;
      params.m_p = std::max(0.0, params.m_p + opts.events[e].payload_mass_delta);
      const Vec3 kick = opts.events[e].payload_velocity_kick;
      payload.q_dot += (kick - kick.dot(payload.q) * payload.q) / params.l;
    }

    const QuadState ref = reference_trajectory(opts.reference, t, params.m, params.J, params.g).x;
    if (!x.p_w.allFinite() || (x.p_w - ref.p_w).norm() > opts.position_bound) {
      out.log.failed = true;
      out.failure = "position left the bound around the reference at t = " + std::to_string(t);
      break;
    }

    const ControlInput u = clamp_input(controller.compute(t, x), params);
    const TickDiagnostics diag = controller.diagnostics();
    infeasible_run = diag.status == SolveStatus::kInfeasible ? infeasible_run + 1 : 0;

    const PlantAccelerations acc = plant_accelerations(x, payload, u, params);
    out.log.t.push_back(t);
    out.log.states.push_back(x);
    out.log.inputs.push_back(u);
    out.log.wrenches.push_back(true_external_wrench(x, payload, u, params));
    out.log.v_dot.push_back(acc.v_dot);
    out.log.omega_dot.push_back(acc.omega_dot);
    out.diagnostics.push_back(diag);
    out.reference.push_back(ref);
    out.payload_positions.push_back(payload_position(x, payload, params));

    if (infeasible_run >= opts.max_infeasible_ticks) {
      out.log.failed = true;
      out.failure = "solver infeasible for " + std::to_string(infeasible_run) + " consecutive ticks";
      break;
    }

    try {
      for (int i = 0; i < substeps; ++i) {
        const PlantStep step = step_plant(x, payload, u, params, h);
        x = step.state;
        payload = step.payload;
      }
    } catch (const NumericalError& err) {
      out.log.failed = true;
      out.failure = err.what();
      break;
    }
  }
  return out;
}

TrajectoryLog collect_dataset(Controller& controller, const PlantParams& params,
                              const RolloutOptions& opts) {
  return simulate_closed_loop(controller, params, opts).log;
}

}  // namespace npred
