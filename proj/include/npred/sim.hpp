#pragma once

#include <optional>
#include <string>
#include <vector>

#include "npred/reference.hpp"
#include "npred/trajectory_log.hpp"
#include "npred/types.hpp"

namespace npred {

enum class SolveStatus { kOptimal = 0, kMaxIter = 1, kInfeasible = 2 };
std::string to_string(SolveStatus s);

struct TickDiagnostics {
  Wrench chi_hat;
  double solve_ms = 0.0;
  double refit_ms = 0.0;
  int sqp_iters = 0;
  SolveStatus status = SolveStatus::kOptimal;
};

/// Anything that maps the measured state to an input once per control tick.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual ControlInput compute(double t, const QuadState& x) = 0;
  virtual TickDiagnostics diagnostics() const { return {}; }
};

/// Scheduled change applied to the plant at the first tick with t >= time.
struct PlantEvent {
  double time = 0.0;
  double payload_mass_delta = 0.0;
  Vec3 payload_velocity_kick = Vec3::Zero();  // world frame, m/s
};

struct RolloutOptions {
  double duration = 60.0;
  double rate = 50.0;
  double substep = 1e-3;
  double position_bound = 10.0;  // max distance from the reference before aborting
  ReferenceParams reference;
  std::vector<PlantEvent> events;
  std::optional<QuadState> initial_state;  // default: reference at t = 0
  PayloadState initial_payload;
  int max_infeasible_ticks = 5;
};

struct RolloutResult {
  TrajectoryLog log;
  std::vector<TickDiagnostics> diagnostics;
  std::vector<QuadState> reference;
  std::vector<Vec3> payload_positions;
  std::string failure;  // empty on success
};

/// Fixed-rate closed loop: sample, compute input, integrate the plant with
/// RK4 substeps under a zero-order hold. Logs ground-truth wrench and exact
/// accelerations at every tick.
RolloutResult simulate_closed_loop(Controller& controller, const PlantParams& params,
                                   const RolloutOptions& opts);

/// Data collection rollout; truncated log with failed = true on divergence.
TrajectoryLog collect_dataset(Controller& controller, const PlantParams& params,
                              const RolloutOptions& opts);

}  // namespace npred
