#pragma once

#include "npred/types.hpp"

namespace npred {

struct PlantStep {
  QuadState state;
  PayloadState payload;
  bool saturated = false;
};

struct PlantAccelerations {
  Vec3 v_dot;
  Vec3 omega_dot;
  double tension = 0.0;
};

/// f_e = f_p + f_res (world), tau_e = tau_p + tau_res (body). The tether
/// tension depends on the instantaneous accelerations, hence on u.
Wrench true_external_wrench(const QuadState& s, const PayloadState& ps, const ControlInput& u,
                            const PlantParams& params);

/// Exact instantaneous accelerations of the coupled system at (s, ps, u).
PlantAccelerations plant_accelerations(const QuadState& s, const PayloadState& ps,
                                       const ControlInput& u, const PlantParams& params);

/// One RK4 step of the quadrotor + tethered payload. Inputs outside the
/// actuator box are clamped (saturated = true). Throws NumericalError on
/// non-finite states and ConfigError when dt is outside (0, 0.05].
PlantStep step_plant(const QuadState& s, const PayloadState& ps, const ControlInput& u,
                     const PlantParams& params, double dt);

ControlInput clamp_input(const ControlInput& u, const PlantParams& params, bool* saturated = nullptr);

Vec3 attachment_point(const QuadState& s, const PlantParams& params);
Vec3 payload_position(const QuadState& s, const PayloadState& ps, const PlantParams& params);
Vec3 payload_velocity(const QuadState& s, const PayloadState& ps, const PlantParams& params);

/// Kinetic plus gravitational potential energy of quadrotor and payload.
double mechanical_energy(const QuadState& s, const PayloadState& ps, const PlantParams& params);

}  // namespace npred
