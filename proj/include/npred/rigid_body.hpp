#pragma once

#include "npred/types.hpp"

namespace npred {

Mat3 rotation_from_quat(const Vec4& q);
Vec4 quat_from_rotation(const Mat3& R);
Vec4 quat_multiply(const Vec4& a, const Vec4& b);
Vec4 quat_conjugate(const Vec4& q);
/// Exp map: rotation vector -> unit quaternion.
Vec4 quat_exp(const Vec3& rotvec);
/// Log map: unit quaternion -> rotation vector in (-pi, pi].
Vec3 quat_log(const Vec4& q);
Mat3 skew(const Vec3& v);

struct RigidBodyRates {
  Vec3 p_dot;
  Vec3 v_dot;
  Vec4 q_dot;
  Vec3 omega_dot;
};

/// Right-hand side of the quadrotor equations of motion with an external
/// world-frame force and body-frame torque. Shared by the plant and the
/// controller model so both integrate bit-identically.
RigidBodyRates rigid_body_rates(const Vec3& v, const Vec4& q, const Vec3& omega,
                                const ControlInput& u, const Vec3& f_ext_w,
                                const Vec3& tau_ext_b, double m, const Mat3& J,
                                const Mat3& J_inv, double g);

/// Classic fourth-order Runge-Kutta step for a fixed-size state.
template <class Vec, class Rhs>
Vec rk4_step(const Rhs& rhs, const Vec& y, double h) {
  const Vec k1 = rhs(y);
  const Vec k2 = rhs(Vec(y + 0.5 * h * k1));
  const Vec k3 = rhs(Vec(y + 0.5 * h * k2));
  const Vec k4 = rhs(Vec(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace npred
