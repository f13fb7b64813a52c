#pragma once

#include <Eigen/Dense>

namespace npred {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kGravity = 9.81;
inline constexpr int kWrenchDim = 6;
inline constexpr int kZetaDim = 6;

/// Quadrotor rigid-body state. Attitude is a unit quaternion (w, x, y, z)
/// mapping body to world; the rotation matrix is derived from it.
struct QuadState {
  Vec3 p_w = Vec3::Zero();
  Vec3 v_w = Vec3::Zero();
  Vec4 q = Vec4(1.0, 0.0, 0.0, 0.0);
  Vec3 omega_b = Vec3::Zero();

  Mat3 rotation() const;
};

struct ControlInput {
  double f_u = 0.0;
  Vec3 tau_m = Vec3::Zero();

  Eigen::Vector4d stacked() const { return {f_u, tau_m.x(), tau_m.y(), tau_m.z()}; }
  static ControlInput from_stacked(const Eigen::Vector4d& u) {
    return {u(0), u.tail<3>()};
  }
};

/// External force (world frame) and torque (body frame) on the quadrotor.
struct Wrench {
  Vec3 f_e = Vec3::Zero();
  Vec3 tau_e = Vec3::Zero();

  Vec6 stacked() const {
    Vec6 chi;
    chi << f_e, tau_e;
    return chi;
  }
  static Wrench from_stacked(const Vec6& chi) { return {chi.head<3>(), chi.tail<3>()}; }
  bool finite() const { return f_e.allFinite() && tau_e.allFinite(); }
};

/// Payload on the tether. q is (payload - attachment) / l, a unit vector while taut.
struct PayloadState {
  Vec3 q = -Vec3::UnitZ();
  Vec3 q_dot = Vec3::Zero();
  bool taut = true;
};

struct PlantParams {
  double m = 2.0;
  Mat3 J = Eigen::Vector3d(0.025, 0.025, 0.045).asDiagonal();
  double g = kGravity;
  double m_p = 0.26;
  double l = 0.8;
  Vec3 r_att = Vec3(0.0, 0.0, -0.05);
  Vec3 D_v = Vec3::Constant(0.05);
  Vec3 D_omega = Vec3::Constant(0.005);
  double f_max = 2.5 * 2.0 * kGravity;
  double tau_max = 1.0;

  /// Throws ConfigError when m <= 0, J not SPD, l <= 0 or m_p < 0.
  void validate() const;
  /// Same airframe with the payload and residual drag removed.
  PlantParams nominal() const;
};

/// Zeta = [v_w; omega_b], the regressor input of the wrench dynamics.
inline Vec6 zeta_of(const QuadState& s) {
  Vec6 z;
  z << s.v_w, s.omega_b;
  return z;
}

}  // namespace npred
