#include "npred/rigid_body.hpp"

#include <cmath>

namespace npred {

Mat3 QuadState::rotation() const { return rotation_from_quat(q); }

Mat3 rotation_from_quat(const Vec4& q) {
  const Eigen::Quaterniond quat(q(0), q(1), q(2), q(3));
  return quat.normalized().toRotationMatrix();
}

Vec4 quat_from_rotation(const Mat3& R) {
  Eigen::Quaterniond quat(R);
  quat.normalize();
  Vec4 q(quat.w(), quat.x(), quat.y(), quat.z());
  if (q(0) < 0.0) q = -q;
  return q;
}

Vec4 quat_multiply(const Vec4& a, const Vec4& b) {
  return {a(0) * b(0) - a(1) * b(1) - a(2) * b(2) - a(3) * b(3),
          a(0) * b(1) + a(1) * b(0) + a(2) * b(3) - a(3) * b(2),
          a(0) * b(2) - a(1) * b(3) + a(2) * b(0) + a(3) * b(1),
          a(0) * b(3) + a(1) * b(2) - a(2) * b(1) + a(3) * b(0)};
}

Vec4 quat_conjugate(const Vec4& q) { return {q(0), -q(1), -q(2), -q(3)}; }

Vec4 quat_exp(const Vec3& rotvec) {
  const double theta = rotvec.norm();
  const double half = 0.5 * theta;
  // sin(x/2)/x, series below 1e-6
  const double k = theta < 1e-6 ? 0.5 - theta * theta / 48.0 : std::sin(half) / theta;
  return {std::cos(half), k * rotvec.x(), k * rotvec.y(), k * rotvec.z()};
}

Vec3 quat_log(const Vec4& q_in) {
  Vec4 q = q_in / q_in.norm();
  if (q(0) < 0.0) q = -q;
  const Vec3 v = q.tail<3>();
  const double s = v.norm();
  if (s < 1e-9) {
    return (2.0 / q(0)) * v;
  }
  const double angle = 2.0 * std::atan2(s, q(0));
  return (angle / s) * v;
}

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return S;
}

RigidBodyRates rigid_body_rates(const Vec3& v, const Vec4& q, const Vec3& omega,
                                const ControlInput& u, const Vec3& f_ext_w,
                                const Vec3& tau_ext_b, double m, const Mat3& J,
                                const Mat3& J_inv, double g) {
  const Mat3 R = rotation_from_quat(q);
  RigidBodyRates r;
  r.p_dot = v;
  const Vec3 thrust_w = R.col(2) * u.f_u;
  r.v_dot = (Vec3(0.0, 0.0, -m * g) + thrust_w + f_ext_w) / m;
  r.q_dot = 0.5 * Vec4(-q(1) * omega.x() - q(2) * omega.y() - q(3) * omega.z(),
                       q(0) * omega.x() + q(2) * omega.z() - q(3) * omega.y(),
                       q(0) * omega.y() - q(1) * omega.z() + q(3) * omega.x(),
                       q(0) * omega.z() + q(1) * omega.y() - q(2) * omega.x());
  r.omega_dot = J_inv * (-omega.cross(J * omega) + u.tau_m + tau_ext_b);
  return r;
}

}  // namespace npred
