#include "npred/plant.hpp"

#include <algorithm>
#include <cmath>

#include "npred/errors.hpp"
#include "npred/rigid_body.hpp"

namespace npred {

namespace {

using PlantVec = Eigen::Matrix<double, 19, 1>;

PlantVec pack(const QuadState& s, const PayloadState& ps) {
  PlantVec y;
  y << s.p_w, s.v_w, s.q, s.omega_b, ps.q, ps.q_dot;
  return y;
}

struct CoupledRates {
  RigidBodyRates body;
  Vec3 q_ddot;
  double tension = 0.0;
  Vec3 f_ext_w;
  Vec3 tau_ext_b;
};

// Tension comes from the second derivative of |payload - attachment| = l,
// which is affine in T because the quadrotor accelerations are.
CoupledRates coupled_rates(const Vec3& v, const Vec4& q, const Vec3& omega, const Vec3& qp,
                           const Vec3& qp_dot, bool taut, const ControlInput& u,
                           const PlantParams& P, const Mat3& J_inv) {
  const Mat3 R = rotation_from_quat(q);
  const Vec3 f_drag = -P.D_v.cwiseProduct(v);
  const Vec3 tau_drag = -P.D_omega.cwiseProduct(omega);
  const Vec3& r = P.r_att;

  double T = 0.0;
  if (taut && P.m_p > 0.0) {
    const Vec3 a0 = (Vec3(0.0, 0.0, -P.m * P.g) + R.col(2) * u.f_u + f_drag) / P.m;
    const Vec3 wd0 = J_inv * (-omega.cross(P.J * omega) + u.tau_m + tau_drag);
    const Vec3 att_acc0 = a0 + R * (wd0.cross(r) + omega.cross(omega.cross(r)));
    const Vec3 c = r.cross(R.transpose() * qp);
    const double num = qp.dot(Vec3(0.0, 0.0, -P.g) - att_acc0) + P.l * qp_dot.squaredNorm();
    const double den = 1.0 / P.m_p + qp.dot(qp) / P.m + c.dot(J_inv * c);
    T = num / den;
  }

  CoupledRates out;
  out.tension = T;
  const Vec3 f_p = T * qp;
  const Vec3 tau_p = r.cross(R.transpose() * f_p);
  out.f_ext_w = f_p + f_drag;
  out.tau_ext_b = tau_p + tau_drag;
  out.body = rigid_body_rates(v, q, omega, u, out.f_ext_w, out.tau_ext_b, P.m, P.J, J_inv, P.g);

  Vec3 payload_acc = Vec3(0.0, 0.0, -P.g);
  if (P.m_p > 0.0) payload_acc -= (T / P.m_p) * qp;
  const Vec3 att_acc =
      out.body.v_dot + R * (out.body.omega_dot.cross(r) + omega.cross(omega.cross(r)));
  out.q_ddot = (payload_acc - att_acc) / P.l;
  return out;
}

void check_finite(const QuadState& s, const PayloadState& ps) {
  if (!(s.p_w.allFinite() && s.v_w.allFinite() && s.q.allFinite() && s.omega_b.allFinite() &&
        ps.q.allFinite() && ps.q_dot.allFinite())) {
    throw NumericalError("numerical blowup");
  }
}

}  // namespace

void PlantParams::validate() const {
  if (!(m > 0.0)) throw ConfigError("plant mass must be positive");
  if (!(l > 0.0)) throw ConfigError("tether length must be positive");
  if (!(m_p >= 0.0)) throw ConfigError("payload mass must be non-negative");
  if (!J.isApprox(J.transpose(), 1e-12)) throw ConfigError("inertia must be symmetric");
  Eigen::LLT<Mat3> llt(J);
  if (llt.info() != Eigen::Success) throw ConfigError("inertia must be positive definite");
  if (!(f_max > 0.0) || !(tau_max > 0.0)) throw ConfigError("actuator limits must be positive");
  if ((D_v.array() < 0.0).any() || (D_omega.array() < 0.0).any()) {
    throw ConfigError("drag coefficients must be non-negative");
  }
}

PlantParams PlantParams::nominal() const {
  PlantParams p = *this;
  p.m_p = 0.0;
  p.D_v.setZero();
  p.D_omega.setZero();
  return p;
}

ControlInput clamp_input(const ControlInput& u, const PlantParams& params, bool* saturated) {
  ControlInput c;
  c.f_u = std::clamp(u.f_u, 0.0, params.f_max);
  for (int i = 0; i < 3; ++i) c.tau_m(i) = std::clamp(u.tau_m(i), -params.tau_max, params.tau_max);
  if (saturated) *saturated = c.f_u != u.f_u || c.tau_m != u.tau_m;
  return c;
}

Vec3 attachment_point(const QuadState& s, const PlantParams& params) {
  return s.p_w + s.rotation() * params.r_att;
}

Vec3 payload_position(const QuadState& s, const PayloadState& ps, const PlantParams& params) {
  return attachment_point(s, params) + params.l * ps.q;
}

Vec3 payload_velocity(const QuadState& s, const PayloadState& ps, const PlantParams& params) {
  const Mat3 R = s.rotation();
  return s.v_w + R * s.omega_b.cross(params.r_att) + params.l * ps.q_dot;
}

double mechanical_energy(const QuadState& s, const PayloadState& ps, const PlantParams& params) {
  const double quad = 0.5 * params.m * s.v_w.squaredNorm() +
                      0.5 * s.omega_b.dot(params.J * s.omega_b) + params.m * params.g * s.p_w.z();
  const Vec3 pl = payload_position(s, ps, params);
  const Vec3 vl = payload_velocity(s, ps, params);
  return quad + 0.5 * params.m_p * vl.squaredNorm() + params.m_p * params.g * pl.z();
}

PlantAccelerations plant_accelerations(const QuadState& s, const PayloadState& ps,
                                       const ControlInput& u, const PlantParams& params) {
  const Mat3 J_inv = params.J.inverse();
  const CoupledRates r =
      coupled_rates(s.v_w, s.q, s.omega_b, ps.q, ps.q_dot, ps.taut, u, params, J_inv);
  return {r.body.v_dot, r.body.omega_dot, r.tension};
}

Wrench true_external_wrench(const QuadState& s, const PayloadState& ps, const ControlInput& u,
                            const PlantParams& params) {
  check_finite(s, ps);
  const Mat3 J_inv = params.J.inverse();
  const CoupledRates r =
      coupled_rates(s.v_w, s.q, s.omega_b, ps.q, ps.q_dot, ps.taut, u, params, J_inv);
  Wrench w{r.f_ext_w, r.tau_ext_b};
  if (!w.finite()) throw NumericalError("numerical blowup");
  return w;
}

PlantStep step_plant(const QuadState& s, const PayloadState& ps, const ControlInput& u_in,
                     const PlantParams& params, double dt) {
  if (!(dt > 0.0 && dt <= 0.05)) throw ConfigError("plant step dt must lie in (0, 0.05]");
  check_finite(s, ps);

  PlantStep out;
  const ControlInput u = clamp_input(u_in, params, &out.saturated);
  const Mat3 J_inv = params.J.inverse();

  bool taut = ps.taut;
  if (taut && params.m_p > 0.0) {
    const CoupledRates r0 =
        coupled_rates(s.v_w, s.q, s.omega_b, ps.q, ps.q_dot, true, u, params, J_inv);
    if (r0.tension < 0.0) taut = false;
  }

  auto rhs = [&](const PlantVec& y) {
    const Vec3 v = y.segment<3>(3);
    const Vec4 q = y.segment<4>(6);
    const Vec3 w = y.segment<3>(10);
    const CoupledRates r =
        coupled_rates(v, q, w, y.segment<3>(13), y.segment<3>(16), taut, u, params, J_inv);
    PlantVec d;
    d << r.body.p_dot, r.body.v_dot, r.body.q_dot, r.body.omega_dot, y.segment<3>(16), r.q_ddot;
    return d;
  };
  const PlantVec y = rk4_step(rhs, pack(s, ps), dt);

  out.state.p_w = y.segment<3>(0);
  out.state.v_w = y.segment<3>(3);
  out.state.q = y.segment<4>(6);
  out.state.q /= out.state.q.norm();
  out.state.omega_b = y.segment<3>(10);
  out.payload.q = y.segment<3>(13);
  out.payload.q_dot = y.segment<3>(16);
  out.payload.taut = taut;
  check_finite(out.state, out.payload);

  PayloadState& p = out.payload;
  const double len = p.q.norm();
  if (p.taut) {
    p.q /= len;
    p.q_dot -= p.q.dot(p.q_dot) * p.q;
  } else if (len >= 1.0) {
    // inelastic re-engagement: drop the outward radial velocity
    p.q /= len;
    const double radial = p.q.dot(p.q_dot);
    if (radial > 0.0) p.q_dot -= radial * p.q;
    p.taut = true;
  }
  return out;
}

}  // namespace npred
