#include "npred/reference.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "npred/errors.hpp"
#include "npred/rigid_body.hpp"

namespace npred {

RefKind parse_ref_kind(std::string_view name) {
  if (name == "circle") return RefKind::kCircle;
  if (name == "lemniscate") return RefKind::kLemniscate;
  if (name == "hover") return RefKind::kHover;
  if (name == "random_points") return RefKind::kRandomPoints;
  throw ConfigError("unknown reference kind '" + std::string(name) + "'");
}

std::string to_string(RefKind kind) {
  switch (kind) {
    case RefKind::kCircle: return "circle";
    case RefKind::kLemniscate: return "lemniscate";
    case RefKind::kHover: return "hover";
    case RefKind::kRandomPoints: return "random_points";
  }
  return "unknown";
}

namespace {

// Derivatives of a*sin(w t + phi) up to order 4.
std::array<double, 5> sine_derivs(double a, double w, double phi, double t) {
  const double s = std::sin(w * t + phi);
  const double c = std::cos(w * t + phi);
  return {a * s, a * w * c, -a * w * w * s, -a * w * w * w * c, a * w * w * w * w * s};
}

FlatOutput from_axes(const std::array<std::array<double, 5>, 3>& ax) {
  FlatOutput f;
  for (int i = 0; i < 3; ++i) {
    f.p(i) = ax[i][0];
    f.v(i) = ax[i][1];
    f.a(i) = ax[i][2];
    f.j(i) = ax[i][3];
    f.s(i) = ax[i][4];
  }
  return f;
}

struct SineTerm {
  double amp, freq, phase;
};

std::array<std::array<SineTerm, 3>, 3> random_terms(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(0.3, 1.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp_xy(0.2, 0.6);
  std::uniform_real_distribution<double> amp_z(0.05, 0.2);
  std::array<std::array<SineTerm, 3>, 3> terms{};
  for (int axis = 0; axis < 3; ++axis) {
    for (auto& term : terms[axis]) {
      term.amp = axis < 2 ? amp_xy(rng) : amp_z(rng);
      term.freq = freq(rng);
      term.phase = phase(rng);
    }
  }
  return terms;
}

}  // namespace

FlatOutput flat_output(const ReferenceParams& ref, double t) {
  if (t < 0.0) throw ConfigError("reference time must be non-negative");
  const Vec3 base = ref.center + Vec3(0.0, 0.0, ref.height);
  std::array<std::array<double, 5>, 3> ax{};
  switch (ref.kind) {
    case RefKind::kHover:
      break;
    case RefKind::kCircle: {
      const double w = ref.speed / ref.radius;
      const double half_pi = 0.5 * std::numbers::pi;
      ax[0] = sine_derivs(ref.radius, w, half_pi, t);
      ax[1] = sine_derivs(ref.radius, w, 0.0, t);
      break;
    }
    case RefKind::kLemniscate: {
      // x = a sin(wt), y = (a/2) sin(2wt); peak speed a*w*sqrt(2) at the crossing
      const double w = ref.speed / (ref.radius * std::numbers::sqrt2);
      ax[0] = sine_derivs(ref.radius, w, 0.0, t);
      ax[1] = sine_derivs(0.5 * ref.radius, 2.0 * w, 0.0, t);
      break;
    }
    case RefKind::kRandomPoints: {
      const auto terms = random_terms(ref.seed);
      for (int axis = 0; axis < 3; ++axis) {
        for (const auto& term : terms[axis]) {
          // subtract the t = 0 offset so the curve starts at the base point
          auto d = sine_derivs(term.amp, term.freq, term.phase, t);
          d[0] -= term.amp * std::sin(term.phase);
          for (int k = 0; k < 5; ++k) ax[axis][k] += d[k];
        }
      }
      break;
    }
  }
  FlatOutput f = from_axes(ax);
  f.p += base;
  return f;
}

double reference_period(const ReferenceParams& ref) {
  switch (ref.kind) {
    case RefKind::kCircle: return 2.0 * std::numbers::pi * ref.radius / ref.speed;
    case RefKind::kLemniscate:
      return 2.0 * std::numbers::pi * ref.radius * std::numbers::sqrt2 / ref.speed;
    default: return 0.0;
  }
}

namespace {

struct FlatAttitude {
  Mat3 R;
  Vec3 omega;
  double thrust;
};

FlatAttitude flat_attitude(const FlatOutput& f, double m, double g) {
  const Vec3 t = f.a + Vec3(0.0, 0.0, g);
  const double tn = t.norm();
  const Vec3 zb = t / tn;
  const Vec3 yb = zb.cross(Vec3::UnitX()).normalized();
  const Vec3 xb = yb.cross(zb);
  FlatAttitude out;
  out.R.col(0) = xb;
  out.R.col(1) = yb;
  out.R.col(2) = zb;
  out.thrust = m * tn;
  const Vec3 h = (f.j - zb.dot(f.j) * zb) / tn;
  out.omega = Vec3(-h.dot(yb), h.dot(xb), 0.0);
  return out;
}

}  // namespace

ReferencePoint reference_trajectory(const ReferenceParams& ref, double t, double m, const Mat3& J,
                                    double g) {
  const FlatOutput f = flat_output(ref, t);
  const FlatAttitude att = flat_attitude(f, m, g);

  // angular acceleration by a central difference of the analytic rate
  constexpr double h = 1e-4;
  Vec3 omega_dot = Vec3::Zero();
  if (ref.kind != RefKind::kHover) {
    const double t0 = std::max(t - h, 0.0);
    const double t1 = t + h;
    const Vec3 w0 = flat_attitude(flat_output(ref, t0), m, g).omega;
    const Vec3 w1 = flat_attitude(flat_output(ref, t1), m, g).omega;
    omega_dot = (w1 - w0) / (t1 - t0);
  }

  ReferencePoint pt;
  pt.x.p_w = f.p;
  pt.x.v_w = f.v;
  pt.x.q = quat_from_rotation(att.R);
  pt.x.omega_b = att.omega;
  pt.u.f_u = att.thrust;
  pt.u.tau_m = J * omega_dot + att.omega.cross(J * att.omega);
  return pt;
}

}  // namespace npred
