#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "npred/types.hpp"

namespace npred {

enum class RefKind { kCircle, kLemniscate, kHover, kRandomPoints };

/// Parses "circle", "lemniscate", "hover", "random_points"; ConfigError otherwise.
RefKind parse_ref_kind(std::string_view name);
std::string to_string(RefKind kind);

struct ReferenceParams {
  RefKind kind = RefKind::kCircle;
  double radius = 1.0;  // circle radius, lemniscate half-width
  double speed = 1.5;   // circle speed, lemniscate peak speed
  double height = 2.0;
  Vec3 center = Vec3::Zero();
  std::uint64_t seed = 7;  // random_points only
};

/// Position and its first four time derivatives.
struct FlatOutput {
  Vec3 p, v, a, j, s;
};

struct ReferencePoint {
  QuadState x;
  ControlInput u;
};

FlatOutput flat_output(const ReferenceParams& ref, double t);

/// Reference state and differentially-flat nominal input (yaw fixed at 0)
/// for the payload-free quadrotor with mass m and inertia J.
ReferencePoint reference_trajectory(const ReferenceParams& ref, double t, double m, const Mat3& J,
                                    double g = kGravity);

/// Period of the closed curve (0 for hover and random_points).
double reference_period(const ReferenceParams& ref);

}  // namespace npred
