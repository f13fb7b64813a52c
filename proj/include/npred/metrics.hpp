#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "npred/types.hpp"

namespace npred {

/// Wrench prediction errors. Composite entries are RMSEs of the per-sample
/// composite error (e.g. sqrt(ex^2 + ey^2 + ez^2)), not combinations of axis RMSEs.
struct RmseReport {
  std::array<double, 6> axis{};  // Fx, Fy, Fz, tau_x, tau_y, tau_z
  double f_xy = 0.0;
  double tau_xy = 0.0;
  double f = 0.0;
  double tau = 0.0;
  std::size_t samples = 0;
};

/// Throws NumericalError when the lengths differ.
RmseReport rmse_wrench(std::span<const Wrench> pred, std::span<const Wrench> truth);

struct TrackingError {
  double e_xy = 0.0;
  double e_z = 0.0;
  std::size_t samples = 0;
};

/// E_xy = RMSE of the horizontal distance, E_z = RMSE of |z - z*|, over rows [skip, n).
TrackingError tracking_rmse(std::span<const QuadState> states, std::span<const QuadState> ref,
                            std::size_t skip = 0);

}  // namespace npred
