#include "npred/metrics.hpp"

#include <cmath>
#include <string>

#include "npred/errors.hpp"

namespace npred {

RmseReport rmse_wrench(std::span<const Wrench> pred, std::span<const Wrench> truth) {
  if (pred.size() != truth.size()) {
    throw NumericalError("prediction has " + std::to_string(pred.size()) + " rows, truth has " +
                         std::to_string(truth.size()));
  }
  RmseReport r;
  r.samples = pred.size();
  if (pred.empty()) return r;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const Vec6 e = pred[k].stacked() - truth[k].stacked();
    for (int i = 0; i < 6; ++i) r.axis[i] += e(i) * e(i);
    r.f_xy += e.head<2>().squaredNorm();
    r.tau_xy += e.segment<2>(3).squaredNorm();
    r.f += e.head<3>().squaredNorm();
    r.tau += e.tail<3>().squaredNorm();
  }
  const double n = static_cast<double>(pred.size());
  for (double& a : r.axis) a = std::sqrt(a / n);
  r.f_xy = std::sqrt(r.f_xy / n);
  r.tau_xy = std::sqrt(r.tau_xy / n);
  r.f = std::sqrt(r.f / n);
  r.tau = std::sqrt(r.tau / n);
  return r;
}

TrackingError tracking_rmse(std::span<const QuadState> states, std::span<const QuadState> ref,
                            std::size_t skip) {
  if (states.size() != ref.size()) throw NumericalError("state and reference lengths differ");
  TrackingError e;
  for (std::size_t k = skip; k < states.size(); ++k) {
    const Vec3 d = states[k].p_w - ref[k].p_w;
    e.e_xy += d.head<2>().squaredNorm();
    e.e_z += d.z() * d.z();
    ++e.samples;
  }
  if (e.samples > 0) {
    e.e_xy = std::sqrt(e.e_xy / static_cast<double>(e.samples));
    e.e_z = std::sqrt(e.e_z / static_cast<double>(e.samples));
  }
  return e;
}

}  // namespace npred
