#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "npred/trajectory_log.hpp"
#include "npred/types.hpp"

namespace npred {

struct LabeledSample {
  double t = 0.0;
  Wrench chi;
  Vec6 zeta = Vec6::Zero();
};

struct Derivatives {
  std::vector<Vec3> v_dot;
  std::vector<Vec3> omega_dot;
};

/// Second-order finite differences: central in the interior, one-sided
/// three-point at both ends. Needs >= 3 samples and uniform spacing
/// (jitter above 1% raises NumericalError).
Derivatives numeric_derivatives(const TrajectoryLog& log);

/// Inverts the quadrotor equations of motion for the external wrench using
/// quadrotor-only parameters (mass, inertia, gravity).
Wrench label_wrench(const QuadState& s, const Vec3& v_dot, const Vec3& omega_dot,
                    const ControlInput& u, const PlantParams& params);

/// Input matching the finite-difference stencil at row k under a zero-order
/// hold: the mean of the two inputs a central difference spans, the first
/// input at the start and the last full interval's input at the end.
ControlInput stencil_input(const std::vector<ControlInput>& inputs, std::size_t k);

enum class DerivativeSource { kAuto, kExact, kFiniteDifference };

/// Labels every row. kAuto uses exact accelerations when the log carries them.
std::vector<LabeledSample> label_log(const TrajectoryLog& log, const PlantParams& params,
                                     DerivativeSource source = DerivativeSource::kAuto);

void write_labels_csv(std::ostream& os, const std::vector<LabeledSample>& labels);
void write_labels_csv(const std::string& path, const std::vector<LabeledSample>& labels);
std::vector<LabeledSample> read_labels_csv(std::istream& is);
std::vector<LabeledSample> read_labels_csv_file(const std::string& path);

}  // namespace npred
