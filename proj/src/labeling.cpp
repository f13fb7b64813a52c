#include "npred/labeling.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "npred/errors.hpp"

namespace npred {

Derivatives numeric_derivatives(const TrajectoryLog& log) {
  const std::size_t n = log.size();
  if (n < 3) throw NumericalError("numeric derivatives need at least 3 samples");
  const double dt = (log.t[n - 1] - log.t[0]) / static_cast<double>(n - 1);
  if (!(dt > 0.0)) throw NumericalError("timestamps must be increasing");
  for (std::size_t k = 1; k < n; ++k) {
    if (std::abs((log.t[k] - log.t[k - 1]) - dt) > 0.01 * dt) {
      throw NumericalError("non-uniform timestamps at row " + std::to_string(k));
    }
  }

  Derivatives d;
  d.v_dot.resize(n);
  d.omega_dot.resize(n);
  auto diff = [&](auto get, std::vector<Vec3>& out) {
    out[0] = (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * dt);
    for (std::size_t k = 1; k + 1 < n; ++k) out[k] = (get(k + 1) - get(k - 1)) / (2.0 * dt);
    out[n - 1] = (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * dt);
  };
  diff([&](std::size_t k) -> Vec3 { return log.states[k].v_w; }, d.v_dot);
  diff([&](std::size_t k) -> Vec3 { return log.states[k].omega_b; }, d.omega_dot);
  return d;
}

Wrench label_wrench(const QuadState& s, const Vec3& v_dot, const Vec3& omega_dot,
                    const ControlInput& u, const PlantParams& params) {
  const Mat3 R = s.rotation();
  Wrench w;
  w.f_e = params.m * v_dot + Vec3(0.0, 0.0, params.m * params.g) - R.col(2) * u.f_u;
  w.tau_e = params.J * omega_dot + s.omega_b.cross(params.J * s.omega_b) - u.tau_m;
  if (!w.finite()) throw NumericalError("non-finite wrench label");
  return w;
}

ControlInput stencil_input(const std::vector<ControlInput>& inputs, std::size_t k) {
  const std::size_t n = inputs.size();
  if (n < 2 || k == 0) return inputs.at(k);
  if (k + 1 == n) return inputs[n - 2];
  return ControlInput{0.5 * (inputs[k - 1].f_u + inputs[k].f_u),
                      0.5 * (inputs[k - 1].tau_m + inputs[k].tau_m)};
}

std::vector<LabeledSample> label_log(const TrajectoryLog& log, const PlantParams& params,
                                     DerivativeSource source) {
  const bool exact = source == DerivativeSource::kExact ||
                     (source == DerivativeSource::kAuto && log.has_exact_accelerations());
  if (exact && !log.has_exact_accelerations()) {
    throw NumericalError("log carries no exact accelerations");
  }
  Derivatives d;
  if (exact) {
    d.v_dot = log.v_dot;
    d.omega_dot = log.omega_dot;
  } else {
    d = numeric_derivatives(log);
  }
  std::vector<LabeledSample> out(log.size());
  for (std::size_t k = 0; k < log.size(); ++k) {
    out[k].t = log.t[k];
    out[k].chi = label_wrench(log.states[k], d.v_dot[k], d.omega_dot[k],
                              exact ? log.inputs[k] : stencil_input(log.inputs, k), params);
    out[k].zeta = zeta_of(log.states[k]);
  }
  return out;
}

namespace {
const char* kLabelHeader = "t,fex,fey,fez,tex,tey,tez,vx,vy,vz,wx,wy,wz";
}

void write_labels_csv(std::ostream& os, const std::vector<LabeledSample>& labels) {
  os << kLabelHeader << '\n';
  for (const auto& s : labels) {
    std::string row = format_double(s.t);
    const Vec6 chi = s.chi.stacked();
    for (int i = 0; i < 6; ++i) row += "," + format_double(chi(i));
    for (int i = 0; i < 6; ++i) row += "," + format_double(s.zeta(i));
    os << row << '\n';
  }
}

void write_labels_csv(const std::string& path, const std::vector<LabeledSample>& labels) {
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot open '" + path + "' for writing");
  write_labels_csv(os, labels);
}

std::vector<LabeledSample> read_labels_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("empty label file");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
  const auto cols = split_csv_line(kLabelHeader);
  std::vector<std::size_t> pos;
  for (const auto& c : cols) {
    if (!index.contains(c)) throw SchemaError("missing column " + c);
    pos.push_back(index.at(c));
  }
  std::vector<LabeledSample> out;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    double v[13];
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto parsed = pos[i] < cells.size() ? parse_double(cells[pos[i]]) : std::nullopt;
      if (!parsed || !std::isfinite(*parsed)) {
        throw SchemaError("row " + std::to_string(row) + ": invalid value in column " + cols[i]);
      }
      v[i] = *parsed;
    }
    LabeledSample s;
    s.t = v[0];
    s.chi = {Vec3(v[1], v[2], v[3]), Vec3(v[4], v[5], v[6])};
    s.zeta << v[7], v[8], v[9], v[10], v[11], v[12];
    out.push_back(s);
  }
  return out;
}

std::vector<LabeledSample> read_labels_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SchemaError("cannot open '" + path + "'");
  return read_labels_csv(is);
}

}  // namespace npred
