#include "npred/trajectory_log.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "npred/errors.hpp"

namespace npred {

void TrajectoryLog::reserve(std::size_t n) {
  t.reserve(n);
  states.reserve(n);
  inputs.reserve(n);
}

TrajectoryLog TrajectoryLog::slice(std::size_t first, std::size_t count) const {
  TrajectoryLog out;
  auto take = [&](const auto& src, auto& dst) {
    if (src.empty()) return;
    dst.assign(src.begin() + static_cast<std::ptrdiff_t>(first),
               src.begin() + static_cast<std::ptrdiff_t>(first + count));
  };
  take(t, out.t);
  take(states, out.states);
  take(inputs, out.inputs);
  take(wrenches, out.wrenches);
  take(v_dot, out.v_dot);
  take(omega_dot, out.omega_dot);
  out.failed = failed;
  return out;
}

const std::vector<std::string>& log_columns(bool with_wrench) {
  static const std::vector<std::string> base = {"t",  "px", "py", "pz", "vx",  "vy",  "vz",  "qw",
                                                "qx", "qy", "qz", "wx", "wy",  "wz",  "fu",  "tmx",
                                                "tmy", "tmz"};
  static const std::vector<std::string> full = [] {
    auto cols = base;
    for (const char* c : {"fex", "fey", "fez", "tex", "tey", "tez"}) cols.emplace_back(c);
    return cols;
  }();
  return with_wrench ? full : base;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_log_csv(std::ostream& os, const TrajectoryLog& log) {
  const bool wrench = log.has_wrenches();
  const auto& cols = log_columns(wrench);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (std::size_t k = 0; k < log.size(); ++k) {
    const QuadState& s = log.states[k];
    const ControlInput& u = log.inputs[k];
    std::string row = format_double(log.t[k]);
    auto put = [&row](double v) {
      row += ',';
      row += format_double(v);
    };
    for (int i = 0; i < 3; ++i) put(s.p_w(i));
    for (int i = 0; i < 3; ++i) put(s.v_w(i));
    for (int i = 0; i < 4; ++i) put(s.q(i));
    for (int i = 0; i < 3; ++i) put(s.omega_b(i));
    put(u.f_u);
    for (int i = 0; i < 3; ++i) put(u.tau_m(i));
    if (wrench) {
      for (int i = 0; i < 3; ++i) put(log.wrenches[k].f_e(i));
      for (int i = 0; i < 3; ++i) put(log.wrenches[k].tau_e(i));
    }
    os << row << '\n';
  }
}

void write_log_csv(const std::string& path, const TrajectoryLog& log) {
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot open '" + path + "' for writing");
  write_log_csv(os, log);
}

TrajectoryLog ingest_flight_log(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("empty log: missing header");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;

  for (const auto& col : log_columns(false)) {
    if (!index.contains(col)) throw SchemaError("missing column " + col);
  }
  const auto& full = log_columns(true);
  bool any_wrench = false;
  for (std::size_t i = log_columns(false).size(); i < full.size(); ++i) {
    any_wrench = any_wrench || index.contains(full[i]);
  }
  if (any_wrench) {
    for (std::size_t i = log_columns(false).size(); i < full.size(); ++i) {
      if (!index.contains(full[i])) throw SchemaError("missing column " + full[i]);
    }
  }
  const auto& cols = log_columns(any_wrench);
  std::vector<std::size_t> pos;
  for (const auto& c : cols) pos.push_back(index.at(c));

  TrajectoryLog log;
  std::size_t row = 0;
  std::vector<double> vals(cols.size());
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto v = pos[i] < cells.size() ? parse_double(cells[pos[i]]) : std::nullopt;
      if (!v || !std::isfinite(*v)) {
        throw SchemaError("row " + std::to_string(row) + ": invalid value in column " + cols[i]);
      }
      vals[i] = *v;
    }
    QuadState s;
    s.p_w = Vec3(vals[1], vals[2], vals[3]);
    s.v_w = Vec3(vals[4], vals[5], vals[6]);
    s.q = Vec4(vals[7], vals[8], vals[9], vals[10]);
    const double qn = s.q.norm();
    if (!(qn > 0.0)) throw SchemaError("row " + std::to_string(row) + ": zero quaternion");
    if (std::abs(qn - 1.0) > 1e-12) s.q /= qn;
    s.omega_b = Vec3(vals[11], vals[12], vals[13]);
    log.t.push_back(vals[0]);
    log.states.push_back(s);
    log.inputs.push_back({vals[14], Vec3(vals[15], vals[16], vals[17])});
    if (any_wrench) {
      log.wrenches.push_back({Vec3(vals[18], vals[19], vals[20]), Vec3(vals[21], vals[22], vals[23])});
    }
  }
  if (log.size() < 3) throw SchemaError("log needs at least 3 rows, got " + std::to_string(log.size()));
  return log;
}

TrajectoryLog ingest_flight_log_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SchemaError("cannot open '" + path + "'");
  return ingest_flight_log(is);
}

}  // namespace npred
