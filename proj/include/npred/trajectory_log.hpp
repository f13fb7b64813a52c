#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "npred/types.hpp"

namespace npred {

/// Time-stamped states and inputs, with optional ground-truth wrenches and
/// (simulator only, never serialized) exact accelerations.
struct TrajectoryLog {
  std::vector<double> t;
  std::vector<QuadState> states;
  std::vector<ControlInput> inputs;
  std::vector<Wrench> wrenches;  // empty when absent
  std::vector<Vec3> v_dot;       // empty when absent
  std::vector<Vec3> omega_dot;   // empty when absent
  bool failed = false;

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
  bool has_wrenches() const { return !wrenches.empty(); }
  bool has_exact_accelerations() const { return !v_dot.empty(); }
  void reserve(std::size_t n);
  /// Rows [first, first + count).
  TrajectoryLog slice(std::size_t first, std::size_t count) const;
};

/// Column names of the log CSV, wrench columns last.
const std::vector<std::string>& log_columns(bool with_wrench);

/// Formats a double with the shortest representation that parses back bit-exact.
std::string format_double(double x);
/// Strict full-string parse; nullopt on failure.
std::optional<double> parse_double(std::string_view s);

void write_log_csv(std::ostream& os, const TrajectoryLog& log);
void write_log_csv(const std::string& path, const TrajectoryLog& log);

/// Validates and loads a log. Missing columns raise SchemaError("missing column <name>"),
/// unparsable or NaN rows raise SchemaError naming the row, fewer than three rows too.
/// Quaternions are renormalized when their norm deviates from 1 by more than 1e-12.
TrajectoryLog ingest_flight_log(std::istream& is);
TrajectoryLog ingest_flight_log_file(const std::string& path);

/// Splits a CSV line on commas (no quoting; none of the formats here need it).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace npred
