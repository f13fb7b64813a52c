#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "npred/npmpc.hpp"
#include "npred/plant.hpp"
#include "npred/sim.hpp"
#include "npred/trainer.hpp"

namespace npred {

/// Every tunable of the command-line tool. Text form: one `section.key = value`
/// per line, `#` starts a comment, lists are comma separated.
struct AppConfig {
  PlantParams plant;
  RolloutOptions sim;
  MpcConfig mpc;
  TrainConfig train;
  int eval_horizon = 20;
  int cert_n_max = 40;
  std::vector<int> cert_n_list = {1, 5, 10, 20, 40};
  double compare_min_reduction = 0.4;
  double compare_skip = 5.0;                   // seconds of start-up transient left out of E_xy, E_z
  std::vector<RefKind> compare_references;     // empty: sim.reference only

  AppConfig();
  /// Cross-field checks; throws ConfigError.
  void validate() const;
  /// Seeds the reference generator and the trainer.
  void set_seed(std::uint64_t seed);
};

/// Sets one key; ConfigError for unknown keys or unparsable values.
void apply_setting(AppConfig& cfg, const std::string& key, const std::string& value);

/// Parses config text on top of the defaults and validates; errors name the line number.
AppConfig parse_config(std::istream& is);
AppConfig load_config(const std::string& path);

/// All recognised keys, sorted.
std::vector<std::string> config_keys();

}  // namespace npred
