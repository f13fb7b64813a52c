#include "npred/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "npred/errors.hpp"
#include "npred/trajectory_log.hpp"

namespace npred {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  const auto d = parse_double(trim(v));
  if (!d) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

long long to_int(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v, std::size_t n) {
  std::vector<double> out;
  for (const auto& item : split_csv_line(v)) out.push_back(to_double(key, item));
  if (n && out.size() != n) {
    throw ConfigError(key + ": expected " + std::to_string(n) + " values, got " + std::to_string(out.size()));
  }
  return out;
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
  const auto l = to_list(key, v, 3);
  return {l[0], l[1], l[2]};
}

Eigen::VectorXd to_vector(const std::string& key, const std::string& v, std::size_t n) {
  const auto l = to_list(key, v, n);
  return Eigen::Map<const Eigen::VectorXd>(l.data(), static_cast<Eigen::Index>(l.size()));
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& item : split_csv_line(v)) out.push_back(static_cast<int>(to_int(key, item)));
  return out;
}

PlantEvent& event(AppConfig& c) {
  if (c.sim.events.empty()) c.sim.events.emplace_back().time = -1.0;
  return c.sim.events.front();
}

using Setter = std::function<void(AppConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [&t](const std::string& k, auto field) {
      t[k] = [field](AppConfig& c, const std::string& key, const std::string& v) { field(c) = to_double(key, v); };
    };
    auto integer = [&t](const std::string& k, auto field) {
      t[k] = [field](AppConfig& c, const std::string& key, const std::string& v) {
        field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(to_int(key, v));
      };
    };
    auto flag = [&t](const std::string& k, auto field) {
      t[k] = [field](AppConfig& c, const std::string& key, const std::string& v) { field(c) = to_bool(key, v); };
    };
    auto vec3 = [&t](const std::string& k, auto field) {
      t[k] = [field](AppConfig& c, const std::string& key, const std::string& v) { field(c) = to_vec3(key, v); };
    };

    num("plant.m", [](AppConfig& c) -> double& { return c.plant.m; });
    t["plant.J"] = [](AppConfig& c, const std::string& key, const std::string& v) {
      c.plant.J = to_vec3(key, v).asDiagonal();
    };
    num("plant.g", [](AppConfig& c) -> double& { return c.plant.g; });
    num("plant.m_p", [](AppConfig& c) -> double& { return c.plant.m_p; });
    num("plant.l", [](AppConfig& c) -> double& { return c.plant.l; });
    vec3("plant.r_att", [](AppConfig& c) -> Vec3& { return c.plant.r_att; });
    vec3("plant.D_v", [](AppConfig& c) -> Vec3& { return c.plant.D_v; });
    vec3("plant.D_omega", [](AppConfig& c) -> Vec3& { return c.plant.D_omega; });
    num("plant.f_max", [](AppConfig& c) -> double& { return c.plant.f_max; });
    num("plant.tau_max", [](AppConfig& c) -> double& { return c.plant.tau_max; });

    num("sim.duration", [](AppConfig& c) -> double& { return c.sim.duration; });
    num("sim.rate", [](AppConfig& c) -> double& { return c.sim.rate; });
    num("sim.substep", [](AppConfig& c) -> double& { return c.sim.substep; });
    num("sim.position_bound", [](AppConfig& c) -> double& { return c.sim.position_bound; });
    integer("sim.max_infeasible_ticks", [](AppConfig& c) -> int& { return c.sim.max_infeasible_ticks; });
    t["sim.reference"] = [](AppConfig& c, const std::string&, const std::string& v) {
      c.sim.reference.kind = parse_ref_kind(trim(v));
    };
    num("sim.radius", [](AppConfig& c) -> double& { return c.sim.reference.radius; });
    num("sim.speed", [](AppConfig& c) -> double& { return c.sim.reference.speed; });
    num("sim.height", [](AppConfig& c) -> double& { return c.sim.reference.height; });
    vec3("sim.center", [](AppConfig& c) -> Vec3& { return c.sim.reference.center; });
    integer("sim.seed", [](AppConfig& c) -> std::uint64_t& { return c.sim.reference.seed; });
    num("sim.event_time", [](AppConfig& c) -> double& { return event(c).time; });
    num("sim.event_mass", [](AppConfig& c) -> double& { return event(c).payload_mass_delta; });
    vec3("sim.event_kick", [](AppConfig& c) -> Vec3& { return event(c).payload_velocity_kick; });

    integer("mpc.N", [](AppConfig& c) -> int& { return c.mpc.N; });
    num("mpc.dt", [](AppConfig& c) -> double& { return c.mpc.dt; });
    integer("mpc.substeps", [](AppConfig& c) -> int& { return c.mpc.substeps; });
    t["mpc.Q"] = [](AppConfig& c, const std::string& key, const std::string& v) { c.mpc.Q_diag = to_vector(key, v, 12); };
    t["mpc.R"] = [](AppConfig& c, const std::string& key, const std::string& v) { c.mpc.R_diag = to_vector(key, v, 4); };
    num("mpc.terminal_scale", [](AppConfig& c) -> double& { return c.mpc.terminal_scale; });
    num("mpc.f_max", [](AppConfig& c) -> double& { return c.mpc.f_max; });
    num("mpc.tau_max", [](AppConfig& c) -> double& { return c.mpc.tau_max; });
    vec3("mpc.pos_lo", [](AppConfig& c) -> Vec3& { return c.mpc.pos_lo; });
    vec3("mpc.pos_hi", [](AppConfig& c) -> Vec3& { return c.mpc.pos_hi; });
    num("mpc.v_max", [](AppConfig& c) -> double& { return c.mpc.v_max; });
    num("mpc.omega_max", [](AppConfig& c) -> double& { return c.mpc.omega_max; });
    vec3("mpc.terminal_halfwidth", [](AppConfig& c) -> Vec3& { return c.mpc.terminal_halfwidth; });
    flag("mpc.state_boxes", [](AppConfig& c) -> bool& { return c.mpc.state_boxes; });
    flag("mpc.terminal_box", [](AppConfig& c) -> bool& { return c.mpc.terminal_box; });
    integer("mpc.max_sqp_iters", [](AppConfig& c) -> int& { return c.mpc.max_sqp_iters; });
    num("mpc.sqp_tol", [](AppConfig& c) -> double& { return c.mpc.sqp_tol; });
    num("mpc.qp_tol", [](AppConfig& c) -> double& { return c.mpc.qp_tol; });
    t["mpc.injection"] = [](AppConfig& c, const std::string& key, const std::string& v) {
      const std::string s = trim(v);
      if (s == "continuous") c.mpc.injection = WrenchInjection::kContinuous;
      else if (s == "discrete_add") c.mpc.injection = WrenchInjection::kDiscreteAdd;
      else throw ConfigError(key + ": expected continuous or discrete_add, got '" + v + "'");
    };

    num("train.beta_fwd", [](AppConfig& c) -> double& { return c.train.beta_fwd; });
    num("train.beta_bwd", [](AppConfig& c) -> double& { return c.train.beta_bwd; });
    num("train.beta_rec", [](AppConfig& c) -> double& { return c.train.beta_rec; });
    num("train.mu_fwd", [](AppConfig& c) -> double& { return c.train.mu_fwd; });
    num("train.mu_bwd", [](AppConfig& c) -> double& { return c.train.mu_bwd; });
    t["train.discount"] = [](AppConfig& c, const std::string& key, const std::string& v) {
      const std::string s = trim(v);
      if (s == "step") c.train.discount = DiscountMode::kStepIndex;
      else if (s == "trajectory") c.train.discount = DiscountMode::kTrajectoryIndex;
      else throw ConfigError(key + ": expected step or trajectory, got '" + v + "'");
    };
    t["train.fit_gradient"] = [](AppConfig& c, const std::string& key, const std::string& v) {
      const std::string s = trim(v);
      if (s == "full") c.train.fit_gradient = FitGradient::kFull;
      else if (s == "stop") c.train.fit_gradient = FitGradient::kStop;
      else throw ConfigError(key + ": expected full or stop, got '" + v + "'");
    };
    integer("train.epochs", [](AppConfig& c) -> int& { return c.train.epochs; });
    integer("train.batch_size", [](AppConfig& c) -> int& { return c.train.batch_size; });
    integer("train.segment_len", [](AppConfig& c) -> int& { return c.train.segment_len; });
    num("train.learning_rate", [](AppConfig& c) -> double& { return c.train.learning_rate; });
    integer("train.seed", [](AppConfig& c) -> std::uint64_t& { return c.train.seed; });
    num("train.gamma", [](AppConfig& c) -> double& { return c.train.gamma; });
    integer("train.K", [](AppConfig& c) -> int& { return c.train.K; });
    t["train.hidden"] = [](AppConfig& c, const std::string& key, const std::string& v) {
      c.train.hidden = trim(v).empty() ? std::vector<int>{} : to_int_list(key, v);
    };
    integer("train.window_T", [](AppConfig& c) -> int& { return c.train.window_T; });
    num("train.segment_ridge", [](AppConfig& c) -> double& { return c.train.segment_ridge; });
    num("train.ridge", [](AppConfig& c) -> double& { return c.train.ridge; });
    num("train.online_ridge", [](AppConfig& c) -> double& { return c.train.online_ridge; });
    num("train.t_s", [](AppConfig& c) -> double& { return c.train.t_s; });
    integer("train.patience", [](AppConfig& c) -> int& { return c.train.patience; });
    num("train.min_rel_improvement", [](AppConfig& c) -> double& { return c.train.min_rel_improvement; });
    integer("train.nan_retries", [](AppConfig& c) -> int& { return c.train.nan_retries; });

    integer("eval.horizon", [](AppConfig& c) -> int& { return c.eval_horizon; });
    integer("cert.n_max", [](AppConfig& c) -> int& { return c.cert_n_max; });
    t["cert.n_list"] = [](AppConfig& c, const std::string& key, const std::string& v) {
      c.cert_n_list = to_int_list(key, v);
    };
    num("compare.min_reduction", [](AppConfig& c) -> double& { return c.compare_min_reduction; });
    num("compare.skip", [](AppConfig& c) -> double& { return c.compare_skip; });
    t["compare.references"] = [](AppConfig& c, const std::string&, const std::string& v) {
      c.compare_references.clear();
      for (const auto& item : split_csv_line(v)) c.compare_references.push_back(parse_ref_kind(trim(item)));
    };
    return t;
  }();
  return table;
}

}  // namespace

AppConfig::AppConfig() = default;

void AppConfig::validate() const {
  plant.validate();
  mpc.validate();
  train.validate();
  if (!(sim.duration >= 0.0)) throw ConfigError("sim.duration must be non-negative");
  if (!(sim.rate >= 10.0)) throw ConfigError("sim.rate must be at least 10 Hz");
  if (!(sim.substep > 0.0) || sim.substep > 1.0 / sim.rate) throw ConfigError("sim.substep must lie in (0, 1/rate]");
  for (const auto& e : sim.events) {
    if (!(e.time >= 0.0)) throw ConfigError("sim.event_time must be set and non-negative");
  }
  if (eval_horizon < 1) throw ConfigError("eval.horizon must be positive");
  if (cert_n_max < 1) throw ConfigError("cert.n_max must be positive");
  for (int n : cert_n_list) {
    if (n < 0 || n > cert_n_max) throw ConfigError("cert.n_list entries must lie in [0, cert.n_max]");
  }
  if (!(compare_min_reduction >= 0.0 && compare_min_reduction < 1.0)) {
    throw ConfigError("compare.min_reduction must lie in [0, 1)");
  }
  if (!(compare_skip >= 0.0) || compare_skip >= sim.duration) {
    throw ConfigError("compare.skip must lie in [0, sim.duration)");
  }
}

void AppConfig::set_seed(std::uint64_t seed) {
  sim.reference.seed = seed;
  train.seed = seed;
}

void apply_setting(AppConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown key '" + key + "'");
  it->second(cfg, key, value);
}

AppConfig parse_config(std::istream& is) {
  AppConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      apply_setting(cfg, key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  return parse_config(is);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace npred
