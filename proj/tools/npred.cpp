#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "npred/certificate.hpp"
#include "npred/config.hpp"
#include "npred/errors.hpp"
#include "npred/labeling.hpp"
#include "npred/metrics.hpp"
#include "npred/model_io.hpp"
#include "npred/npmpc.hpp"
#include "npred/plot.hpp"
#include "npred/trainer.hpp"
#include "npred/trajectory_log.hpp"

namespace fs = std::filesystem;
using namespace npred;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheck = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key = value config file");
  sub->add_option("--seed", c.seed, "seed for the reference generator and the trainer");
  sub->add_option("--out-dir", c.out_dir, "output directory");
  sub->add_option("overrides", c.overrides, "section.key=value settings applied after the config file");
}

AppConfig resolve(const Common& c) {
  AppConfig cfg = c.config.empty() ? AppConfig{} : load_config(c.config);
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      return s;
    };
    apply_setting(cfg, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  if (c.seed) cfg.set_seed(*c.seed);
  cfg.validate();
  fs::create_directories(c.out_dir);
  return cfg;
}

std::string out_path(const Common& c, const std::string& name) { return (fs::path(c.out_dir) / name).string(); }

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  return os;
}

std::vector<std::vector<LabeledSample>> read_label_files(const std::vector<std::string>& paths) {
  std::vector<std::vector<LabeledSample>> out;
  for (const auto& p : paths) out.push_back(read_labels_csv_file(p));
  return out;
}

const char* kRmseHeader = "RMSE_Fx,RMSE_Fy,RMSE_Fz,RMSE_tx,RMSE_ty,RMSE_tz,RMSE_Fxy,RMSE_txy,RMSE_F,RMSE_tau,samples";

std::string rmse_row(const RmseReport& r) {
  std::string s;
  for (double a : r.axis) s += format_double(a) + ",";
  s += format_double(r.f_xy) + "," + format_double(r.tau_xy) + "," + format_double(r.f) + "," +
       format_double(r.tau) + "," + std::to_string(r.samples);
  return s;
}

void write_eval_report(const std::string& path, const std::vector<std::pair<std::string, EvalReport>>& reps) {
  auto os = open_out(path);
  os << "set,mode,horizon," << kRmseHeader << '\n';
  for (const auto& [name, r] : reps) {
    os << name << ",one_step,1," << rmse_row(r.one_step) << '\n';
    os << name << ",multi_step," << r.horizon << ',' << rmse_row(r.multi_step) << '\n';
  }
}

/// Columns of a CSV file by header name.
std::map<std::string, std::vector<double>> read_columns(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw SchemaError(path + ": empty file");
  const auto header = split_csv_line(line);
  std::map<std::string, std::vector<double>> cols;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw SchemaError(path + ": row " + std::to_string(row) + " has the wrong width");
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto v = parse_double(f[i]);
      cols[header[i]].push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
    }
  }
  if (cols.empty()) throw SchemaError(path + ": no rows");
  return cols;
}

const std::vector<double>& column(const std::map<std::string, std::vector<double>>& cols, const std::string& name,
                                  const std::string& path) {
  const auto it = cols.find(name);
  if (it == cols.end()) throw SchemaError(path + ": missing column " + name);
  return it->second;
}

std::vector<Wrench> wrench_columns(const std::map<std::string, std::vector<double>>& cols, const std::string& suffix,
                                   const std::string& path) {
  static const char* names[] = {"fex", "fey", "fez", "tex", "tey", "tez"};
  std::vector<const std::vector<double>*> c;
  for (const char* n : names) c.push_back(&column(cols, std::string(n) + suffix, path));
  std::vector<Wrench> out(c[0]->size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].f_e = Vec3((*c[0])[k], (*c[1])[k], (*c[2])[k]);
    out[k].tau_e = Vec3((*c[3])[k], (*c[4])[k], (*c[5])[k]);
  }
  return out;
}

std::size_t skip_rows(const AppConfig& cfg) {
  return static_cast<std::size_t>(cfg.compare_skip * cfg.sim.rate + 0.5);
}

struct LoopSummary {
  TrackingError track;
  RmseReport wrench;
  double median_solve_ms = 0.0;
  double median_refit_ms = 0.0;
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

LoopSummary summarize(const RolloutResult& r, std::size_t skip) {
  LoopSummary s;
  s.track = tracking_rmse(r.log.states, r.reference, skip);
  std::vector<Wrench> pred, truth;
  std::vector<double> solve, refit;
  for (std::size_t k = skip; k < r.log.size(); ++k) {
    pred.push_back(r.diagnostics[k].chi_hat);
    truth.push_back(r.log.wrenches[k]);
    solve.push_back(r.diagnostics[k].solve_ms);
    refit.push_back(r.diagnostics[k].refit_ms);
  }
  s.wrench = rmse_wrench(pred, truth);
  s.median_solve_ms = median(solve);
  s.median_refit_ms = median(refit);
  return s;
}

int cmd_simulate(const Common& c) {
  const AppConfig cfg = resolve(c);
  NpMpcController ctrl(NominalParams::from_plant(cfg.plant), cfg.mpc, cfg.sim.reference);
  const TrajectoryLog log = collect_dataset(ctrl, cfg.plant, cfg.sim);
  const std::string path = out_path(c, "log.csv");
  write_log_csv(path, log);
  std::printf("wrote %zu rows to %s\n", log.size(), path.c_str());
  if (log.failed) throw NumericalError("closed loop diverged; log truncated");
  return 0;
}

int cmd_label(const Common& c, const std::string& log_path, const std::string& source) {
  const AppConfig cfg = resolve(c);
  DerivativeSource src = DerivativeSource::kAuto;
  if (source == "fd") src = DerivativeSource::kFiniteDifference;
  else if (source == "exact") src = DerivativeSource::kExact;
  else if (source != "auto") throw ConfigError("--derivatives must be auto, exact or fd");
  const TrajectoryLog log = ingest_flight_log_file(log_path);
  const auto labels = label_log(log, cfg.plant.nominal(), src);
  const std::string path = out_path(c, "labels.csv");
  write_labels_csv(path, labels);
  std::printf("wrote %zu labels to %s\n", labels.size(), path.c_str());
  return 0;
}

int cmd_train(const Common& c, const std::vector<std::string>& labels, const std::vector<std::string>& eval_labels) {
  const AppConfig cfg = resolve(c);
  const auto logs = read_label_files(labels);
  const TrainedModel tm = train(logs, cfg.train);
  save_model(out_path(c, "model.json"), {tm.model, tm.config_hash, tm.data_hash});
  write_loss_curve(out_path(c, "loss_curve.csv"), tm.curve);
  std::vector<std::pair<std::string, EvalReport>> reps;
  const auto& eval_paths = eval_labels.empty() ? labels : eval_labels;
  const auto eval_logs = eval_labels.empty() ? logs : read_label_files(eval_labels);
  for (std::size_t i = 0; i < eval_logs.size(); ++i) {
    reps.emplace_back(fs::path(eval_paths[i]).stem().string(), evaluate(tm.model, eval_logs[i], cfg.eval_horizon));
  }
  write_eval_report(out_path(c, "eval_report.csv"), reps);
  const auto& last = tm.curve.back().loss;
  std::printf("trained %zu epochs, final L = %.6g (fwd %.4g, bwd %.4g, rec %.4g), Lipschitz bound %.4g\n",
              tm.curve.size(), last.total, last.fwd, last.bwd, last.rec, tm.lipschitz_bound);
  return 0;
}

int cmd_eval(const Common& c, const std::string& model_path, const std::vector<std::string>& labels) {
  const AppConfig cfg = resolve(c);
  const LiftedModel model = load_model(model_path).model;
  std::vector<std::pair<std::string, EvalReport>> reps;
  for (const auto& p : labels) {
    const auto log = read_labels_csv_file(p);
    reps.emplace_back(fs::path(p).stem().string(), evaluate(model, log, cfg.eval_horizon));
  }
  write_eval_report(out_path(c, "eval_report.csv"), reps);
  const EvalReport& first = reps.front().second;
  auto os = open_out(out_path(c, "eval_series.csv"));
  os << "t,fex,fey,fez,tex,tey,tez,fex_hat,fey_hat,fez_hat,tex_hat,tey_hat,tez_hat\n";
  for (std::size_t k = 0; k < first.t.size(); ++k) {
    os << format_double(first.t[k]);
    const Vec6 a = first.truth[k].stacked(), b = first.one_step_pred[k].stacked();
    for (int i = 0; i < 6; ++i) os << ',' << format_double(a(i));
    for (int i = 0; i < 6; ++i) os << ',' << format_double(b(i));
    os << '\n';
  }
  for (const auto& [name, r] : reps) {
    std::printf("%s: one-step RMSE_F %.4f RMSE_tau %.5f, %d-step RMSE_F %.4f\n", name.c_str(), r.one_step.f,
                r.one_step.tau, r.horizon, r.multi_step.f);
  }
  return 0;
}

int cmd_certify(const Common& c, const std::string& model_path, const std::vector<std::string>& labels,
                const std::string& check_path) {
  const AppConfig cfg = resolve(c);
  const LiftedModel model = load_model(model_path).model;
  auto sets = read_label_files(labels);
  std::vector<LabeledSample> check;
  if (check_path.empty()) {
    check = sets.back();
  } else {
    check = read_labels_csv_file(check_path);
    sets.push_back(check);
  }
  const BoundCertificate cert = build_certificate(model, sets, cfg.cert_n_max);
  const auto rows = verify_global_bound(model, cert, check, cfg.cert_n_list);
  write_certificate(out_path(c, "certificate.json"), cert);
  write_bound_report(out_path(c, "bound_report.csv"), rows);
  std::printf("c = %.6g, spectral radius %.4f%s\n", cert.c, cert.spectral_radius, cert.stable ? "" : " (unstable)");
  for (const auto& r : rows) {
    std::printf("n = %d: %d starts, %d violations, max ratio %.4g\n", r.n, r.starts, r.violations, r.max_ratio);
  }
  return 0;
}

int cmd_mpc_run(const Common& c, const std::string& model_path) {
  const AppConfig cfg = resolve(c);
  std::optional<LiftedModel> model;
  if (!model_path.empty()) model = load_model(model_path).model;
  const RolloutResult r = run_closed_loop(cfg.plant, cfg.mpc, model, cfg.sim);
  write_closed_loop_csv(out_path(c, "closed_loop.csv"), r);
  write_timing_csv(out_path(c, "timing.csv"), r);
  const LoopSummary s = summarize(r, std::min(skip_rows(cfg), r.log.size()));
  std::printf("%s MPC on %s: E_xy %.4f m, E_z %.4f m, median solve %.2f ms\n", model ? "NP" : "nominal",
              to_string(cfg.sim.reference.kind).c_str(), s.track.e_xy, s.track.e_z, s.median_solve_ms);
  if (!r.failure.empty()) throw NumericalError(r.failure);
  return 0;
}

int cmd_compare(const Common& c, const std::string& model_path, bool check) {
  const AppConfig cfg = resolve(c);
  const LiftedModel model = load_model(model_path).model;
  std::vector<RefKind> refs = cfg.compare_references;
  if (refs.empty()) refs.push_back(cfg.sim.reference.kind);
  auto os = open_out(out_path(c, "compare.csv"));
  os << "reference,controller,E_xy,E_z,RMSE_F,RMSE_tau,reduction_xy,reduction_z\n";
  bool pass = true;
  for (RefKind kind : refs) {
    RolloutOptions opts = cfg.sim;
    opts.reference.kind = kind;
    const std::string name = to_string(kind);
    const RolloutResult nom = run_closed_loop(cfg.plant, cfg.mpc, std::nullopt, opts);
    const RolloutResult np = run_closed_loop(cfg.plant, cfg.mpc, model, opts);
    write_closed_loop_csv(out_path(c, "closed_loop_" + name + "_nominal.csv"), nom);
    write_closed_loop_csv(out_path(c, "closed_loop_" + name + "_np.csv"), np);
    for (const auto* r : {&nom, &np}) {
      if (!r->failure.empty()) {
        std::printf("%s: %s run failed: %s\n", name.c_str(), r == &nom ? "nominal" : "NP", r->failure.c_str());
      }
    }
    const std::size_t skip = skip_rows(cfg);
    if (nom.log.size() <= skip || np.log.size() <= skip) throw NumericalError(name + ": closed loop ended early");
    const LoopSummary a = summarize(nom, skip), b = summarize(np, skip);
    const double red_xy = 1.0 - b.track.e_xy / a.track.e_xy;
    const double red_z = 1.0 - b.track.e_z / a.track.e_z;
    const bool ok = nom.failure.empty() && np.failure.empty() && red_xy >= cfg.compare_min_reduction &&
                    red_z >= cfg.compare_min_reduction;
    pass = pass && ok;
    os << name << ",nominal," << format_double(a.track.e_xy) << ',' << format_double(a.track.e_z) << ','
       << format_double(a.wrench.f) << ',' << format_double(a.wrench.tau) << ",,\n";
    os << name << ",np," << format_double(b.track.e_xy) << ',' << format_double(b.track.e_z) << ','
       << format_double(b.wrench.f) << ',' << format_double(b.wrench.tau) << ',' << format_double(red_xy) << ','
       << format_double(red_z) << '\n';
    std::printf("%-10s nominal E_xy %.4f E_z %.4f | NP E_xy %.4f E_z %.4f | reduction %.0f%% / %.0f%% %s\n",
                name.c_str(), a.track.e_xy, a.track.e_z, b.track.e_xy, b.track.e_z, 100.0 * red_xy, 100.0 * red_z,
                ok ? "ok" : "below threshold");
  }
  if (check && !pass) {
    std::fprintf(stderr, "compare: reduction below %.0f%%\n", 100.0 * cfg.compare_min_reduction);
    return kExitCheck;
  }
  return 0;
}

int cmd_plot(const Common& c, const std::string& kind, const std::vector<std::string>& inputs,
             const std::string& stem) {
  resolve(c);
  if (inputs.empty()) throw ConfigError("plot: no input files");
  std::vector<Panel> panels;
  if (kind == "wrench") {
    const auto cols = read_columns(inputs.front());
    panels = wrench_panels(column(cols, "t", inputs.front()), wrench_columns(cols, "", inputs.front()),
                           wrench_columns(cols, "_hat", inputs.front()));
  } else if (kind == "xy") {
    std::vector<NamedPath> paths;
    NamedPath ref{"reference", {}};
    for (const auto& p : inputs) {
      const auto cols = read_columns(p);
      const auto& x = column(cols, "px", p);
      const auto& y = column(cols, "py", p);
      const auto& z = column(cols, "pz", p);
      NamedPath path{fs::path(p).stem().string(), {}};
      for (std::size_t k = 0; k < x.size(); ++k) path.points.emplace_back(x[k], y[k], z[k]);
      paths.push_back(std::move(path));
      if (ref.points.empty() && cols.count("x_ref")) {
        const auto& xr = column(cols, "x_ref", p);
        const auto& yr = column(cols, "y_ref", p);
        const auto& zr = column(cols, "z_ref", p);
        for (std::size_t k = 0; k < xr.size(); ++k) ref.points.emplace_back(xr[k], yr[k], zr[k]);
      }
    }
    if (ref.points.empty()) throw SchemaError("plot: no input carries reference columns");
    panels.push_back(xy_panel(paths, ref));
  } else {
    throw ConfigError("--kind must be wrench or xy");
  }
  const std::string base = out_path(c, stem.empty() ? kind : stem);
  write_plot(base, panels);
  std::printf("wrote %s.svg and %s.csv\n", base.c_str(), base.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wrench prediction and NP-MPC toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string log_path, derivatives = "auto", model_path, check_labels, plot_kind = "xy", stem;
  std::vector<std::string> labels, eval_labels, inputs;
  bool check = false;

  auto* simulate = app.add_subcommand("simulate", "collect a flight log with nominal MPC");
  add_common(simulate, common);

  auto* label = app.add_subcommand("label", "label a flight log with external wrenches");
  add_common(label, common);
  label->add_option("--log", log_path, "flight log CSV")->required();
  label->add_option("--derivatives", derivatives, "auto, exact or fd");

  auto* train_cmd = app.add_subcommand("train", "train the lifted wrench model");
  add_common(train_cmd, common);
  train_cmd->add_option("--labels", labels, "labeled CSV files")->required();
  train_cmd->add_option("--eval-labels", eval_labels, "labeled CSV files for the evaluation report");

  auto* eval = app.add_subcommand("eval", "one-step and multi-step prediction errors");
  add_common(eval, common);
  eval->add_option("--model", model_path, "model JSON")->required();
  eval->add_option("--labels", labels, "labeled CSV files")->required();

  auto* certify = app.add_subcommand("certify", "build and check the global error bound");
  add_common(certify, common);
  certify->add_option("--model", model_path, "model JSON")->required();
  certify->add_option("--labels", labels, "labeled CSV files the bound constants are taken over")->required();
  certify->add_option("--check-labels", check_labels, "held-out labeled CSV to verify on (default: last --labels)");

  auto* mpc_run = app.add_subcommand("mpc-run", "closed-loop run of nominal or NP-MPC");
  add_common(mpc_run, common);
  mpc_run->add_option("--model", model_path, "model JSON; omit for nominal MPC");

  auto* compare = app.add_subcommand("compare", "nominal against NP-MPC under the same plant");
  add_common(compare, common);
  compare->add_option("--model", model_path, "model JSON")->required();
  compare->add_flag("--check", check, "exit 4 when a reduction is below compare.min_reduction");

  auto* plot = app.add_subcommand("plot", "SVG and CSV plot data from closed-loop or eval CSVs");
  add_common(plot, common);
  plot->add_option("--kind", plot_kind, "wrench or xy");
  plot->add_option("--input", inputs, "input CSV files")->required();
  plot->add_option("--name", stem, "output file stem (default: the kind)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(common);
    if (*label) return cmd_label(common, log_path, derivatives);
    if (*train_cmd) return cmd_train(common, labels, eval_labels);
    if (*eval) return cmd_eval(common, model_path, labels);
    if (*certify) return cmd_certify(common, model_path, labels, check_labels);
    if (*mpc_run) return cmd_mpc_run(common, model_path);
    if (*compare) return cmd_compare(common, model_path, check);
    if (*plot) return cmd_plot(common, plot_kind, inputs, stem);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
