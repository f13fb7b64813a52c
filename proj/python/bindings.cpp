#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "npred/certificate.hpp"
#include "npred/config.hpp"
#include "npred/errors.hpp"
#include "npred/labeling.hpp"
#include "npred/lls.hpp"
#include "npred/metrics.hpp"
#include "npred/model_io.hpp"
#include "npred/npmpc.hpp"
#include "npred/trainer.hpp"
#include "npred/trajectory_log.hpp"

namespace py = pybind11;
using namespace npred;
using Eigen::MatrixXd;

namespace {

MatrixXd states_matrix(const std::vector<QuadState>& states) {
  MatrixXd out(states.size(), 13);
  for (std::size_t k = 0; k < states.size(); ++k) out.row(k) = to_vector(states[k]).transpose();
  return out;
}

MatrixXd inputs_matrix(const std::vector<ControlInput>& inputs) {
  MatrixXd out(inputs.size(), 4);
  for (std::size_t k = 0; k < inputs.size(); ++k) out.row(k) = inputs[k].stacked().transpose();
  return out;
}

MatrixXd wrench_matrix(const std::vector<Wrench>& w) {
  MatrixXd out(w.size(), 6);
  for (std::size_t k = 0; k < w.size(); ++k) out.row(k) = w[k].stacked().transpose();
  return out;
}

std::vector<Wrench> wrench_rows(const MatrixXd& m) {
  if (m.cols() != 6) throw ConfigError("wrench arrays need 6 columns");
  std::vector<Wrench> out(m.rows());
  for (Eigen::Index k = 0; k < m.rows(); ++k) out[k] = Wrench::from_stacked(m.row(k).transpose());
  return out;
}

py::dict rmse_dict(const RmseReport& r) {
  py::dict d;
  static const char* axes[] = {"Fx", "Fy", "Fz", "tau_x", "tau_y", "tau_z"};
  for (int i = 0; i < 6; ++i) d[axes[i]] = r.axis[i];
  d["F_xy"] = r.f_xy;
  d["tau_xy"] = r.tau_xy;
  d["F"] = r.f;
  d["tau"] = r.tau;
  d["samples"] = r.samples;
  return d;
}

AppConfig config_from(const std::string& text, const std::map<std::string, std::string>& overrides) {
  std::istringstream is(text);
  AppConfig cfg = parse_config(is);
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_npred, m) {
  m.doc() = "Learned wrench prediction and NP-MPC for a quadrotor with a slung payload";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<AppConfig>(m, "Config")
      .def(py::init([](const std::string& text, const std::map<std::string, std::string>& overrides) {
             return config_from(text, overrides);
           }),
           py::arg("text") = "", py::arg("overrides") = std::map<std::string, std::string>{})
      .def("set", [](AppConfig& c, const std::string& key, const std::string& value) { apply_setting(c, key, value); })
      .def("validate", &AppConfig::validate)
      .def("set_seed", &AppConfig::set_seed)
      .def_static("keys", &config_keys);

  py::class_<TrajectoryLog>(m, "FlightLog")
      .def_readonly("t", &TrajectoryLog::t)
      .def_property_readonly("states", [](const TrajectoryLog& l) { return states_matrix(l.states); })
      .def_property_readonly("inputs", [](const TrajectoryLog& l) { return inputs_matrix(l.inputs); })
      .def_property_readonly("wrenches", [](const TrajectoryLog& l) { return wrench_matrix(l.wrenches); })
      .def_readonly("failed", &TrajectoryLog::failed)
      .def("__len__", &TrajectoryLog::size)
      .def("to_csv", [](const TrajectoryLog& l) {
        std::ostringstream os;
        write_log_csv(os, l);
        return os.str();
      });

  m.def("read_flight_log", [](const std::string& text) {
    std::istringstream is(text);
    return ingest_flight_log(is);
  }, "Parses and validates flight log CSV text.");

  m.def("simulate", [](const AppConfig& cfg) {
    NpMpcController ctrl(NominalParams::from_plant(cfg.plant), cfg.mpc, cfg.sim.reference);
    return collect_dataset(ctrl, cfg.plant, cfg.sim);
  }, py::arg("config"), "Flies the configured reference with nominal MPC and returns the log.");

  py::class_<LabeledSample>(m, "LabeledSample")
      .def_readonly("t", &LabeledSample::t)
      .def_property_readonly("chi", [](const LabeledSample& s) { return Vec6(s.chi.stacked()); })
      .def_readonly("zeta", &LabeledSample::zeta);

  m.def("label", [](const TrajectoryLog& log, const AppConfig& cfg, bool finite_difference) {
    return label_log(log, cfg.plant.nominal(),
                     finite_difference ? DerivativeSource::kFiniteDifference : DerivativeSource::kAuto);
  }, py::arg("log"), py::arg("config"), py::arg("finite_difference") = true);

  m.def("labels_to_arrays", [](const std::vector<LabeledSample>& labels) {
    MatrixXd chi(labels.size(), 6), zeta(labels.size(), 6);
    Eigen::VectorXd t(labels.size());
    for (std::size_t k = 0; k < labels.size(); ++k) {
      t(k) = labels[k].t;
      chi.row(k) = labels[k].chi.stacked().transpose();
      zeta.row(k) = labels[k].zeta.transpose();
    }
    return py::make_tuple(t, chi, zeta);
  });

  py::class_<LiftedModel>(m, "Model")
      .def_property_readonly("K", &LiftedModel::K)
      .def_readonly("A", &LiftedModel::A)
      .def_readonly("B", &LiftedModel::B)
      .def_readonly("C", &LiftedModel::C)
      .def_property_readonly("spectral_radius", &LiftedModel::spectral_radius)
      .def_property_readonly("lipschitz_bound", [](const LiftedModel& mdl) { return lipschitz_certificate(mdl.embedding); })
      .def("embed", [](const LiftedModel& mdl, const Vec6& chi) {
        return embed(mdl.norm.normalize_chi(chi), mdl.embedding);
      }, "Lifted coordinates of a wrench given in physical units.")
      .def("save", [](const LiftedModel& mdl, const std::string& path) { save_model(path, {mdl, "", ""}); })
      .def_static("load", [](const std::string& path) { return load_model(path).model; });

  m.def("train", [](const std::vector<std::vector<LabeledSample>>& logs, const AppConfig& cfg) {
    const TrainedModel tm = [&] {
      py::gil_scoped_release release;
      return train(logs, cfg.train);
    }();
    py::list curve;
    for (const auto& e : tm.curve) curve.append(py::make_tuple(e.epoch, e.loss.total, e.loss.fwd, e.loss.bwd, e.loss.rec));
    return py::make_tuple(tm.model, curve);
  }, py::arg("logs"), py::arg("config"), "Returns (model, [(epoch, L, L_fwd, L_bwd, L_rec), ...]).");

  m.def("evaluate", [](const LiftedModel& model, const std::vector<LabeledSample>& labels, int horizon) {
    const EvalReport r = evaluate(model, labels, horizon);
    py::dict d;
    d["one_step"] = rmse_dict(r.one_step);
    d["multi_step"] = rmse_dict(r.multi_step);
    d["horizon"] = r.horizon;
    return d;
  }, py::arg("model"), py::arg("labels"), py::arg("horizon") = 20);

  m.def("rmse_wrench", [](const MatrixXd& pred, const MatrixXd& truth) {
    return rmse_dict(rmse_wrench(wrench_rows(pred), wrench_rows(truth)));
  }, py::arg("pred"), py::arg("truth"), "Rows are samples, columns Fx..tau_z.");

  m.def("fit_ab", [](const MatrixXd& Z0, const MatrixXd& Z1, const MatrixXd& U0, double ridge) {
    const LsFit f = fit_AB(Z0, Z1, U0, ridge);
    return py::make_tuple(f.A, f.B);
  }, py::arg("z0"), py::arg("z1"), py::arg("u0"), py::arg("ridge") = 1e-8, "Columns are samples.");
  m.def("rollout_forward", &rollout_forward, py::arg("A"), py::arg("B"), py::arg("z0"), py::arg("zeta"), py::arg("n"));
  m.def("rollout_backward", &rollout_backward, py::arg("A"), py::arg("B"), py::arg("z_end"), py::arg("zeta"),
        py::arg("n"));

  m.def("certify", [](const LiftedModel& model, const std::vector<std::vector<LabeledSample>>& sets,
                      const std::vector<LabeledSample>& check, int n_max, const std::vector<int>& n_list) {
    const BoundCertificate cert = build_certificate(model, sets, n_max);
    py::list rows;
    for (const auto& r : verify_global_bound(model, cert, check, n_list)) {
      rows.append(py::make_tuple(r.n, r.starts, r.violations, r.max_ratio));
    }
    return py::make_tuple(py::module_::import("json").attr("loads")(certificate_to_json(cert)), rows);
  }, py::arg("model"), py::arg("sets"), py::arg("check"), py::arg("n_max") = 40,
     py::arg("n_list") = std::vector<int>{1, 5, 10, 20, 40},
     "Returns (certificate dict, [(n, starts, violations, max_ratio), ...]).");

  m.def("run_closed_loop", [](const AppConfig& cfg, std::optional<LiftedModel> model) {
    const RolloutResult r = [&] {
      py::gil_scoped_release release;
      return run_closed_loop(cfg.plant, cfg.mpc, model, cfg.sim);
    }();
    const std::size_t skip = std::min(r.log.size(), static_cast<std::size_t>(cfg.compare_skip * cfg.sim.rate + 0.5));
    const TrackingError e = tracking_rmse(r.log.states, r.reference, skip);
    std::vector<Wrench> hat;
    std::vector<double> solve_ms;
    for (const auto& d : r.diagnostics) {
      hat.push_back(d.chi_hat);
      solve_ms.push_back(d.solve_ms);
    }
    py::dict d;
    d["log"] = r.log;
    d["reference"] = states_matrix(r.reference);
    d["predicted_wrenches"] = wrench_matrix(hat);
    d["solve_ms"] = solve_ms;
    d["E_xy"] = e.e_xy;
    d["E_z"] = e.e_z;
    d["failure"] = r.failure;
    return d;
  }, py::arg("config"), py::arg("model") = py::none(),
     "Nominal MPC when model is None, NP-MPC otherwise. E_xy and E_z skip compare.skip seconds.");
}
