#include "npred/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "npred/errors.hpp"
#include "npred/trajectory_log.hpp"

namespace npred {

namespace {

using Json = nlohmann::ordered_json;

Json flat(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

Json flat(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

const Json& field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw SchemaError(std::string("model file: missing field ") + name);
  return j.at(name);
}

Eigen::MatrixXd matrix(const Json& a, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows * cols) {
    throw SchemaError(std::string("model file: ") + name + " has the wrong size");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a[r * cols + c].get<double>();
  return m;
}

Vec6 vec6(const Json& a, const char* name) { return matrix(a, 6, 1, name); }

}  // namespace

std::string model_to_json(const ModelFile& file) {
  const LiftedModel& m = file.model;
  Json j;
  j["version"] = kModelFormatVersion;
  j["K"] = m.K();
  j["zeta_dim"] = kZetaDim;
  j["gamma"] = m.embedding.gamma;
  j["layer_dims"] = m.embedding.layer_dims();
  Json w = Json::array(), b = Json::array();
  for (const auto& W : m.embedding.weights) w.push_back(flat(W));
  for (const auto& v : m.embedding.biases) b.push_back(flat(v));
  j["weights"] = w;
  j["biases"] = b;
  j["C"] = flat(m.C);
  j["A"] = flat(m.A);
  j["B"] = flat(m.B);
  j["t_s"] = m.t_s;
  j["window_T"] = m.window_T;
  j["ridge"] = m.ridge;
  j["norm_stats"] = {{"chi_mean", flat(Eigen::VectorXd(m.norm.chi_mean))},
                     {"chi_scale", flat(Eigen::VectorXd(m.norm.chi_scale))},
                     {"zeta_mean", flat(Eigen::VectorXd(m.norm.zeta_mean))},
                     {"zeta_scale", flat(Eigen::VectorXd(m.norm.zeta_scale))}};
  j["config_hash"] = file.config_hash;
  j["data_hash"] = file.data_hash;
  return j.dump(2) + "\n";
}

ModelFile model_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }
  try {
    if (field(j, "version").get<int>() != kModelFormatVersion) {
      throw SchemaError("model file: unsupported version " + field(j, "version").dump());
    }
    if (field(j, "zeta_dim").get<int>() != kZetaDim) throw SchemaError("model file: zeta_dim must be 6");
    const auto dims = field(j, "layer_dims").get<std::vector<int>>();
    if (dims.size() < 2) throw SchemaError("model file: layer_dims needs at least two entries");
    const int K = field(j, "K").get<int>();
    if (dims.back() != K) throw SchemaError("model file: K does not match layer_dims");

    ModelFile out;
    LiftedModel& m = out.model;
    m.embedding.gamma = field(j, "gamma").get<double>();
    const Json& w = field(j, "weights");
    const Json& b = field(j, "biases");
    const std::size_t layers = dims.size() - 1;
    if (!w.is_array() || w.size() != layers) throw SchemaError("model file: weights do not match layer_dims");
    if (!b.is_array() || (b.size() != 0 && b.size() != layers - 1)) {
      throw SchemaError("model file: biases do not match layer_dims");
    }
    for (std::size_t l = 0; l < layers; ++l) {
      m.embedding.weights.push_back(matrix(w[l], dims[l + 1], dims[l], "weights"));
    }
    for (std::size_t l = 0; l < b.size(); ++l) {
      m.embedding.biases.push_back(matrix(b[l], dims[l + 1], 1, "biases"));
    }
    m.C = matrix(field(j, "C"), kWrenchDim, K, "C");
    m.A = matrix(field(j, "A"), K, K, "A");
    m.B = matrix(field(j, "B"), K, kZetaDim, "B");
    m.t_s = field(j, "t_s").get<double>();
    m.window_T = field(j, "window_T").get<int>();
    m.ridge = field(j, "ridge").get<double>();
    const Json& ns = field(j, "norm_stats");
    m.norm.chi_mean = vec6(field(ns, "chi_mean"), "chi_mean");
    m.norm.chi_scale = vec6(field(ns, "chi_scale"), "chi_scale");
    m.norm.zeta_mean = vec6(field(ns, "zeta_mean"), "zeta_mean");
    m.norm.zeta_scale = vec6(field(ns, "zeta_scale"), "zeta_scale");
    out.config_hash = field(j, "config_hash").get<std::string>();
    out.data_hash = field(j, "data_hash").get<std::string>();
    try {
      m.embedding.validate();
      m.validate();
    } catch (const ConfigError& e) {
      throw SchemaError(std::string("model file: ") + e.what());
    }
    return out;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }
}

void save_model(const std::string& path, const ModelFile& file) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << model_to_json(file);
}

ModelFile load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open model file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return model_from_json(ss.str());
}

void write_loss_curve(const std::string& path, const std::vector<EpochRecord>& curve) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << "epoch,L,L_fwd,L_bwd,L_rec\n";
  for (const auto& e : curve) {
    os << e.epoch << ',' << format_double(e.loss.total) << ',' << format_double(e.loss.fwd) << ','
       << format_double(e.loss.bwd) << ',' << format_double(e.loss.rec) << '\n';
  }
}

}  // namespace npred
