#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "npred/errors.hpp"
#include "npred/model_io.hpp"

using namespace npred;

namespace {

ModelFile sample_model() {
  ModelFile f;
  LiftedModel& m = f.model;
  m.embedding = init_mlp({6, 7, 5}, 3.0, true, 11);
  m.C = Eigen::MatrixXd::Random(6, 5);
  m.A = 0.3 * Eigen::MatrixXd::Random(5, 5);
  m.B = Eigen::MatrixXd::Random(5, 6);
  m.window_T = 33;
  m.ridge = 0.5;
  m.norm.chi_scale << 1.5, 1.5, 1.5, 0.1, 0.1, 0.1;
  m.norm.zeta_scale << 0.7, 0.7, 0.7, 2.0, 2.0, 2.0;
  f.config_hash = "abc";
  f.data_hash = "def";
  return f;
}

}  // namespace

TEST_CASE("model JSON round-trips bit-exactly") {
  const ModelFile f = sample_model();
  const std::string text = model_to_json(f);
  const ModelFile g = model_from_json(text);
  CHECK(model_to_json(g) == text);
  CHECK(g.model.A == f.model.A);
  CHECK(g.model.embedding.weights[1] == f.model.embedding.weights[1]);
  CHECK(g.model.embedding.biases[0] == f.model.embedding.biases[0]);
  CHECK(g.model.norm.zeta_scale == f.model.norm.zeta_scale);
  CHECK(g.model.window_T == 33);
  CHECK(g.data_hash == "def");
}

TEST_CASE("model loader rejects malformed files") {
  std::string text = model_to_json(sample_model());
  CHECK_THROWS_AS(model_from_json("{"), SchemaError);
  std::string bad_version = text;
  bad_version.replace(bad_version.find("\"version\": 1"), 12, "\"version\": 9");
  CHECK_THROWS_AS(model_from_json(bad_version), SchemaError);
  std::string no_c = text;
  no_c.replace(no_c.find("\"C\""), 3, "\"D\"");
  CHECK_THROWS_WITH_AS(model_from_json(no_c), "model file: missing field C", SchemaError);
  std::string bad_k = text;
  bad_k.replace(bad_k.find("\"K\": 5"), 6, "\"K\": 4");
  CHECK_THROWS_AS(model_from_json(bad_k), SchemaError);
}

TEST_CASE("loss curve CSV has one row per epoch") {
  std::vector<EpochRecord> curve(3);
  for (int i = 0; i < 3; ++i) {
    curve[i].epoch = i;
    curve[i].loss.total = 1.0 / (i + 1);
  }
  const auto path = std::filesystem::temp_directory_path() / "npred_curve_test.csv";
  write_loss_curve(path.string(), curve);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,L,L_fwd,L_bwd,L_rec");
  std::getline(is, line);
  CHECK(line == "0,1,0,0,0");
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3);
  std::filesystem::remove(path);
}
