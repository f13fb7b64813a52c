#include <doctest.h>

#include <random>

#include "npred/mlp.hpp"

using namespace npred;

namespace {

double svd_norm(const Eigen::MatrixXd& W) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(W);
  return svd.singularValues()(0);
}

double half_sq_loss(const MlpParams& p, const Eigen::MatrixXd& X, const Eigen::MatrixXd& T) {
  return 0.5 * (mlp_forward(p, X, nullptr) - T).squaredNorm();
}

}  // namespace

TEST_CASE("power iteration matches the SVD spectral norm") {
  const MlpParams p = init_mlp({6, 128, 128, 24}, 10.0, true, 3);
  for (const auto& W : p.weights) {
    const double s = svd_norm(W);
    CHECK(std::abs(spectral_norm(W) - s) <= 1e-8 * s);
  }
  CHECK(spectral_norm(Eigen::MatrixXd::Zero(4, 3)) == 0.0);
}

TEST_CASE("spectral normalization hits the per-layer target") {
  const MlpParams p = init_mlp({6, 32, 32, 12}, 10.0, true, 5);
  const NormalizedMlp n = apply_spectral_normalization(p);
  CHECK_FALSE(n.zero_layer_warning);
  const double target = per_layer_target(10.0, 3);
  for (const auto& W : n.params.weights) CHECK(svd_norm(W) == doctest::Approx(target).epsilon(1e-9));
  CHECK(lipschitz_certificate(n.params) == doctest::Approx(10.0).epsilon(1e-8));
}

TEST_CASE("embedding never stretches distances beyond the certificate") {
  MlpParams p = init_mlp({6, 32, 32, 12}, 2.0, true, 9);
  p = apply_spectral_normalization(p).params;
  const double lip = lipschitz_certificate(p);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd a(6), b(6);
    for (int j = 0; j < 6; ++j) {
      a(j) = n01(rng);
      b(j) = n01(rng);
    }
    CHECK((embed(a, p) - embed(b, p)).norm() <= lip * (a - b).norm() * (1 + 1e-12));
  }
}

TEST_CASE("backpropagation matches finite differences") {
  MlpParams p = init_mlp({6, 16, 16, 5}, 10.0, true, 11);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 8);
  const Eigen::MatrixXd T = Eigen::MatrixXd::Random(5, 8);
  MlpCache cache;
  const Eigen::MatrixXd Z = mlp_forward(p, X, &cache);
  const MlpGradients g = mlp_backward(p, cache, Z - T);
  const double h = 1e-6;
  for (int l = 0; l < p.num_layers(); ++l) {
    for (int idx = 0; idx < 5; ++idx) {
      const Eigen::Index r = (idx * 7) % p.weights[l].rows();
      const Eigen::Index c = (idx * 3) % p.weights[l].cols();
      MlpParams a = p, b = p;
      a.weights[l](r, c) += h;
      b.weights[l](r, c) -= h;
      const double fd = (half_sq_loss(a, X, T) - half_sq_loss(b, X, T)) / (2 * h);
      CHECK(g.weights[l](r, c) == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
    }
  }
  for (int l = 0; l + 1 < p.num_layers(); ++l) {
    MlpParams a = p, b = p;
    a.biases[l](1) += h;
    b.biases[l](1) -= h;
    const double fd = (half_sq_loss(a, X, T) - half_sq_loss(b, X, T)) / (2 * h);
    CHECK(g.biases[l](1) == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
  }
}

TEST_CASE("spectral reparameterization gradient matches finite differences") {
  const MlpParams raw = init_mlp({6, 10, 10, 4}, 3.0, true, 13);
  SpectralNormalizer sn(raw);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 5);
  const Eigen::MatrixXd T = Eigen::MatrixXd::Random(4, 5);
  auto loss = [&](const MlpParams& r) { return half_sq_loss(sn.effective(r), X, T); };
  const MlpParams eff = sn.effective(raw);
  MlpCache cache;
  const Eigen::MatrixXd Z = mlp_forward(eff, X, &cache);
  const MlpGradients g = sn.backward(raw, mlp_backward(eff, cache, Z - T));
  const double h = 1e-6;
  for (int l = 0; l < raw.num_layers(); ++l) {
    for (int idx = 0; idx < 4; ++idx) {
      const Eigen::Index r = (idx * 5) % raw.weights[l].rows();
      const Eigen::Index c = (idx * 3 + 1) % raw.weights[l].cols();
      MlpParams a = raw, b = raw;
      a.weights[l](r, c) += h;
      b.weights[l](r, c) -= h;
      const double fd = (loss(a) - loss(b)) / (2 * h);
      CHECK(g.weights[l](r, c) == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
    }
  }
}
