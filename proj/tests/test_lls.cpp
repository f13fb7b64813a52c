#include <doctest.h>

#include <random>

#include "npred/errors.hpp"
#include "npred/lls.hpp"

using namespace npred;

TEST_CASE("least squares recovers an exact linear system") {
  const int K = 8, n = 60;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  auto randn = [&](int r, int c) {
    Eigen::MatrixXd M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = n01(rng);
    return M;
  };
  const Eigen::MatrixXd A = 0.3 * randn(K, K);
  const Eigen::MatrixXd B = randn(K, 6);
  const Eigen::MatrixXd Z0 = randn(K, n);
  const Eigen::MatrixXd U0 = randn(6, n);
  const Eigen::MatrixXd Z1 = A * Z0 + B * U0;
  const LsFit exact = fit_AB(Z0, Z1, U0, 0.0);
  CHECK((exact.A - A).norm() / A.norm() < 1e-10);
  CHECK((exact.B - B).norm() / B.norm() < 1e-10);
  const LsFit ridge = fit_AB(Z0, Z1, U0, 1e-8);
  CHECK((ridge.A - A).norm() / A.norm() < 1e-8);
  CHECK_FALSE(ridge.ill_conditioned);
}

TEST_CASE("ridge toward a prior keeps an exact prior and dominates when large") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  auto randn = [&](int r, int c) {
    Eigen::MatrixXd M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = n01(rng);
    return M;
  };
  const int K = 5, n = 12;
  const Eigen::MatrixXd A = 0.4 * randn(K, K), B = randn(K, 6);
  Eigen::MatrixXd prior(K, K + 6);
  prior << A, B;
  const Eigen::MatrixXd Z0 = randn(K, n), U0 = randn(6, n);
  const LsFit same = fit_AB(Z0, A * Z0 + B * U0, U0, 3.0, &prior);
  CHECK((same.A - A).norm() < 1e-10);
  CHECK((same.B - B).norm() < 1e-10);
  const LsFit pulled = fit_AB(Z0, randn(K, n), U0, 1e12, &prior);
  CHECK((pulled.A - A).norm() < 1e-6);
  const Eigen::MatrixXd wrong = Eigen::MatrixXd::Zero(K, K);
  CHECK_THROWS_AS(fit_AB(Z0, Z0, U0, 1.0, &wrong), NumericalError);
}

TEST_CASE("rank-deficient data is flagged and still solved") {
  const Eigen::MatrixXd Z0 = Eigen::MatrixXd::Ones(3, 10);
  const Eigen::MatrixXd U0 = Eigen::MatrixXd::Zero(6, 10);
  const Eigen::MatrixXd Z1 = 2.0 * Z0;
  const LsFit fit = fit_AB(Z0, Z1, U0, 0.0);
  CHECK(fit.ill_conditioned);
  CHECK(((fit.A * Z0) - Z1).norm() < 1e-10);
}

TEST_CASE("forward then backward rollout returns to the start") {
  const int K = 12;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(K, K) + 0.05 * Eigen::MatrixXd::Random(K, K);
  const Eigen::MatrixXd B = Eigen::MatrixXd::Random(K, 6);
  const Eigen::VectorXd z0 = Eigen::VectorXd::Random(K);
  const Eigen::MatrixXd U = Eigen::MatrixXd::Random(6, 30);
  const Eigen::MatrixXd fwd = rollout_forward(A, B, z0, U, 30);
  const Eigen::MatrixXd bwd = rollout_backward(A, B, fwd.col(30), U, 30);
  CHECK((bwd.col(0) - z0).norm() <= 1e-9 * z0.norm());
  CHECK_THROWS_AS(rollout_backward(Eigen::MatrixXd::Zero(K, K), B, z0, U, 3), NumericalError);
}

TEST_CASE("window buffer keeps the newest entries in order") {
  WindowBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push(Vec6::Constant(i), Vec6::Constant(-i));
  CHECK(buf.full());
  CHECK(buf.chi(0)(0) == 2.0);
  CHECK(buf.chi(2)(0) == 4.0);
  CHECK(buf.zeta(1)(0) == -3.0);
}

TEST_CASE("horizon prediction agrees with a manual rollout") {
  LiftedModel m;
  m.embedding = init_mlp({6, 16, 8}, 10.0, true, 2);
  m.A = 0.5 * Eigen::MatrixXd::Identity(8, 8);
  m.B = Eigen::MatrixXd::Random(8, 6);
  m.C = Eigen::MatrixXd::Random(6, 8);
  m.norm.chi_scale = Vec6::Constant(2.0);
  m.validate();
  const Wrench prev = Wrench::from_stacked(Vec6::Random());
  std::vector<Vec6> zs(4, Vec6::Random());
  const auto pred = predict_wrench_horizon(m, prev, zs);
  REQUIRE(pred.size() == 4);
  Eigen::VectorXd z = embed(prev.stacked() / 2.0, m.embedding);
  for (int i = 0; i < 4; ++i) {
    z = m.A * z + m.B * zs[i];
    CHECK((pred[i].stacked() - 2.0 * m.C * z).norm() < 1e-12);
  }
  OnlinePredictor online(m);
  const auto cold = online.predict(std::vector<Vec6>(3, Vec6::Zero()));
  CHECK(cold.size() == 4);
  CHECK(cold[2].stacked().norm() == 0.0);
  CHECK_FALSE(online.refit());
}
