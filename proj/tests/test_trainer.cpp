#include <doctest.h>

#include <cmath>
#include <random>

#include "npred/errors.hpp"
#include "npred/trainer.hpp"

using namespace npred;

namespace {

std::vector<LabeledSample> linear_world(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::Matrix<double, 6, 6> A = 0.9 * Eigen::Matrix<double, 6, 6>::Identity();
  A(0, 1) = 0.1;
  A(3, 4) = -0.1;
  Eigen::Matrix<double, 6, 6> B = 0.05 * Eigen::Matrix<double, 6, 6>::Identity();
  std::vector<LabeledSample> out(n);
  Vec6 chi = Vec6::Zero();
  for (int k = 0; k < n; ++k) {
    const double t = 0.02 * k;
    Vec6 zeta;
    for (int i = 0; i < 6; ++i) zeta(i) = std::sin(0.7 * t * (i + 1) + i) + 0.3 * n01(rng);
    out[k] = {t, Wrench::from_stacked(chi), zeta};
    chi = A * chi + B * zeta;
  }
  return out;
}

Segment random_segment(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Segment s;
  s.chi.resize(6, m);
  s.zeta.resize(6, m);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < 6; ++i) {
      s.chi(i, k) = std::sin(0.1 * k + i);
      s.zeta(i, k) = std::cos(0.2 * k * (i + 1)) + 0.1 * n01(rng);
    }
  return s;
}

double max_grad_error(const TrainConfig& cfg, bool freeze) {
  MlpParams p = init_mlp({6, 12, 12, 2}, 10.0, true, 21);
  const Eigen::MatrixXd C = 0.3 * Eigen::MatrixXd::Random(6, 2);
  const Segment seg = random_segment(30, 5);
  const LsFit frozen = [&] {
    const Eigen::MatrixXd Z = embed_batch(seg.chi, p);
    return fit_AB(Z.leftCols(29), Z.rightCols(29), seg.zeta.leftCols(29), cfg.segment_ridge);
  }();
  const LsFit* fixed = freeze ? &frozen : nullptr;
  LossGradients g;
  const LossTerms base = compute_losses(seg, p, C, cfg, &g, fixed);
  REQUIRE(base.bwd_skipped == 0);
  const double h = 1e-6;
  double worst = 0.0;
  auto check = [&](double analytic, auto perturb) {
    const double fd = (perturb(h) - perturb(-h)) / (2 * h);
    worst = std::max(worst, std::abs(analytic - fd) / std::max({std::abs(fd), std::abs(analytic), 1e-6}));
  };
  for (int l = 0; l < p.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < p.weights[l].size(); i += 3) {
      check(g.embedding.weights[l](i), [&](double d) {
        MlpParams q = p;
        q.weights[l](i) += d;
        return compute_losses(seg, q, C, cfg, nullptr, fixed).total;
      });
    }
  }
  for (Eigen::Index i = 0; i < C.size(); i += 2) {
    check(g.C(i), [&](double d) {
      Eigen::MatrixXd Cq = C;
      Cq(i) += d;
      return compute_losses(seg, p, Cq, cfg, nullptr, fixed).total;
    });
  }
  return worst;
}

}  // namespace

TEST_CASE("segments overlap by half and keep values exactly") {
  const auto log = linear_world(3000, 1);
  const auto segs = make_segments(log, 40);
  CHECK(segs.size() == 149);
  CHECK(segs[1].chi.col(0) == log[20].chi.stacked());
  CHECK(make_segments(std::span(log).first(40), 40).size() == 1);
  CHECK_THROWS_AS(make_segments(std::span(log).first(10), 40), ConfigError);
}

TEST_CASE("scalar two-step loss matches hand arithmetic") {
  MlpParams p;
  p.weights.push_back(Eigen::MatrixXd::Zero(1, 6));
  p.weights[0](0, 0) = 1.0;
  Segment seg;
  seg.chi = Eigen::MatrixXd::Zero(6, 3);
  seg.chi.row(0) << 1.0, 2.0, 4.0;
  seg.zeta = Eigen::MatrixXd::Zero(6, 3);
  seg.zeta.row(0).setOnes();
  LsFit fit;
  fit.A = Eigen::MatrixXd::Constant(1, 1, 1.5);
  fit.B = Eigen::MatrixXd::Zero(1, 6);
  fit.B(0, 0) = 0.5;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(6, 1);
  C(0, 0) = 0.5;
  TrainConfig cfg;
  cfg.mu_fwd = 0.9;
  cfg.mu_bwd = 0.9;
  const LossTerms l = compute_losses(seg, p, C, cfg, nullptr, &fit);
  // forward: z_hat = [1, 2, 3.5]; backward: z_hat = [11/9, 7/3, 4]
  CHECK(std::abs(l.fwd - 0.9 * 0.25) < 1e-12);
  CHECK(std::abs(l.bwd - (1.0 / 9.0 + 0.9 * 4.0 / 81.0)) < 1e-12);
  CHECK(std::abs(l.rec - 5.25 / 3.0) < 1e-12);
  CHECK(std::abs(l.total - (0.225 + 12.6 / 81.0 + 1.75)) < 1e-12);

  cfg.mu_fwd = 0.0;
  const LossTerms one_step = compute_losses(seg, p, C, cfg, nullptr, &fit);
  CHECK(one_step.fwd == 0.0);  // first step is exact, later steps carry weight 0
}

TEST_CASE("realizable segment gives vanishing loss") {
  MlpParams p;
  p.weights.push_back(Eigen::MatrixXd::Identity(6, 6));
  const auto log = linear_world(40, 3);
  const Segment seg = make_segments(log, 40).front();
  TrainConfig cfg;
  cfg.segment_ridge = 0.0;
  const LossTerms l = compute_losses(seg, p, Eigen::MatrixXd::Identity(6, 6), cfg);
  CHECK(l.fwd < 1e-12);
  CHECK(l.bwd < 1e-12);
  CHECK(l.rec < 1e-12);
}

TEST_CASE("loss gradient with (A, B) held fixed matches finite differences") {
  TrainConfig cfg;
  cfg.fit_gradient = FitGradient::kStop;
  cfg.mu_fwd = 0.95;
  cfg.mu_bwd = 0.9;
  CHECK(max_grad_error(cfg, true) < 1e-5);
}

TEST_CASE("loss gradient through the least-squares fit matches finite differences") {
  TrainConfig cfg;
  cfg.fit_gradient = FitGradient::kFull;
  CHECK(max_grad_error(cfg, false) < 1e-5);
}

TEST_CASE("training is deterministic and decreases the loss") {
  const auto log = linear_world(600, 2);
  TrainConfig cfg;
  cfg.hidden = {32, 32};
  cfg.K = 8;
  cfg.seed = 3;
  // full-length learning-rate schedule, stopped after six epochs by the patience rule
  cfg.patience = 5;
  cfg.min_rel_improvement = 1.0;
  const TrainedModel a = train({log}, cfg);
  const TrainedModel b = train({log}, cfg);
  REQUIRE(a.curve.size() == 6);
  for (std::size_t e = 0; e < a.curve.size(); ++e) CHECK(a.curve[e].loss.total == b.curve[e].loss.total);
  for (std::size_t e = 1; e < 5; ++e) CHECK(a.curve[e].loss.total < a.curve[e - 1].loss.total);
  CHECK(a.lipschitz_bound <= cfg.gamma * (1 + 1e-9));
  CHECK(a.config_hash == b.config_hash);
}

TEST_CASE("evaluation of a perfect and a zero predictor") {
  const auto log = linear_world(100, 4);
  LiftedModel m;
  m.embedding.weights.push_back(Eigen::MatrixXd::Identity(6, 6));
  m.C = Eigen::MatrixXd::Identity(6, 6);
  m.A = Eigen::MatrixXd::Zero(6, 6);
  m.B = Eigen::MatrixXd::Zero(6, 6);
  m.window_T = 1000;  // never refit
  const EvalReport zero = evaluate(m, log, 5);
  double rms = 0.0;
  for (std::size_t k = 1; k < log.size(); ++k) rms += log[k].chi.f_e.squaredNorm();
  rms = std::sqrt(rms / (log.size() - 1));
  CHECK(std::abs(zero.one_step.f - rms) < 1e-12);
  m.A.setZero();
  m.A.diagonal().setConstant(0.9);
  m.A(0, 1) = 0.1;
  m.A(3, 4) = -0.1;
  m.B = 0.05 * Eigen::MatrixXd::Identity(6, 6);
  const EvalReport exact = evaluate(m, log, 5);
  CHECK(exact.one_step.f < 1e-12);
  CHECK(exact.multi_step.tau < 1e-12);
}

TEST_CASE("training on a linear wrench world predicts one step ahead") {
  const auto log = linear_world(3000, 6);
  TrainConfig cfg;
  cfg.epochs = 1200;
  cfg.learning_rate = 3e-3;
  cfg.patience = 1000;
  const TrainedModel tm = train({log}, cfg);
  const auto held = linear_world(1000, 7);
  const EvalReport rep = evaluate(tm.model, held, 10);
  double rms = 0.0;
  for (const auto& s : held) rms += s.chi.stacked().squaredNorm();
  rms = std::sqrt(rms / held.size());
  const double err = std::hypot(rep.one_step.f, rep.one_step.tau);
  MESSAGE("one-step error " << err << " signal rms " << rms);
  CHECK(err <= 0.01 * rms);
}
