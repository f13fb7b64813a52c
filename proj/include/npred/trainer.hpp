#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "npred/labeling.hpp"
#include "npred/lls.hpp"
#include "npred/metrics.hpp"
#include "npred/mlp.hpp"

namespace npred {

/// Exponent of the rollout discount: prediction step within the segment
/// (default) or the segment's position in the dataset.
enum class DiscountMode { kStepIndex, kTrajectoryIndex };

/// How the loss gradient treats the per-segment (A, B): held fixed, or
/// differentiated through the regularized least-squares solution.
enum class FitGradient { kStop, kFull };

struct TrainConfig {
  double beta_fwd = 1.0;
  double beta_bwd = 1.0;
  double beta_rec = 1.0;
  double mu_fwd = 0.999;
  double mu_bwd = 0.999;
  DiscountMode discount = DiscountMode::kStepIndex;
  FitGradient fit_gradient = FitGradient::kFull;
  int epochs = 200;
  int batch_size = 16;
  int segment_len = 40;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  double gamma = 10.0;
  int K = 24;
  std::vector<int> hidden = {128, 128};
  int window_T = 40;
  double segment_ridge = 1e-1;  // per-segment fits inside the loss, centered on A = I, B = 0
  double ridge = 1e-8;          // exported fit over the whole training set
  double online_ridge = 1.0;    // window refits, pulled toward the exported (A, B)
  double t_s = 0.02;
  int patience = 20;  // epochs over which the relative improvement is measured
  double min_rel_improvement = 1e-5;
  int nan_retries = 2;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// Canonical "key=value" rendering, used for hashing.
  std::string canonical() const;
};

/// Consecutive samples of one log, one column per sample.
struct Segment {
  Eigen::MatrixXd chi;   // 6 x m
  Eigen::MatrixXd zeta;  // 6 x m
  int index = 0;         // position in the dataset
};

/// Overlapping windows of length m with stride m / 2, chronological.
/// Throws ConfigError when the log is shorter than m.
std::vector<Segment> make_segments(std::span<const LabeledSample> log, int m);

/// Segment mapped into normalized units.
Segment normalize_segment(const Segment& seg, const NormStats& norm);

struct LossTerms {
  double fwd = 0.0;
  double bwd = 0.0;
  double rec = 0.0;
  double total = 0.0;
  int bwd_skipped = 0;  // segments whose A was too ill-conditioned to invert
};

struct LossGradients {
  MlpGradients embedding;
  Eigen::MatrixXd C;
};

/// Loss of one normalized segment with (A, B) fitted on the segment itself,
/// or taken from fixed_fit when given (the gradient then treats them as constants).
LossTerms compute_losses(const Segment& seg, const MlpParams& params, const Eigen::MatrixXd& C,
                         const TrainConfig& cfg, LossGradients* grad = nullptr,
                         const LsFit* fixed_fit = nullptr);

/// Mean loss (and gradient) over a batch of normalized segments.
LossTerms batch_losses(std::span<const Segment> batch, const MlpParams& params,
                       const Eigen::MatrixXd& C, const TrainConfig& cfg,
                       LossGradients* grad = nullptr);

struct EpochRecord {
  int epoch = 0;
  LossTerms loss;
};

struct TrainedModel {
  LiftedModel model;
  std::vector<EpochRecord> curve;
  std::string config_hash;
  std::string data_hash;
  double lipschitz_bound = 0.0;
  double learning_rate_scale = 1.0;  // < 1 after non-finite-loss retries
};

/// Fits the embedding and decoder on labeled logs, then refits (A, B) on the
/// whole normalized training set. Deterministic in cfg.seed.
TrainedModel train(const std::vector<std::vector<LabeledSample>>& logs, const TrainConfig& cfg);

/// (A, B) refit over every consecutive pair inside each log (normalized units).
LsFit refit_on_logs(const std::vector<std::vector<LabeledSample>>& logs, const MlpParams& params,
                    const NormStats& norm, double ridge);

struct EvalReport {
  RmseReport one_step;    // sliding-window refit, as run online
  RmseReport multi_step;  // open-loop with the exported (A, B)
  int horizon = 0;
  std::vector<double> t;              // timestamps of the one-step rows
  std::vector<Wrench> one_step_pred;  // aligned with t
  std::vector<Wrench> truth;          // aligned with t
};

EvalReport evaluate(const LiftedModel& model, std::span<const LabeledSample> log, int horizon = 20);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace npred
