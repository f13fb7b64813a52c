#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "npred/labeling.hpp"
#include "npred/mlp.hpp"
#include "npred/types.hpp"

namespace npred {

/// Per-group RMS scale (force, torque, linear velocity, angular velocity).
/// Means are stored for completeness and are zero when produced by fit().
struct NormStats {
  Vec6 chi_mean = Vec6::Zero();
  Vec6 chi_scale = Vec6::Ones();
  Vec6 zeta_mean = Vec6::Zero();
  Vec6 zeta_scale = Vec6::Ones();

  Vec6 normalize_chi(const Vec6& chi) const;
  Vec6 denormalize_chi(const Vec6& chi_n) const;
  Vec6 normalize_zeta(const Vec6& zeta) const;

  static NormStats fit(std::span<const LabeledSample> samples);
};

struct LsFit {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  double condition = 1.0;  // condition number of the stacked regressor
  bool ill_conditioned = false;
};

/// argmin ||Z1 - A Z0 - B U0||_F (+ ridge ||[A B] - prior||_F^2, prior = 0 when
/// absent). ridge > 0 solves the regularized normal equations; ridge == 0
/// returns the minimum-norm solution.
LsFit fit_AB(const Eigen::MatrixXd& Z0, const Eigen::MatrixXd& Z1, const Eigen::MatrixXd& U0,
             double ridge = 1e-8, const Eigen::MatrixXd* prior = nullptr);

/// Columns z_0 .. z_n of z_{k+1} = A z_k + B zeta_k.
Eigen::MatrixXd rollout_forward(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                const Eigen::VectorXd& z0, const Eigen::MatrixXd& zeta_seq, int n);

/// Columns z_0 .. z_n reconstructed from z_n = z_end via z_k = A^-1 (z_{k+1} - B zeta_k).
/// Throws NumericalError when cond(A) > 1e10.
Eigen::MatrixXd rollout_backward(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::VectorXd& z_end, const Eigen::MatrixXd& zeta_seq, int n);

double spectral_radius(const Eigen::MatrixXd& A);

/// Embedding, decoder and lifted dynamics; all LLS math in normalized units.
struct LiftedModel {
  MlpParams embedding;
  Eigen::MatrixXd C;  // 6 x K
  Eigen::MatrixXd A;  // K x K
  Eigen::MatrixXd B;  // K x 6
  double t_s = 0.02;
  int window_T = 40;
  double ridge = 1.0;  // online window refit, centered on (A, B)
  NormStats norm;

  int K() const { return embedding.output_dim(); }
  double spectral_radius() const;
  bool stable() const { return spectral_radius() <= 1.0 + 1e-6; }
  /// Dimension consistency, t_s > 0, window_T >= 2; throws ConfigError.
  void validate() const;
};

/// Chronological ring buffer of normalized (chi, zeta) pairs.
class WindowBuffer {
 public:
  explicit WindowBuffer(int capacity = 40);

  void push(const Vec6& chi_n, const Vec6& zeta_n);
  void clear();
  int capacity() const { return capacity_; }
  int count() const { return count_; }
  bool full() const { return count_ == capacity_; }
  /// i-th oldest entry, 0 <= i < count.
  const Vec6& chi(int i) const;
  const Vec6& zeta(int i) const;

 private:
  int index(int i) const;
  int capacity_;
  int count_ = 0;
  int head_ = 0;  // slot of the oldest entry
  std::vector<Vec6> chi_;
  std::vector<Vec6> zeta_;
};

/// Embeds the window and refits (A_k, B_k). Throws NumericalError("insufficient history")
/// unless the buffer is full.
LsFit window_refit(const WindowBuffer& buf, const MlpParams& params, double ridge = 1e-8,
                   const Eigen::MatrixXd* prior = nullptr);

/// chi_hat_i = C z_i, z_i = A z_{i-1} + B zeta_{i-1}, z_{-1} = Phi(chi_prev).
/// zeta_seq = [zeta_{-1}, zeta_0, ..., zeta_{N-2}] in physical units; returns N wrenches.
std::vector<Wrench> predict_wrench_horizon(const LiftedModel& model, const Eigen::MatrixXd& A,
                                           const Eigen::MatrixXd& B, const Wrench& chi_prev,
                                           std::span<const Vec6> zeta_seq);
std::vector<Wrench> predict_wrench_horizon(const LiftedModel& model, const Wrench& chi_prev,
                                           std::span<const Vec6> zeta_seq);

/// Online side of the predictor: holds the sliding window, the current
/// (A_k, B_k) and the latest label. Before the first label every prediction
/// is zero; before the first full window the trained (A, B) are used.
class OnlinePredictor {
 public:
  explicit OnlinePredictor(const LiftedModel& model);

  /// Adds the label chi_{k-1} and regressor zeta_{k-1} (physical units).
  void observe(const Wrench& chi, const Vec6& zeta);
  /// Refits on the current window when it is full; returns whether the new
  /// (A, B) were adopted. The ridge term pulls toward the exported (A, B)
  /// rather than zero. A fit whose spectral radius exceeds 1 + 1e-6 is
  /// rejected and the previous pair kept.
  bool refit();

  bool has_label() const { return has_label_; }
  int refit_count() const { return refits_; }
  int rejected_count() const { return rejected_; }
  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }
  const LiftedModel& model() const { return model_; }

  /// Horizon prediction; zeta_plan holds zeta_0 .. zeta_{N-2} from the planned
  /// states, the stored zeta_{k-1} is prepended. Returns zeta_plan.size() + 1 wrenches.
  std::vector<Wrench> predict(std::span<const Vec6> zeta_plan) const;

 private:
  LiftedModel model_;
  WindowBuffer window_;
  Eigen::MatrixXd A_;
  Eigen::MatrixXd B_;
  Eigen::MatrixXd prior_;  // [A B] of the exported model
  Wrench last_chi_;
  Vec6 last_zeta_ = Vec6::Zero();
  bool has_label_ = false;
  int refits_ = 0;
  int rejected_ = 0;
};

}  // namespace npred
