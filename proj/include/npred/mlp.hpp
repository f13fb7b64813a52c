#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace npred {

/// Feed-forward embedding: ReLU hidden layers, linear output layer.
/// weights[l] maps dims[l] -> dims[l+1]; biases exist on hidden layers only.
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double gamma = 10.0;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  bool has_bias() const { return !biases.empty(); }
  std::vector<int> layer_dims() const;
  /// Dimension chain, bias shapes, finiteness, gamma > 0; throws ConfigError.
  void validate() const;
};

/// Kaiming-uniform weights, small uniform biases; deterministic in seed.
MlpParams init_mlp(const std::vector<int>& dims, double gamma, bool with_bias, std::uint64_t seed);

Eigen::VectorXd embed(const Eigen::VectorXd& chi, const MlpParams& params);
/// Column-wise forward pass.
Eigen::MatrixXd embed_batch(const Eigen::MatrixXd& X, const MlpParams& params);

struct PowerIterationOptions {
  int max_iters = 20000;
  double rel_tol = 1e-15;
};

struct SpectralEstimate {
  double sigma = 0.0;
  Eigen::VectorXd u;  // left singular vector estimate
  Eigen::VectorXd v;  // right singular vector estimate
  int iterations = 0;
};

/// Power iteration on W^T W. When u0 is given it seeds the iterate.
SpectralEstimate power_iteration(const Eigen::MatrixXd& W, const Eigen::VectorXd* u0,
                                 const PowerIterationOptions& opts = {});
double spectral_norm(const Eigen::MatrixXd& W, const PowerIterationOptions& opts = {});

/// gamma^(1/num_layers).
double per_layer_target(double gamma, int num_layers);

struct NormalizedMlp {
  MlpParams params;
  bool zero_layer_warning = false;
};

/// W <- W / sigma(W) * gamma^(1/(L+1)) per layer; zero layers are left alone.
NormalizedMlp apply_spectral_normalization(const MlpParams& params,
                                           const PowerIterationOptions& opts = {});

/// Product of per-layer spectral norms: an upper bound on the Lipschitz constant.
double lipschitz_certificate(const MlpParams& params);

struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each hidden layer
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGradients zeros_like(const MlpParams& params);
  MlpGradients& operator+=(const MlpGradients& other);
  MlpGradients& operator*=(double s);
};

Eigen::MatrixXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& X, MlpCache* cache);
/// Reverse pass for dL/dZ (one column per sample).
MlpGradients mlp_backward(const MlpParams& params, const MlpCache& cache, const Eigen::MatrixXd& dZ);

/// Singular-vector estimates held across training steps, one pair per layer.
struct SnVectors {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

/// Training-time spectral normalization as a reparameterization:
/// W_eff = W * target / (u^T W v) with (u, v) held fixed inside a step.
class SpectralNormalizer {
 public:
  SpectralNormalizer() = default;
  explicit SpectralNormalizer(const MlpParams& raw);

  /// One power-iteration update of every layer's vectors.
  void power_step(const MlpParams& raw);
  MlpParams effective(const MlpParams& raw) const;
  /// Pulls gradients w.r.t. the effective weights back onto the raw weights.
  MlpGradients backward(const MlpParams& raw, const MlpGradients& grad_eff) const;

  const std::vector<SnVectors>& vectors() const { return vectors_; }

 private:
  std::vector<SnVectors> vectors_;
};

}  // namespace npred
