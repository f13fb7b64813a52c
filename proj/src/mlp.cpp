#include "npred/mlp.hpp"

#include <cmath>
#include <random>

#include "npred/errors.hpp"

namespace npred {

std::vector<int> MlpParams::layer_dims() const {
  std::vector<int> dims;
  if (weights.empty()) return dims;
  dims.push_back(static_cast<int>(weights.front().cols()));
  for (const auto& W : weights) dims.push_back(static_cast<int>(W.rows()));
  return dims;
}

void MlpParams::validate() const {
  if (weights.empty()) throw ConfigError("embedding needs at least one layer");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite()) throw ConfigError("non-finite embedding weights");
    if (l > 0 && weights[l].cols() != weights[l - 1].rows()) {
      throw ConfigError("embedding layer dimensions do not chain at layer " + std::to_string(l));
    }
  }
  if (has_bias()) {
    if (biases.size() + 1 != weights.size()) throw ConfigError("one bias per hidden layer expected");
    for (std::size_t l = 0; l < biases.size(); ++l) {
      if (biases[l].size() != weights[l].rows() || !biases[l].allFinite()) {
        throw ConfigError("bad bias at layer " + std::to_string(l));
      }
    }
  }
}

MlpParams init_mlp(const std::vector<int>& dims, double gamma, bool with_bias, std::uint64_t seed) {
  if (dims.size() < 2) throw ConfigError("embedding needs at least input and output dims");
  std::mt19937_64 rng(seed);
  MlpParams p;
  p.gamma = gamma;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double fan_in = dims[l];
    std::uniform_real_distribution<double> w_dist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    Eigen::MatrixXd W(dims[l + 1], dims[l]);
    for (Eigen::Index j = 0; j < W.cols(); ++j)
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = w_dist(rng);
    p.weights.push_back(std::move(W));
    if (with_bias && l + 2 < dims.size()) {
      std::uniform_real_distribution<double> b_dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
      Eigen::VectorXd b(dims[l + 1]);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = b_dist(rng);
      p.biases.push_back(std::move(b));
    }
  }
  return p;
}

Eigen::MatrixXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& X, MlpCache* cache) {
  const int L = params.num_layers();
  if (cache) {
    cache->inputs.resize(L);
    cache->pre.resize(L - 1);
  }
  Eigen::MatrixXd h = X;
  for (int l = 0; l < L; ++l) {
    if (cache) cache->inputs[l] = h;
    Eigen::MatrixXd a = params.weights[l] * h;
    if (l + 1 == L) return a;
    if (params.has_bias()) a.colwise() += params.biases[l];
    if (cache) cache->pre[l] = a;
    h = a.cwiseMax(0.0);
  }
  return h;
}

Eigen::MatrixXd embed_batch(const Eigen::MatrixXd& X, const MlpParams& params) {
  return mlp_forward(params, X, nullptr);
}

Eigen::VectorXd embed(const Eigen::VectorXd& chi, const MlpParams& params) {
  return mlp_forward(params, chi, nullptr).col(0);
}

MlpGradients MlpGradients::zeros_like(const MlpParams& params) {
  MlpGradients g;
  for (const auto& W : params.weights) g.weights.push_back(Eigen::MatrixXd::Zero(W.rows(), W.cols()));
  for (const auto& b : params.biases) g.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return g;
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) weights[l] += other.weights[l];
  for (std::size_t l = 0; l < biases.size(); ++l) biases[l] += other.biases[l];
  return *this;
}

MlpGradients& MlpGradients::operator*=(double s) {
  for (auto& W : weights) W *= s;
  for (auto& b : biases) b *= s;
  return *this;
}

MlpGradients mlp_backward(const MlpParams& params, const MlpCache& cache, const Eigen::MatrixXd& dZ) {
  const int L = params.num_layers();
  MlpGradients g = MlpGradients::zeros_like(params);
  Eigen::MatrixXd delta = dZ;
  for (int l = L - 1; l >= 0; --l) {
    g.weights[l] = delta * cache.inputs[l].transpose();
    if (l == 0) break;
    Eigen::MatrixXd back = params.weights[l].transpose() * delta;
    // ReLU derivative taken as 0 at the kink
    back = back.cwiseProduct((cache.pre[l - 1].array() > 0.0).cast<double>().matrix());
    if (params.has_bias()) g.biases[l - 1] = back.rowwise().sum();
    delta = std::move(back);
  }
  return g;
}

namespace {

Eigen::VectorXd start_vector(Eigen::Index n) {
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> d;
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = d(rng);
  return x.normalized();
}

}  // namespace

SpectralEstimate power_iteration(const Eigen::MatrixXd& W, const Eigen::VectorXd* u0,
                                 const PowerIterationOptions& opts) {
  SpectralEstimate est;
  est.u = (u0 && u0->size() == W.rows() && u0->norm() > 0.0) ? u0->normalized()
                                                             : start_vector(W.rows());
  est.v = Eigen::VectorXd::Zero(W.cols());
  if (W.size() == 0 || W.cwiseAbs().maxCoeff() == 0.0) return est;

  double prev = -1.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    Eigen::VectorXd v = W.transpose() * est.u;
    double vn = v.norm();
    if (vn == 0.0) {
      // u orthogonal to the range: restart from a generic vector
      est.u = start_vector(W.rows());
      v = W.transpose() * est.u;
      vn = v.norm();
    }
    est.v = v / vn;
    Eigen::VectorXd u = W * est.v;
    const double sigma = u.norm();
    est.u = u / sigma;
    est.sigma = sigma;
    est.iterations = it + 1;
    if (prev > 0.0 && std::abs(sigma - prev) <= opts.rel_tol * sigma) break;
    prev = sigma;
  }
  return est;
}

double spectral_norm(const Eigen::MatrixXd& W, const PowerIterationOptions& opts) {
  return power_iteration(W, nullptr, opts).sigma;
}

double per_layer_target(double gamma, int num_layers) {
  return std::pow(gamma, 1.0 / static_cast<double>(num_layers));
}

NormalizedMlp apply_spectral_normalization(const MlpParams& params, const PowerIterationOptions& opts) {
  NormalizedMlp out{params, false};
  const double target = per_layer_target(params.gamma, params.num_layers());
  for (auto& W : out.params.weights) {
    const double sigma = spectral_norm(W, opts);
    if (sigma == 0.0) {
      out.zero_layer_warning = true;
      continue;
    }
    W *= target / sigma;
  }
  return out;
}

double lipschitz_certificate(const MlpParams& params) {
  double bound = 1.0;
  for (const auto& W : params.weights) bound *= spectral_norm(W);
  return bound;
}

SpectralNormalizer::SpectralNormalizer(const MlpParams& raw) {
  for (const auto& W : raw.weights) {
    const SpectralEstimate est = power_iteration(W, nullptr, {50, 1e-10});
    vectors_.push_back({est.u, est.v});
  }
}

void SpectralNormalizer::power_step(const MlpParams& raw) {
  for (std::size_t l = 0; l < raw.weights.size(); ++l) {
    const SpectralEstimate est = power_iteration(raw.weights[l], &vectors_[l].u, {1, 0.0});
    vectors_[l] = {est.u, est.v};
  }
}

MlpParams SpectralNormalizer::effective(const MlpParams& raw) const {
  MlpParams eff = raw;
  const double target = per_layer_target(raw.gamma, raw.num_layers());
  for (std::size_t l = 0; l < raw.weights.size(); ++l) {
    const double sigma = vectors_[l].u.dot(raw.weights[l] * vectors_[l].v);
    if (sigma > 0.0) eff.weights[l] = raw.weights[l] * (target / sigma);
  }
  return eff;
}

MlpGradients SpectralNormalizer::backward(const MlpParams& raw, const MlpGradients& grad_eff) const {
  MlpGradients g = grad_eff;
  const double target = per_layer_target(raw.gamma, raw.num_layers());
  for (std::size_t l = 0; l < raw.weights.size(); ++l) {
    const auto& W = raw.weights[l];
    const auto& G = grad_eff.weights[l];
    const double sigma = vectors_[l].u.dot(W * vectors_[l].v);
    if (!(sigma > 0.0)) continue;
    // d(W/sigma) with sigma = u^T W v
    const double inner = (G.array() * W.array()).sum() / sigma;
    g.weights[l] = (target / sigma) * (G - inner * vectors_[l].u * vectors_[l].v.transpose());
  }
  return g;
}

}  // namespace npred
