#include "npred/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "npred/errors.hpp"
#include "npred/trajectory_log.hpp"

namespace npred {

void TrainConfig::validate() const {
  if (beta_fwd < 0.0 || beta_bwd < 0.0 || beta_rec < 0.0) throw ConfigError("loss weights must be >= 0");
  if (!(mu_fwd >= 0.0 && mu_fwd < 1.0) || !(mu_bwd >= 0.0 && mu_bwd < 1.0)) {
    throw ConfigError("discount factors must lie in [0, 1)");
  }
  if (segment_len < 3) throw ConfigError("segment length must be at least 3");
  if (epochs < 1 || batch_size < 1) throw ConfigError("epochs and batch size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (K < 1) throw ConfigError("K must be positive");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden widths must be positive");
  }
  if (window_T < 2) throw ConfigError("window length must be at least 2");
  if (ridge < 0.0 || segment_ridge < 0.0 || online_ridge < 0.0) throw ConfigError("ridge must be non-negative");
  if (fit_gradient == FitGradient::kFull && !(segment_ridge > 0.0)) {
    throw ConfigError("differentiating through the fit needs ridge > 0");
  }
  if (!(t_s > 0.0)) throw ConfigError("sample time must be positive");
  if (patience < 1 || nan_retries < 0) throw ConfigError("patience must be positive");
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os << "beta=" << format_double(beta_fwd) << ',' << format_double(beta_bwd) << ','
     << format_double(beta_rec) << ";mu=" << format_double(mu_fwd) << ',' << format_double(mu_bwd)
     << ";discount=" << static_cast<int>(discount) << ";fit_gradient=" << static_cast<int>(fit_gradient)
     << ";epochs=" << epochs << ";batch=" << batch_size << ";m=" << segment_len
     << ";lr=" << format_double(learning_rate) << ";seed=" << seed << ";gamma=" << format_double(gamma)
     << ";K=" << K << ";hidden=";
  for (int h : hidden) os << h << ',';
  os << ";T=" << window_T << ";ridge=" << format_double(segment_ridge) << ',' << format_double(ridge) << ','
     << format_double(online_ridge) << ";ts=" << format_double(t_s)
     << ";patience=" << patience << ";tol=" << format_double(min_rel_improvement);
  return os.str();
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<Segment> make_segments(std::span<const LabeledSample> log, int m) {
  if (m < 1) throw ConfigError("segment length must be positive");
  if (static_cast<int>(log.size()) < m) {
    throw ConfigError("log has " + std::to_string(log.size()) + " samples, segment length is " +
                      std::to_string(m));
  }
  const int stride = std::max(1, m / 2);
  std::vector<Segment> out;
  for (std::size_t first = 0; first + m <= log.size(); first += stride) {
    Segment s;
    s.chi.resize(kWrenchDim, m);
    s.zeta.resize(kZetaDim, m);
    for (int k = 0; k < m; ++k) {
      s.chi.col(k) = log[first + k].chi.stacked();
      s.zeta.col(k) = log[first + k].zeta;
    }
    s.index = static_cast<int>(out.size());
    out.push_back(std::move(s));
  }
  return out;
}

Segment normalize_segment(const Segment& seg, const NormStats& norm) {
  Segment out = seg;
  for (Eigen::Index k = 0; k < seg.chi.cols(); ++k) {
    out.chi.col(k) = norm.normalize_chi(seg.chi.col(k));
    out.zeta.col(k) = norm.normalize_zeta(seg.zeta.col(k));
  }
  return out;
}

namespace {

constexpr double kBackwardDivergence = 10.0;

double discount(double mu, int step, int segment_index, DiscountMode mode) {
  return mode == DiscountMode::kStepIndex ? std::pow(mu, step - 1) : std::pow(mu, segment_index);
}

}  // namespace

LossTerms compute_losses(const Segment& seg, const MlpParams& params, const Eigen::MatrixXd& C,
                         const TrainConfig& cfg, LossGradients* grad, const LsFit* fixed_fit) {
  const int m = static_cast<int>(seg.chi.cols());
  if (m < 3) throw ConfigError("segment length must be at least 3");
  MlpCache cache;
  const Eigen::MatrixXd Z = mlp_forward(params, seg.chi, grad ? &cache : nullptr);
  const int K = static_cast<int>(Z.rows());
  const Eigen::MatrixXd U = seg.zeta.leftCols(m - 1);
  // The segment ridge pulls toward A = I, B = 0 so directions the segment
  // does not excite keep A invertible for the backward rollout.
  Eigen::MatrixXd prior = Eigen::MatrixXd::Zero(K, K + kZetaDim);
  prior.leftCols(K).setIdentity();
  const LsFit fit = fixed_fit ? *fixed_fit : fit_AB(Z.leftCols(m - 1), Z.rightCols(m - 1), U, cfg.segment_ridge, &prior);
  const Eigen::MatrixXd& A = fit.A;
  const Eigen::MatrixXd& B = fit.B;

  LossTerms L;
  Eigen::MatrixXd dZ;
  Eigen::MatrixXd dA;
  Eigen::MatrixXd dB;
  if (grad) {
    dZ = Eigen::MatrixXd::Zero(K, m);
    dA = Eigen::MatrixXd::Zero(K, K);
    dB = Eigen::MatrixXd::Zero(K, kZetaDim);
  }

  // Forward rollout from z_0.
  const Eigen::MatrixXd Zf = rollout_forward(A, B, Z.col(0), U, m - 1);
  std::vector<double> wf(m, 0.0);
  for (int k = 1; k < m; ++k) {
    wf[k] = discount(cfg.mu_fwd, k, seg.index, cfg.discount) / K;
    L.fwd += wf[k] * (Z.col(k) - Zf.col(k)).squaredNorm();
  }
  if (grad && cfg.beta_fwd != 0.0) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(K);
    for (int k = m - 1; k >= 1; --k) {
      const Eigen::VectorXd r = cfg.beta_fwd * 2.0 * wf[k] * (Z.col(k) - Zf.col(k));
      dZ.col(k) += r;
      a = (-r + A.transpose() * a).eval();
      dA += a * Zf.col(k - 1).transpose();
      dB += a * U.col(k - 1).transpose();
    }
    dZ.col(0) += A.transpose() * a;
  }

  // Backward rollout from z_{m-1}.
  Eigen::MatrixXd Zb;
  try {
    Zb = rollout_backward(A, B, Z.col(m - 1), U, m - 1);
  } catch (const NumericalError&) {
    L.bwd_skipped = 1;
  }
  if (!L.bwd_skipped) {
    // A backward rollout that drifts far outside the data is treated like a
    // singular A: the recursion amplifies by 1/|eig(A)| per step.
    const double scale = 1.0 + Z.colwise().norm().maxCoeff();
    if (!Zb.allFinite() || (Zb - Z).colwise().norm().maxCoeff() > kBackwardDivergence * scale) {
      L.bwd_skipped = 1;
    }
  }
  if (!L.bwd_skipped) {
    std::vector<double> wb(m, 0.0);
    for (int k = m - 2; k >= 0; --k) {
      wb[k] = discount(cfg.mu_bwd, m - 1 - k, seg.index, cfg.discount) / K;
      L.bwd += wb[k] * (Z.col(k) - Zb.col(k)).squaredNorm();
    }
    if (grad && cfg.beta_bwd != 0.0) {
      const Eigen::PartialPivLU<Eigen::MatrixXd> luT(A.transpose());
      Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
      for (int k = 0; k <= m - 2; ++k) {
        const Eigen::VectorXd s = cfg.beta_bwd * 2.0 * wb[k] * (Z.col(k) - Zb.col(k));
        dZ.col(k) += s;
        b = k > 0 ? Eigen::VectorXd(-s + luT.solve(b)) : Eigen::VectorXd(-s);
        const Eigen::VectorXd Ab = luT.solve(b);
        dA -= Ab * Zb.col(k).transpose();
        dB -= Ab * U.col(k).transpose();
      }
      dZ.col(m - 1) += luT.solve(b);
    }
  }

  // Reconstruction through the linear decoder.
  const Eigen::MatrixXd R = C * Z - seg.chi;
  L.rec = R.squaredNorm() / m;
  L.total = cfg.beta_fwd * L.fwd + cfg.beta_bwd * L.bwd + cfg.beta_rec * L.rec;

  if (grad) {
    dZ += cfg.beta_rec * (2.0 / m) * C.transpose() * R;
    grad->C = cfg.beta_rec * (2.0 / m) * R * Z.transpose();
    if (!fixed_fit && cfg.fit_gradient == FitGradient::kFull) {
      // [A B] = Z1 X^T S^-1 with X = [Z0; U], S = X X^T + ridge I.
      Eigen::MatrixXd X(K + kZetaDim, m - 1);
      X << Z.leftCols(m - 1), U;
      Eigen::MatrixXd S = X * X.transpose();
      S.diagonal().array() += cfg.segment_ridge;
      Eigen::MatrixXd GM(K, K + kZetaDim);
      GM << dA, dB;
      Eigen::MatrixXd M(K, K + kZetaDim);
      M << A, B;
      const Eigen::MatrixXd Gbar = S.ldlt().solve(GM.transpose()).transpose();
      const Eigen::MatrixXd Z1 = Z.rightCols(m - 1);
      const Eigen::MatrixXd dX = Gbar.transpose() * (Z1 - M * X) - M.transpose() * Gbar * X;
      dZ.rightCols(m - 1) += Gbar * X;
      dZ.leftCols(m - 1) += dX.topRows(K);
    }
    grad->embedding = mlp_backward(params, cache, dZ);
  }
  return L;
}

LossTerms batch_losses(std::span<const Segment> batch, const MlpParams& params,
                       const Eigen::MatrixXd& C, const TrainConfig& cfg, LossGradients* grad) {
  LossTerms sum;
  if (grad) {
    grad->embedding = MlpGradients::zeros_like(params);
    grad->C = Eigen::MatrixXd::Zero(C.rows(), C.cols());
  }
  LossGradients g;
  for (const Segment& seg : batch) {
    const LossTerms l = compute_losses(seg, params, C, cfg, grad ? &g : nullptr);
    sum.fwd += l.fwd;
    sum.bwd += l.bwd;
    sum.rec += l.rec;
    sum.total += l.total;
    sum.bwd_skipped += l.bwd_skipped;
    if (grad) {
      grad->embedding += g.embedding;
      grad->C += g.C;
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, batch.size()));
  sum.fwd /= n;
  sum.bwd /= n;
  sum.rec /= n;
  sum.total /= n;
  if (grad) {
    grad->embedding *= 1.0 / n;
    grad->C /= n;
  }
  return sum;
}

namespace {

Eigen::VectorXd pack(const MlpParams& p, const Eigen::MatrixXd& C) {
  Eigen::Index n = C.size();
  for (const auto& W : p.weights) n += W.size();
  for (const auto& b : p.biases) n += b.size();
  Eigen::VectorXd x(n);
  Eigen::Index o = 0;
  auto put = [&](const auto& M) {
    x.segment(o, M.size()) = Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
    o += M.size();
  };
  for (const auto& W : p.weights) put(W);
  for (const auto& b : p.biases) put(b);
  put(C);
  return x;
}

void unpack(const Eigen::VectorXd& x, MlpParams& p, Eigen::MatrixXd& C) {
  Eigen::Index o = 0;
  auto get = [&](auto& M) {
    Eigen::Map<Eigen::VectorXd>(M.data(), M.size()) = x.segment(o, M.size());
    o += M.size();
  };
  for (auto& W : p.weights) get(W);
  for (auto& b : p.biases) get(b);
  get(C);
}

Eigen::VectorXd pack_grad(const MlpGradients& g, const Eigen::MatrixXd& dC) {
  MlpParams p;
  p.weights = g.weights;
  p.biases = g.biases;
  return pack(p, dC);
}

struct Adam {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  void update(Eigen::VectorXd& x, const Eigen::VectorXd& g, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (m.size() != x.size()) {
      m = Eigen::VectorXd::Zero(x.size());
      v = Eigen::VectorXd::Zero(x.size());
    }
    ++step;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    x.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

std::string data_fingerprint(const std::vector<std::vector<LabeledSample>>& logs) {
  std::string bytes;
  for (const auto& log : logs) {
    for (const auto& s : log) {
      const Vec6 chi = s.chi.stacked();
      bytes.append(reinterpret_cast<const char*>(&s.t), sizeof(double));
      bytes.append(reinterpret_cast<const char*>(chi.data()), 6 * sizeof(double));
      bytes.append(reinterpret_cast<const char*>(s.zeta.data()), 6 * sizeof(double));
    }
    bytes.push_back('|');
  }
  return fnv1a_hex(bytes);
}

// Decoder initialized as the least-squares map from the initial embedding.
Eigen::MatrixXd initial_decoder(const std::vector<Segment>& segs, const MlpParams& params) {
  const int K = params.output_dim();
  Eigen::MatrixXd ZZ = Eigen::MatrixXd::Zero(K, K);
  Eigen::MatrixXd XZ = Eigen::MatrixXd::Zero(kWrenchDim, K);
  for (const Segment& s : segs) {
    const Eigen::MatrixXd Z = embed_batch(s.chi, params);
    ZZ += Z * Z.transpose();
    XZ += s.chi * Z.transpose();
  }
  ZZ.diagonal().array() += 1e-6 * std::max(1.0, ZZ.diagonal().mean());
  return ZZ.ldlt().solve(XZ.transpose()).transpose();
}

}  // namespace

LsFit refit_on_logs(const std::vector<std::vector<LabeledSample>>& logs, const MlpParams& params,
                    const NormStats& norm, double ridge) {
  std::size_t pairs = 0;
  for (const auto& log : logs) pairs += log.size() > 1 ? log.size() - 1 : 0;
  if (pairs == 0) throw NumericalError("no consecutive samples to fit (A, B)");
  const int K = params.output_dim();
  Eigen::MatrixXd Z0(K, pairs), Z1(K, pairs), U0(kZetaDim, pairs);
  Eigen::Index col = 0;
  for (const auto& log : logs) {
    if (log.size() < 2) continue;
    Eigen::MatrixXd X(kWrenchDim, log.size());
    for (std::size_t k = 0; k < log.size(); ++k) X.col(k) = norm.normalize_chi(log[k].chi.stacked());
    const Eigen::MatrixXd Z = embed_batch(X, params);
    const Eigen::Index n = static_cast<Eigen::Index>(log.size()) - 1;
    Z0.middleCols(col, n) = Z.leftCols(n);
    Z1.middleCols(col, n) = Z.rightCols(n);
    for (Eigen::Index k = 0; k < n; ++k) U0.col(col + k) = norm.normalize_zeta(log[k].zeta);
    col += n;
  }
  return fit_AB(Z0, Z1, U0, ridge);
}

TrainedModel train(const std::vector<std::vector<LabeledSample>>& logs, const TrainConfig& cfg) {
  cfg.validate();
  std::vector<LabeledSample> all;
  for (const auto& log : logs) all.insert(all.end(), log.begin(), log.end());
  const NormStats norm = NormStats::fit(all);

  std::vector<Segment> segs;
  for (const auto& log : logs) {
    for (Segment& s : make_segments(log, cfg.segment_len)) {
      s = normalize_segment(s, norm);
      s.index = static_cast<int>(segs.size());
      segs.push_back(std::move(s));
    }
  }

  std::vector<int> dims{kWrenchDim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(cfg.K);
  MlpParams raw = init_mlp(dims, cfg.gamma, true, cfg.seed);
  SpectralNormalizer sn(raw);
  Eigen::MatrixXd C = initial_decoder(segs, sn.effective(raw));

  const int batches = static_cast<int>((segs.size() + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = static_cast<long>(batches) * cfg.epochs;
  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(segs.size());
  std::iota(order.begin(), order.end(), 0);

  TrainedModel out;
  double lr_scale = 1.0;
  int retries = 0;
  Adam adam;
  Eigen::VectorXd x = pack(raw, C);
  std::vector<double> history;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Eigen::VectorXd x_start = x;
    const Adam adam_start = adam;
    const SpectralNormalizer sn_start = sn;
    const std::mt19937_64 rng_start = rng;

    std::shuffle(order.begin(), order.end(), rng);
    LossTerms epoch_loss;
    bool diverged = false;
    for (int b = 0; b < batches && !diverged; ++b) {
      std::vector<Segment> batch;
      for (int i = b * cfg.batch_size; i < std::min<int>((b + 1) * cfg.batch_size, segs.size()); ++i) {
        batch.push_back(segs[order[i]]);
      }
      unpack(x, raw, C);
      sn.power_step(raw);
      const MlpParams eff = sn.effective(raw);
      LossGradients g;
      const LossTerms l = batch_losses(batch, eff, C, cfg, &g);
      const Eigen::VectorXd gx = pack_grad(sn.backward(raw, g.embedding), g.C);
      if (!std::isfinite(l.total) || !gx.allFinite()) {
        diverged = true;
        break;
      }
      const long step = static_cast<long>(epoch) * batches + b;
      const double lr = cfg.learning_rate * lr_scale * 0.5 *
                        (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total_steps)));
      adam.update(x, gx, lr);
    }
    if (diverged || !x.allFinite()) {
      if (retries >= cfg.nan_retries) {
        throw NumericalError("training produced a non-finite loss at epoch " + std::to_string(epoch) +
                             " after " + std::to_string(retries) + " learning-rate halvings");
      }
      ++retries;
      lr_scale *= 0.5;
      x = x_start;
      adam = adam_start;
      sn = sn_start;
      rng = rng_start;
      --epoch;
      continue;
    }
    // The curve records L over the whole training set at the end of the epoch.
    unpack(x, raw, C);
    epoch_loss = batch_losses(segs, sn.effective(raw), C, cfg);
    if (!std::isfinite(epoch_loss.total)) throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
    out.curve.push_back({epoch, epoch_loss});
    history.push_back(epoch_loss.total);
    const std::size_t e = history.size() - 1;
    if (e >= static_cast<std::size_t>(cfg.patience)) {
      const double past = *std::min_element(history.begin(), history.end() - cfg.patience);
      const double now = *std::min_element(history.end() - cfg.patience, history.end());
      if ((past - now) / std::max(std::abs(past), 1e-300) < cfg.min_rel_improvement) break;
    }
  }

  unpack(x, raw, C);
  LiftedModel& model = out.model;
  model.embedding = apply_spectral_normalization(raw).params;
  model.C = C;
  model.norm = norm;
  model.t_s = cfg.t_s;
  model.window_T = cfg.window_T;
  model.ridge = cfg.online_ridge;
  const LsFit fit = refit_on_logs(logs, model.embedding, norm, cfg.ridge);
  model.A = fit.A;
  model.B = fit.B;
  out.config_hash = fnv1a_hex(cfg.canonical());
  out.data_hash = data_fingerprint(logs);
  out.lipschitz_bound = lipschitz_certificate(model.embedding);
  out.learning_rate_scale = lr_scale;
  return out;
}

EvalReport evaluate(const LiftedModel& model, std::span<const LabeledSample> log, int horizon) {
  EvalReport rep;
  rep.horizon = horizon;
  if (log.size() < 2) return rep;
  OnlinePredictor online(model);
  for (std::size_t k = 1; k < log.size(); ++k) {
    online.observe(log[k - 1].chi, log[k - 1].zeta);
    online.refit();
    rep.t.push_back(log[k].t);
    rep.one_step_pred.push_back(online.predict({}).front());
    rep.truth.push_back(log[k].chi);
  }
  rep.one_step = rmse_wrench(rep.one_step_pred, rep.truth);

  std::vector<Wrench> pred, truth;
  if (horizon >= 1 && log.size() > static_cast<std::size_t>(horizon)) {
    std::vector<Vec6> zetas(horizon);
    for (std::size_t s = 0; s + horizon < log.size(); ++s) {
      for (int i = 0; i < horizon; ++i) zetas[i] = log[s + i].zeta;
      pred.push_back(predict_wrench_horizon(model, log[s].chi, zetas).back());
      truth.push_back(log[s + horizon].chi);
    }
  }
  rep.multi_step = rmse_wrench(pred, truth);
  return rep;
}

}  // namespace npred
