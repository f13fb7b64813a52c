#include "npred/lls.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "npred/errors.hpp"

namespace npred {

Vec6 NormStats::normalize_chi(const Vec6& chi) const {
  return (chi - chi_mean).cwiseQuotient(chi_scale);
}

Vec6 NormStats::denormalize_chi(const Vec6& chi_n) const {
  return chi_n.cwiseProduct(chi_scale) + chi_mean;
}

Vec6 NormStats::normalize_zeta(const Vec6& zeta) const {
  return (zeta - zeta_mean).cwiseQuotient(zeta_scale);
}

NormStats NormStats::fit(std::span<const LabeledSample> samples) {
  NormStats s;
  if (samples.empty()) return s;
  // Means stay at zero: centering would add a constant term that the lifted
  // system (no affine part) cannot represent.
  const double n = static_cast<double>(samples.size());
  Vec6 chi_var = Vec6::Zero();
  Vec6 zeta_var = Vec6::Zero();
  for (const auto& x : samples) {
    chi_var += x.chi.stacked().cwiseAbs2() / n;
    zeta_var += x.zeta.cwiseAbs2() / n;
  }
  auto group = [](const Vec6& var, int first) {
    return std::max(std::sqrt(var.segment<3>(first).mean()), 1e-6);
  };
  s.chi_scale << Vec3::Constant(group(chi_var, 0)), Vec3::Constant(group(chi_var, 3));
  s.zeta_scale << Vec3::Constant(group(zeta_var, 0)), Vec3::Constant(group(zeta_var, 3));
  return s;
}

LsFit fit_AB(const Eigen::MatrixXd& Z0, const Eigen::MatrixXd& Z1, const Eigen::MatrixXd& U0,
             double ridge, const Eigen::MatrixXd* prior) {
  if (Z0.cols() != Z1.cols() || Z0.cols() != U0.cols() || Z0.rows() != Z1.rows()) {
    throw NumericalError("fit_AB: misaligned snapshot matrices");
  }
  if (!(Z0.allFinite() && Z1.allFinite() && U0.allFinite())) {
    throw NumericalError("fit_AB: non-finite input");
  }
  if (ridge < 0.0) throw ConfigError("ridge must be non-negative");
  const Eigen::Index K = Z0.rows();
  const Eigen::Index p = U0.rows();
  Eigen::MatrixXd X(K + p, Z0.cols());
  X << Z0, U0;

  const Eigen::MatrixXd gram = X * X.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double ev_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  const double ev_min = std::max(eig.eigenvalues().minCoeff(), 0.0);

  LsFit fit;
  fit.condition = ev_min > 0.0 ? std::sqrt(ev_max / ev_min) : std::numeric_limits<double>::infinity();
  fit.ill_conditioned = !(fit.condition <= 1e12);

  Eigen::MatrixXd M;  // [A B], K x (K + p)
  if (ridge > 0.0) {
    Eigen::MatrixXd lhs = gram;
    lhs.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
    Eigen::MatrixXd rhs = X * Z1.transpose();
    if (prior) {
      if (prior->rows() != K || prior->cols() != K + p) throw NumericalError("fit_AB: prior has the wrong shape");
      rhs += ridge * prior->transpose();
    }
    M = ldlt.solve(rhs).transpose();
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X.transpose());
    M = cod.solve(Z1.transpose()).transpose();
  }
  if (!M.allFinite()) throw NumericalError("fit_AB: solution is not finite");
  fit.A = M.leftCols(K);
  fit.B = M.rightCols(p);
  return fit;
}

Eigen::MatrixXd rollout_forward(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                const Eigen::VectorXd& z0, const Eigen::MatrixXd& zeta_seq, int n) {
  if (zeta_seq.cols() < n) throw NumericalError("rollout_forward: zeta sequence too short");
  Eigen::MatrixXd Z(z0.size(), n + 1);
  Z.col(0) = z0;
  for (int k = 0; k < n; ++k) Z.col(k + 1) = A * Z.col(k) + B * zeta_seq.col(k);
  return Z;
}

Eigen::MatrixXd rollout_backward(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::VectorXd& z_end, const Eigen::MatrixXd& zeta_seq, int n) {
  if (zeta_seq.cols() < n) throw NumericalError("rollout_backward: zeta sequence too short");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double rcond = lu.rcond();
  if (!(rcond >= 1e-10)) throw NumericalError("backward rollout requires invertible A");
  Eigen::MatrixXd Z(z_end.size(), n + 1);
  Z.col(n) = z_end;
  for (int k = n - 1; k >= 0; --k) Z.col(k) = lu.solve(Z.col(k + 1) - B * zeta_seq.col(k));
  return Z;
}

double spectral_radius(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double LiftedModel::spectral_radius() const { return npred::spectral_radius(A); }

void LiftedModel::validate() const {
  embedding.validate();
  const Eigen::Index K = embedding.output_dim();
  if (embedding.input_dim() != kWrenchDim) throw ConfigError("embedding input must be 6-dimensional");
  if (C.rows() != kWrenchDim || C.cols() != K) throw ConfigError("decoder C must be 6 x K");
  if (A.rows() != K || A.cols() != K) throw ConfigError("A must be K x K");
  if (B.rows() != K || B.cols() != kZetaDim) throw ConfigError("B must be K x 6");
  if (!(t_s > 0.0)) throw ConfigError("sample time must be positive");
  if (window_T < 2) throw ConfigError("window length must be at least 2");
  if (!(C.allFinite() && A.allFinite() && B.allFinite())) throw ConfigError("non-finite model matrices");
}

WindowBuffer::WindowBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 2) throw ConfigError("window capacity must be at least 2");
  chi_.resize(capacity);
  zeta_.resize(capacity);
}

void WindowBuffer::push(const Vec6& chi_n, const Vec6& zeta_n) {
  if (count_ < capacity_) {
    chi_[index(count_)] = chi_n;
    zeta_[index(count_)] = zeta_n;
    ++count_;
    return;
  }
  chi_[head_] = chi_n;
  zeta_[head_] = zeta_n;
  head_ = (head_ + 1) % capacity_;
}

void WindowBuffer::clear() {
  count_ = 0;
  head_ = 0;
}

int WindowBuffer::index(int i) const { return (head_ + i) % capacity_; }

const Vec6& WindowBuffer::chi(int i) const { return chi_[index(i)]; }
const Vec6& WindowBuffer::zeta(int i) const { return zeta_[index(i)]; }

LsFit window_refit(const WindowBuffer& buf, const MlpParams& params, double ridge,
                   const Eigen::MatrixXd* prior) {
  if (!buf.full()) throw NumericalError("insufficient history");
  const int T = buf.count();
  Eigen::MatrixXd X(kWrenchDim, T);
  Eigen::MatrixXd U(kZetaDim, T - 1);
  for (int i = 0; i < T; ++i) {
    X.col(i) = buf.chi(i);
    if (i + 1 < T) U.col(i) = buf.zeta(i);
  }
  const Eigen::MatrixXd Z = embed_batch(X, params);
  return fit_AB(Z.leftCols(T - 1), Z.rightCols(T - 1), U, ridge, prior);
}

std::vector<Wrench> predict_wrench_horizon(const LiftedModel& model, const Eigen::MatrixXd& A,
                                           const Eigen::MatrixXd& B, const Wrench& chi_prev,
                                           std::span<const Vec6> zeta_seq) {
  std::vector<Wrench> out;
  out.reserve(zeta_seq.size());
  Eigen::VectorXd z = embed(model.norm.normalize_chi(chi_prev.stacked()), model.embedding);
  for (const Vec6& zeta : zeta_seq) {
    z = A * z + B * model.norm.normalize_zeta(zeta);
    const Vec6 chi_n = model.C * z;
    out.push_back(Wrench::from_stacked(model.norm.denormalize_chi(chi_n)));
  }
  return out;
}

std::vector<Wrench> predict_wrench_horizon(const LiftedModel& model, const Wrench& chi_prev,
                                           std::span<const Vec6> zeta_seq) {
  return predict_wrench_horizon(model, model.A, model.B, chi_prev, zeta_seq);
}

OnlinePredictor::OnlinePredictor(const LiftedModel& model)
    : model_(model), window_(model.window_T), A_(model.A), B_(model.B),
      prior_(model.A.rows(), model.A.cols() + model.B.cols()) {
  prior_ << model.A, model.B;
}

void OnlinePredictor::observe(const Wrench& chi, const Vec6& zeta) {
  window_.push(model_.norm.normalize_chi(chi.stacked()), model_.norm.normalize_zeta(zeta));
  last_chi_ = chi;
  last_zeta_ = zeta;
  has_label_ = true;
}

bool OnlinePredictor::refit() {
  if (!window_.full()) return false;
  const LsFit fit = window_refit(window_, model_.embedding, model_.ridge, &prior_);
  if (!fit.A.allFinite() || !fit.B.allFinite() || spectral_radius(fit.A) > 1.0 + 1e-6) {
    ++rejected_;
    return false;
  }
  A_ = fit.A;
  B_ = fit.B;
  ++refits_;
  return true;
}

std::vector<Wrench> OnlinePredictor::predict(std::span<const Vec6> zeta_plan) const {
  const std::size_t n = zeta_plan.size() + 1;
  if (!has_label_) return std::vector<Wrench>(n);
  std::vector<Vec6> seq;
  seq.reserve(n);
  seq.push_back(last_zeta_);
  seq.insert(seq.end(), zeta_plan.begin(), zeta_plan.end());
  return predict_wrench_horizon(model_, A_, B_, last_chi_, seq);
}

}  // namespace npred
