#include "npred/certificate.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "npred/errors.hpp"
#include "npred/mlp.hpp"
#include "npred/trajectory_log.hpp"

namespace npred {

namespace {

double spectral(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

Eigen::MatrixXd normalized_chi(std::span<const LabeledSample> log, const NormStats& norm) {
  Eigen::MatrixXd X(kWrenchDim, static_cast<Eigen::Index>(log.size()));
  for (std::size_t k = 0; k < log.size(); ++k) X.col(k) = norm.normalize_chi(log[k].chi.stacked());
  return X;
}

}  // namespace

Alphas estimate_alphas(std::span<const LabeledSample> log, const NormStats& norm) {
  if (log.size() < 2) throw NumericalError("estimate_alphas needs at least two samples");
  Alphas a;
  for (std::size_t k = 0; k + 1 < log.size(); ++k) {
    const Vec6 dchi = norm.normalize_chi(log[k + 1].chi.stacked()) - norm.normalize_chi(log[k].chi.stacked());
    const Vec6 dzeta = norm.normalize_zeta(log[k + 1].zeta) - norm.normalize_zeta(log[k].zeta);
    a.alpha_chi = std::max(a.alpha_chi, dchi.norm());
    a.alpha_zeta = std::max(a.alpha_zeta, dzeta.norm());
  }
  return a;
}

double local_error_bound(double CA_norm, double L_Phi, double alpha_chi, double CB_norm,
                         double alpha_zeta, double recon_sup) {
  return (CA_norm * L_Phi + 1.0) * alpha_chi + CB_norm * alpha_zeta + recon_sup;
}

double BoundCertificate::bound(int n) const {
  if (n <= 0) return 0.0;
  if (n > static_cast<int>(partial_sums.size())) throw ConfigError("horizon exceeds the certificate's N_max");
  return c * partial_sums[n - 1];
}

BoundCertificate build_certificate(const LiftedModel& model,
                                   const std::vector<std::vector<LabeledSample>>& sets, int n_max) {
  if (n_max < 1) throw ConfigError("N_max must be positive");
  model.validate();
  BoundCertificate cert;
  cert.L_Phi = lipschitz_certificate(model.embedding);
  cert.C_norm = spectral(model.C);
  cert.CA_norm = spectral(model.C * model.A);
  cert.CB_norm = spectral(model.C * model.B);
  cert.spectral_radius = spectral_radius(model.A);
  cert.stable = cert.spectral_radius <= 1.0 + 1e-6;

  bool any = false;
  for (const auto& log : sets) {
    if (log.empty()) continue;
    if (log.size() >= 2) {
      const Alphas a = estimate_alphas(log, model.norm);
      cert.alpha_chi = std::max(cert.alpha_chi, a.alpha_chi);
      cert.alpha_zeta = std::max(cert.alpha_zeta, a.alpha_zeta);
    }
    const Eigen::MatrixXd X = normalized_chi(log, model.norm);
    const Eigen::MatrixXd R = X - model.C * embed_batch(X, model.embedding);
    cert.recon_sup = std::max(cert.recon_sup, R.colwise().norm().maxCoeff());
    any = true;
  }
  if (!any) throw ConfigError("certificate needs at least one labeled sample");
  cert.c = local_error_bound(cert.CA_norm, cert.L_Phi, cert.alpha_chi, cert.CB_norm, cert.alpha_zeta,
                             cert.recon_sup);

  cert.partial_sums.resize(n_max);
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(model.A.rows(), model.A.cols());
  double sum = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    sum += spectral(P);
    cert.partial_sums[n - 1] = sum;
    P = model.A * P;
  }
  return cert;
}

std::vector<BoundCheck> verify_global_bound(const LiftedModel& model, const BoundCertificate& cert,
                                            std::span<const LabeledSample> log,
                                            const std::vector<int>& n_list) {
  const Eigen::MatrixXd Z = embed_batch(normalized_chi(log, model.norm), model.embedding);
  Eigen::MatrixXd U(kZetaDim, static_cast<Eigen::Index>(log.size()));
  for (std::size_t k = 0; k < log.size(); ++k) U.col(k) = model.norm.normalize_zeta(log[k].zeta);
  const Eigen::MatrixXd BU = model.B * U;
  const int T = static_cast<int>(log.size());

  std::vector<BoundCheck> out;
  for (int n : n_list) {
    if (n < 0) throw ConfigError("rollout length must be non-negative");
    BoundCheck row;
    row.n = n;
    const double bound = cert.bound(n);
    for (int t0 = 0; t0 + n < T; ++t0) {
      Eigen::VectorXd z = Z.col(t0);
      for (int j = 0; j < n; ++j) z = model.A * z + BU.col(t0 + j);
      const double err = (Z.col(t0 + n) - z).norm();
      ++row.starts;
      if (err > bound) ++row.violations;
      if (bound > 0.0) row.max_ratio = std::max(row.max_ratio, err / bound);
    }
    out.push_back(row);
  }
  return out;
}

std::string certificate_to_json(const BoundCertificate& cert) {
  nlohmann::ordered_json j;
  j["alpha_chi"] = cert.alpha_chi;
  j["alpha_zeta"] = cert.alpha_zeta;
  j["L_Phi"] = cert.L_Phi;
  j["C_norm"] = cert.C_norm;
  j["CA_norm"] = cert.CA_norm;
  j["CB_norm"] = cert.CB_norm;
  j["recon_sup"] = cert.recon_sup;
  j["c"] = cert.c;
  j["spectral_radius"] = cert.spectral_radius;
  j["stable"] = cert.stable;
  j["partial_sums"] = cert.partial_sums;
  return j.dump(2) + "\n";
}

void write_certificate(const std::string& path, const BoundCertificate& cert) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << certificate_to_json(cert);
}

void write_bound_report(const std::string& path, const std::vector<BoundCheck>& rows) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << "n,starts,violations,max_ratio\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.starts << ',' << r.violations << ',' << format_double(r.max_ratio) << '\n';
  }
}

}  // namespace npred
