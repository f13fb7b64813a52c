#pragma once

#include <span>
#include <string>
#include <vector>

#include "npred/labeling.hpp"
#include "npred/lls.hpp"

namespace npred {

struct Alphas {
  double alpha_chi = 0.0;   // max ||chi_{k+1} - chi_k||, normalized units
  double alpha_zeta = 0.0;  // max ||zeta_{k+1} - zeta_k||, normalized units
};

/// Maxima over consecutive samples of one log. Throws NumericalError below two samples.
Alphas estimate_alphas(std::span<const LabeledSample> log, const NormStats& norm);

/// Error-bound certificate; every quantity in the model's normalized units.
struct BoundCertificate {
  double alpha_chi = 0.0;
  double alpha_zeta = 0.0;
  double L_Phi = 0.0;
  double C_norm = 0.0;
  double CA_norm = 0.0;
  double CB_norm = 0.0;
  double recon_sup = 0.0;
  double c = 0.0;
  double spectral_radius = 0.0;
  bool stable = false;
  std::vector<double> partial_sums;  // entry n-1 holds sum_{i<n} ||A^i||, n = 1 .. N_max

  /// c * sum_{i<n} ||A^i||; 0 for n = 0. Throws ConfigError beyond N_max.
  double bound(int n) const;
};

/// alpha and the reconstruction supremum are taken over every log in `sets`
/// (pairs never straddle two logs). Unstable A yields stable = false.
BoundCertificate build_certificate(const LiftedModel& model,
                                   const std::vector<std::vector<LabeledSample>>& sets, int n_max);

/// c = (||CA|| L_Phi + 1) alpha_chi + ||CB|| alpha_zeta + recon_sup.
double local_error_bound(double CA_norm, double L_Phi, double alpha_chi, double CB_norm,
                         double alpha_zeta, double recon_sup);

struct BoundCheck {
  int n = 0;
  int starts = 0;
  int violations = 0;
  double max_ratio = 0.0;  // max ||E_n|| / bound(n)
};

/// For every start t0 with t0 + n inside the log: E_n = Phi(chi_{t0+n}) minus the
/// n-step lifted rollout from Phi(chi_{t0}) driven by zeta_{t0 .. t0+n-1}.
std::vector<BoundCheck> verify_global_bound(const LiftedModel& model, const BoundCertificate& cert,
                                            std::span<const LabeledSample> log,
                                            const std::vector<int>& n_list = {1, 5, 10, 20, 40});

std::string certificate_to_json(const BoundCertificate& cert);
void write_certificate(const std::string& path, const BoundCertificate& cert);
void write_bound_report(const std::string& path, const std::vector<BoundCheck>& rows);

}  // namespace npred
