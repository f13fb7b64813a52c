#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "npred/lls.hpp"
#include "npred/ocp.hpp"
#include "npred/reference.hpp"
#include "npred/sim.hpp"
#include "npred/types.hpp"

namespace npred {

/// State vector layout used by the controller: [p (3); v (3); q (4, w first); omega (3)].
Eigen::VectorXd to_vector(const QuadState& s);
QuadState from_vector(const Eigen::VectorXd& x);

/// Quadrotor-only parameters known to the controller.
struct NominalParams {
  double m = 2.0;
  Mat3 J = Eigen::Vector3d(0.025, 0.025, 0.045).asDiagonal();
  double g = kGravity;

  static NominalParams from_plant(const PlantParams& p) { return {p.m, p.J, p.g}; }
};

enum class WrenchInjection {
  kContinuous,   // wrench held constant inside every integrator stage
  kDiscreteAdd,  // x_next = f_nominal(x, u) + Xi * chi * dt
};

/// RK4 over `substeps` equal substeps with the external wrench held constant.
QuadState f_hybrid(const QuadState& x, const ControlInput& u, const Wrench& chi, double dt,
                   const NominalParams& p, int substeps = 1,
                   WrenchInjection mode = WrenchInjection::kContinuous);
QuadState f_nominal(const QuadState& x, const ControlInput& u, double dt, const NominalParams& p,
                    int substeps = 1);

struct MpcConfig {
  int N = 20;
  double dt = 0.02;
  int substeps = 2;
  Eigen::VectorXd Q_diag;  // 12: position, velocity, attitude, rate
  Eigen::VectorXd R_diag;  // 4: thrust, torques
  double terminal_scale = 5.0;
  double f_max = 2.5 * 2.0 * kGravity;
  double tau_max = 1.0;
  Vec3 pos_lo = Vec3(-10.0, -10.0, 0.0);
  Vec3 pos_hi = Vec3(10.0, 10.0, 10.0);
  double v_max = 5.0;
  double omega_max = 6.0;
  Vec3 terminal_halfwidth = Vec3(1.0, 2.0, 5.0);  // position, velocity, rate
  bool state_boxes = true;
  bool terminal_box = true;
  int max_sqp_iters = 10;
  double sqp_tol = 1e-6;
  double qp_tol = 1e-8;
  WrenchInjection injection = WrenchInjection::kContinuous;

  MpcConfig();
  /// Throws ConfigError on invalid values.
  void validate() const;
  OcpCost cost() const;
  OcpBounds bounds() const;
  SqpOptions sqp_options() const;
};

/// Quadrotor dynamics for the SQP solver with one predicted wrench per stage.
/// With a predictor attached, refresh() re-predicts the wrenches from the
/// state guess; otherwise the stage wrenches stay as set.
class QuadMpcModel final : public OcpDynamics {
 public:
  QuadMpcModel(const NominalParams& p, const MpcConfig& cfg);

  int state_dim() const override { return 13; }
  int tangent_dim() const override { return 12; }
  int input_dim() const override { return 4; }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u, int stage) const override;
  Eigen::VectorXd difference(const Eigen::VectorXd& x, const Eigen::VectorXd& ref) const override;
  Eigen::VectorXd retract(const Eigen::VectorXd& x, const Eigen::VectorXd& d) const override;
  Eigen::VectorXd box_coordinates(const Eigen::VectorXd& x) const override;
  void refresh(const std::vector<Eigen::VectorXd>& states) override;

  void set_predictor(const OnlinePredictor* predictor) { predictor_ = predictor; }
  void set_wrenches(std::vector<Wrench> w) { wrenches_ = std::move(w); }
  const std::vector<Wrench>& wrenches() const { return wrenches_; }

 private:
  NominalParams params_;
  MpcConfig cfg_;
  const OnlinePredictor* predictor_ = nullptr;
  std::vector<Wrench> wrenches_;
};

/// Receding-horizon controller. Without a model it is the nominal MPC; with
/// one it labels the wrench online, refits the lifted system on the sliding
/// window and feeds the predicted wrenches into the horizon.
class NpMpcController final : public Controller {
 public:
  NpMpcController(const NominalParams& p, const MpcConfig& cfg, const ReferenceParams& ref,
                  std::optional<LiftedModel> model = std::nullopt);

  ControlInput compute(double t, const QuadState& x) override;
  TickDiagnostics diagnostics() const override { return diag_; }

  /// Replaces the prediction by a known constant wrench (oracle studies).
  void set_constant_wrench(const Wrench& w) { constant_ = w; }
  const OcpSolution& last_solution() const { return last_; }
  const OnlinePredictor* predictor() const { return predictor_ ? &*predictor_ : nullptr; }

 private:
  NominalParams params_;
  MpcConfig cfg_;
  ReferenceParams ref_;
  std::optional<OnlinePredictor> predictor_;
  std::optional<Wrench> constant_;
  QuadMpcModel dyn_;
  std::vector<double> t_hist_;
  std::vector<QuadState> x_hist_;
  std::vector<ControlInput> u_hist_;
  std::vector<Eigen::VectorXd> warm_;
  OcpSolution last_;
  TickDiagnostics diag_;
};

/// Reference states and inputs for stages 0 .. N starting at t. With stage
/// wrenches given, the reference inputs also cancel them: the thrust absorbs
/// the force along the reference body z axis and the torque absorbs tau_e.
void horizon_reference(const ReferenceParams& ref, double t, const MpcConfig& cfg,
                       const NominalParams& p, std::vector<Eigen::VectorXd>& x_ref,
                       std::vector<Eigen::VectorXd>& u_ref,
                       const std::vector<Wrench>* wrenches = nullptr);

/// Closed loop of the controller against the payload plant.
RolloutResult run_closed_loop(const PlantParams& plant, const MpcConfig& cfg,
                              const std::optional<LiftedModel>& model, const RolloutOptions& opts);

/// Log columns plus the reference position, fex_hat..tez_hat, sqp_iters and
/// status. Wall-clock timings go to write_timing_csv so reruns are byte-identical.
void write_closed_loop_csv(const std::string& path, const RolloutResult& r);
void write_timing_csv(const std::string& path, const RolloutResult& r);

}  // namespace npred
