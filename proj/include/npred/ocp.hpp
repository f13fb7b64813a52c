#pragma once

#include <vector>

#include <Eigen/Dense>

#include "npred/sim.hpp"

namespace npred {

/// One stage of a linear-quadratic problem in deviation coordinates:
/// x_{i+1} = A x_i + B u_i + c, stage cost 0.5 x'Qx + q'x + 0.5 u'Ru + r'u.
/// Empty bound vectors mean "unbounded"; infinite entries drop single components.
struct LqStage {
  Eigen::MatrixXd A, B;
  Eigen::VectorXd c;
  Eigen::MatrixXd Q, R;
  Eigen::VectorXd q, r;
  Eigen::VectorXd x_lo, x_hi;  // bounds on x_i, ignored at i = 0
  Eigen::VectorXd u_lo, u_hi;
};

struct LqProblem {
  Eigen::VectorXd x0;
  std::vector<LqStage> stages;  // N stages
  Eigen::MatrixXd Q_N;
  Eigen::VectorXd q_N;
  Eigen::VectorXd xN_lo, xN_hi;
};

struct QpOptions {
  double tol = 1e-9;
  int max_iters = 60;
};

struct LqSolution {
  std::vector<Eigen::VectorXd> x;  // N + 1
  std::vector<Eigen::VectorXd> u;  // N
  int iterations = 0;
  double kkt_residual = 0.0;  // max of stationarity, primal and complementarity residuals
  bool converged = false;
  bool infeasible = false;
};

/// Primal-dual interior point (Mehrotra predictor-corrector). Each Newton
/// step is an unconstrained LQ problem solved by a Riccati recursion; box
/// multipliers enter as diagonal barrier terms.
LqSolution solve_box_lq(const LqProblem& prob, const QpOptions& opts = {});

/// Discrete-time dynamics as seen by the SQP solver. States live in a
/// representation of size state_dim(); deviations, costs and boxes use a
/// tangent space of size tangent_dim().
class OcpDynamics {
 public:
  virtual ~OcpDynamics() = default;
  virtual int state_dim() const = 0;
  virtual int tangent_dim() const = 0;
  virtual int input_dim() const = 0;
  /// x_{i+1} for horizon stage i.
  virtual Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u, int stage) const = 0;
  /// Tangent-space error of x relative to ref.
  virtual Eigen::VectorXd difference(const Eigen::VectorXd& x, const Eigen::VectorXd& ref) const {
    return x - ref;
  }
  /// Inverse of difference: difference(retract(x, d), x) = d.
  virtual Eigen::VectorXd retract(const Eigen::VectorXd& x, const Eigen::VectorXd& d) const {
    return x + d;
  }
  /// Coordinates subject to state boxes; must move one-to-one with the
  /// tangent components that carry finite bounds.
  virtual Eigen::VectorXd box_coordinates(const Eigen::VectorXd& x) const { return x; }
  /// Called with the current state guess (N + 1 states) once per SQP
  /// iteration, before linearization. Stage data derived from the guess is
  /// then held fixed until the next call.
  virtual void refresh(const std::vector<Eigen::VectorXd>& /*states*/) {}
};

/// x_{i+1} = A x_i + B u_i; used for the double-integrator reduction.
class LinearDynamics final : public OcpDynamics {
 public:
  LinearDynamics(Eigen::MatrixXd A, Eigen::MatrixXd B) : A_(std::move(A)), B_(std::move(B)) {}
  int state_dim() const override { return static_cast<int>(A_.rows()); }
  int tangent_dim() const override { return static_cast<int>(A_.rows()); }
  int input_dim() const override { return static_cast<int>(B_.cols()); }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u, int) const override {
    return A_ * x + B_ * u;
  }
  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd B_;
};

/// Exact discretization of `axes` decoupled double integrators, state [p; v].
LinearDynamics double_integrator(double dt, int axes = 3);

struct OcpCost {
  Eigen::MatrixXd Q;  // tangent_dim square
  Eigen::MatrixXd R;  // input_dim square
  Eigen::MatrixXd P;  // terminal, tangent_dim square
};

struct OcpBounds {
  Eigen::VectorXd u_lo, u_hi;
  Eigen::VectorXd x_lo, x_hi;             // on box coordinates, stages 1 .. N - 1 and N
  Eigen::VectorXd terminal_halfwidth;     // around box coordinates of the terminal reference
};

struct SqpOptions {
  int max_iters = 10;
  double tol = 1e-6;       // on the max-norm of the input step
  double fd_step = 1e-6;   // central differences for Jacobians
  double merit_penalty = 1e4;
  QpOptions qp;
};

struct OcpSolution {
  std::vector<Eigen::VectorXd> u_seq;  // N
  std::vector<Eigen::VectorXd> x_seq;  // N + 1
  double cost = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
  bool terminal_relaxed = false;
};

/// cost = sum_i |e_x_i|_Q^2 + |e_u_i|_R^2 + |e_x_N|_P^2 with e_x from difference().
double ocp_cost(const OcpDynamics& dyn, const std::vector<Eigen::VectorXd>& xs,
                const std::vector<Eigen::VectorXd>& us, const std::vector<Eigen::VectorXd>& x_ref,
                const std::vector<Eigen::VectorXd>& u_ref, const OcpCost& cost);

std::vector<Eigen::VectorXd> rollout(const OcpDynamics& dyn, const Eigen::VectorXd& x0,
                                     const std::vector<Eigen::VectorXd>& us);

/// Single-shooting Gauss-Newton SQP with finite-difference Jacobians and a
/// merit line search. x_ref has N + 1 entries, u_ref and u_init N entries
/// (u_init empty: start from u_ref).
OcpSolution solve_ocp(OcpDynamics& dyn, const Eigen::VectorXd& x0,
                      const std::vector<Eigen::VectorXd>& x_ref,
                      const std::vector<Eigen::VectorXd>& u_ref, const OcpCost& cost,
                      const OcpBounds& bounds, const SqpOptions& opts,
                      const std::vector<Eigen::VectorXd>& u_init = {});

}  // namespace npred
