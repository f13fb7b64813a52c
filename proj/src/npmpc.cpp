#include "npred/npmpc.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "npred/errors.hpp"
#include "npred/labeling.hpp"
#include "npred/rigid_body.hpp"
#include "npred/trajectory_log.hpp"

namespace npred {

namespace {

using Eigen::VectorXd;
using QuadVec = Eigen::Matrix<double, 13, 1>;

QuadVec pack(const QuadState& s) {
  QuadVec y;
  y << s.p_w, s.v_w, s.q, s.omega_b;
  return y;
}

QuadState unpack(const QuadVec& y) {
  QuadState s;
  s.p_w = y.segment<3>(0);
  s.v_w = y.segment<3>(3);
  s.q = y.segment<4>(6);
  s.q /= s.q.norm();
  s.omega_b = y.segment<3>(10);
  return s;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

VectorXd to_vector(const QuadState& s) { return pack(s); }

QuadState from_vector(const VectorXd& x) {
  if (x.size() != 13) throw ConfigError("quadrotor state vector must have 13 entries");
  return unpack(x);
}

QuadState f_hybrid(const QuadState& x, const ControlInput& u, const Wrench& chi, double dt,
                   const NominalParams& p, int substeps, WrenchInjection mode) {
  const Mat3 J_inv = p.J.inverse();
  const Vec3 f_ext = mode == WrenchInjection::kContinuous ? chi.f_e : Vec3::Zero();
  const Vec3 tau_ext = mode == WrenchInjection::kContinuous ? chi.tau_e : Vec3::Zero();
  auto rhs = [&](const QuadVec& y) {
    const RigidBodyRates r = rigid_body_rates(y.segment<3>(3), y.segment<4>(6), y.segment<3>(10), u,
                                              f_ext, tau_ext, p.m, p.J, J_inv, p.g);
    QuadVec d;
    d << r.p_dot, r.v_dot, r.q_dot, r.omega_dot;
    return d;
  };
  const double h = dt / substeps;
  QuadState s = x;
  for (int i = 0; i < substeps; ++i) s = unpack(rk4_step(rhs, pack(s), h));
  if (mode == WrenchInjection::kDiscreteAdd) {
    s.v_w += dt * chi.f_e / p.m;
    s.omega_b += dt * (J_inv * chi.tau_e);
  }
  return s;
}

QuadState f_nominal(const QuadState& x, const ControlInput& u, double dt, const NominalParams& p,
                    int substeps) {
  return f_hybrid(x, u, Wrench{}, dt, p, substeps);
}

MpcConfig::MpcConfig() : Q_diag(12), R_diag(4) {
  Q_diag << 40, 40, 40, 4, 4, 4, 10, 10, 10, 1, 1, 1;
  R_diag << 0.5, 1, 1, 1;
}

void MpcConfig::validate() const {
  if (N < 1) throw ConfigError("mpc.N must be at least 1");
  if (!(dt > 0.0)) throw ConfigError("mpc.dt must be positive");
  if (substeps < 1) throw ConfigError("mpc.substeps must be at least 1");
  if (Q_diag.size() != 12 || (Q_diag.array() < 0.0).any()) throw ConfigError("Q must be 12 non-negative weights");
  if (R_diag.size() != 4 || (R_diag.array() <= 0.0).any()) throw ConfigError("R must be 4 positive weights");
  if (!(terminal_scale >= 0.0)) throw ConfigError("terminal scale must be non-negative");
  if (!(f_max > 0.0) || !(tau_max > 0.0)) throw ConfigError("input limits must be positive");
  if ((pos_lo.array() >= pos_hi.array()).any()) throw ConfigError("position box is empty");
  if (!(v_max > 0.0) || !(omega_max > 0.0)) throw ConfigError("state limits must be positive");
  if (max_sqp_iters < 1) throw ConfigError("max SQP iterations must be positive");
}

OcpCost MpcConfig::cost() const {
  OcpCost c;
  c.Q = Q_diag.asDiagonal();
  c.R = R_diag.asDiagonal();
  c.P = terminal_scale * c.Q;
  return c;
}

OcpBounds MpcConfig::bounds() const {
  OcpBounds b;
  b.u_lo = Eigen::Vector4d(0.0, -tau_max, -tau_max, -tau_max);
  b.u_hi = Eigen::Vector4d(f_max, tau_max, tau_max, tau_max);
  if (state_boxes) {
    b.x_lo.resize(12);
    b.x_hi.resize(12);
    b.x_lo << pos_lo, Vec3::Constant(-v_max), Vec3::Constant(-INFINITY), Vec3::Constant(-omega_max);
    b.x_hi << pos_hi, Vec3::Constant(v_max), Vec3::Constant(INFINITY), Vec3::Constant(omega_max);
  }
  if (terminal_box) {
    b.terminal_halfwidth.resize(12);
    b.terminal_halfwidth << Vec3::Constant(terminal_halfwidth(0)), Vec3::Constant(terminal_halfwidth(1)),
        Vec3::Constant(INFINITY), Vec3::Constant(terminal_halfwidth(2));
  }
  return b;
}

SqpOptions MpcConfig::sqp_options() const {
  SqpOptions o;
  o.max_iters = max_sqp_iters;
  o.tol = sqp_tol;
  o.qp.tol = qp_tol;
  return o;
}

QuadMpcModel::QuadMpcModel(const NominalParams& p, const MpcConfig& cfg)
    : params_(p), cfg_(cfg), wrenches_(cfg.N) {}

VectorXd QuadMpcModel::step(const VectorXd& x, const VectorXd& u, int stage) const {
  const Wrench& w = wrenches_.at(static_cast<std::size_t>(stage));
  const ControlInput in{u(0), u.tail<3>()};
  return pack(f_hybrid(unpack(x), in, w, cfg_.dt, params_, cfg_.substeps, cfg_.injection));
}

VectorXd QuadMpcModel::difference(const VectorXd& x, const VectorXd& ref) const {
  VectorXd d(12);
  d.segment<3>(0) = x.segment<3>(0) - ref.segment<3>(0);
  d.segment<3>(3) = x.segment<3>(3) - ref.segment<3>(3);
  d.segment<3>(6) = quat_log(quat_multiply(quat_conjugate(ref.segment<4>(6)), x.segment<4>(6)));
  d.segment<3>(9) = x.segment<3>(10) - ref.segment<3>(10);
  return d;
}

VectorXd QuadMpcModel::retract(const VectorXd& x, const VectorXd& d) const {
  VectorXd y(13);
  y.segment<3>(0) = x.segment<3>(0) + d.segment<3>(0);
  y.segment<3>(3) = x.segment<3>(3) + d.segment<3>(3);
  y.segment<4>(6) = quat_multiply(x.segment<4>(6), quat_exp(d.segment<3>(6)));
  y.segment<3>(10) = x.segment<3>(10) + d.segment<3>(9);
  return y;
}

VectorXd QuadMpcModel::box_coordinates(const VectorXd& x) const {
  VectorXd c(12);
  c << x.segment<3>(0), x.segment<3>(3), Vec3::Zero(), x.segment<3>(10);
  return c;
}

void QuadMpcModel::refresh(const std::vector<VectorXd>& states) {
  if (!predictor_) return;
  std::vector<Vec6> zeta_plan;
  zeta_plan.reserve(cfg_.N - 1);
  for (int i = 0; i + 1 < cfg_.N; ++i) {
    Vec6 z;
    z << states[i].segment<3>(3), states[i].segment<3>(10);
    zeta_plan.push_back(z);
  }
  wrenches_ = predictor_->predict(zeta_plan);
  for (auto& w : wrenches_) {
    if (!w.finite()) throw NumericalError("non-finite wrench prediction");
  }
}

void horizon_reference(const ReferenceParams& ref, double t, const MpcConfig& cfg,
                       const NominalParams& p, std::vector<VectorXd>& x_ref,
                       std::vector<VectorXd>& u_ref, const std::vector<Wrench>* wrenches) {
  x_ref.resize(cfg.N + 1);
  u_ref.resize(cfg.N);
  for (int i = 0; i <= cfg.N; ++i) {
    const ReferencePoint rp = reference_trajectory(ref, t + i * cfg.dt, p.m, p.J, p.g);
    x_ref[i] = pack(rp.x);
    if (i == cfg.N) break;
    ControlInput u = rp.u;
    if (wrenches && static_cast<std::size_t>(i) < wrenches->size()) {
      const Wrench& w = (*wrenches)[i];
      u.f_u -= w.f_e.dot(rp.x.rotation().col(2));
      u.tau_m -= w.tau_e;
    }
    u_ref[i] = u.stacked();
  }
}

NpMpcController::NpMpcController(const NominalParams& p, const MpcConfig& cfg,
                                 const ReferenceParams& ref, std::optional<LiftedModel> model)
    : params_(p), cfg_(cfg), ref_(ref), dyn_(p, cfg) {
  cfg_.validate();
  if (model) {
    model->validate();
    predictor_.emplace(*model);
  }
}

ControlInput NpMpcController::compute(double t, const QuadState& x) {
  diag_ = {};
  t_hist_.push_back(t);
  x_hist_.push_back(x);
  if (t_hist_.size() > 3) {
    t_hist_.erase(t_hist_.begin());
    x_hist_.erase(x_hist_.begin());
  }

  if (predictor_ && t_hist_.size() == 3 && u_hist_.size() == 2) {
    const auto start = std::chrono::steady_clock::now();
    const double h = t_hist_[2] - t_hist_[0];
    const QuadState& mid = x_hist_[1];
    const Vec3 v_dot = (x_hist_[2].v_w - x_hist_[0].v_w) / h;
    const Vec3 w_dot = (x_hist_[2].omega_b - x_hist_[0].omega_b) / h;
    const ControlInput u_mid{0.5 * (u_hist_[0].f_u + u_hist_[1].f_u),
                             0.5 * (u_hist_[0].tau_m + u_hist_[1].tau_m)};
    PlantParams lp;
    lp.m = params_.m;
    lp.J = params_.J;
    lp.g = params_.g;
    predictor_->observe(label_wrench(mid, v_dot, w_dot, u_mid, lp), zeta_of(mid));
    predictor_->refit();
    diag_.refit_ms = elapsed_ms(start);
  }

  // Feedforward wrenches for the reference inputs: last tick's prediction,
  // shifted by one stage.
  std::vector<Wrench> feedforward;
  if (constant_) {
    feedforward.assign(cfg_.N, *constant_);
  } else if (predictor_ && !warm_.empty()) {
    feedforward.assign(dyn_.wrenches().begin() + 1, dyn_.wrenches().end());
    feedforward.push_back(dyn_.wrenches().back());
  }
  std::vector<VectorXd> x_ref, u_ref;
  horizon_reference(ref_, t, cfg_, params_, x_ref, u_ref, feedforward.empty() ? nullptr : &feedforward);
  std::vector<VectorXd> warm;
  if (!warm_.empty()) {
    warm.assign(warm_.begin() + 1, warm_.end());
    warm.push_back(warm_.back());
  }

  if (constant_) {
    dyn_.set_predictor(nullptr);
    dyn_.set_wrenches(std::vector<Wrench>(cfg_.N, *constant_));
  } else if (predictor_) {
    dyn_.set_predictor(&*predictor_);
  } else {
    dyn_.set_predictor(nullptr);
    dyn_.set_wrenches(std::vector<Wrench>(cfg_.N));
  }

  const auto start = std::chrono::steady_clock::now();
  last_ = solve_ocp(dyn_, pack(x), x_ref, u_ref, cfg_.cost(), cfg_.bounds(), cfg_.sqp_options(), warm);
  diag_.solve_ms = elapsed_ms(start);
  warm_ = last_.u_seq;

  const ControlInput u{last_.u_seq[0](0), last_.u_seq[0].tail<3>()};
  u_hist_.push_back(u);
  if (u_hist_.size() > 2) u_hist_.erase(u_hist_.begin());
  diag_.chi_hat = dyn_.wrenches().front();
  diag_.sqp_iters = last_.iterations;
  diag_.status = last_.status;
  return u;
}

RolloutResult run_closed_loop(const PlantParams& plant, const MpcConfig& cfg,
                              const std::optional<LiftedModel>& model, const RolloutOptions& opts) {
  NpMpcController ctrl(NominalParams::from_plant(plant), cfg, opts.reference, model);
  return simulate_closed_loop(ctrl, plant, opts);
}

void write_closed_loop_csv(const std::string& path, const RolloutResult& r) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  const auto& cols = log_columns(true);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << ",x_ref,y_ref,z_ref,fex_hat,fey_hat,fez_hat,tex_hat,tey_hat,tez_hat,sqp_iters,status\n";
  const TrajectoryLog& log = r.log;
  for (std::size_t k = 0; k < log.size(); ++k) {
    const QuadState& s = log.states[k];
    const ControlInput& u = log.inputs[k];
    const Vec6 chi = log.wrenches[k].stacked();
    const TickDiagnostics& d = r.diagnostics[k];
    const Vec6 hat = d.chi_hat.stacked();
    os << format_double(log.t[k]);
    for (int i = 0; i < 3; ++i) os << ',' << format_double(s.p_w(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(s.v_w(i));
    for (int i = 0; i < 4; ++i) os << ',' << format_double(s.q(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(s.omega_b(i));
    os << ',' << format_double(u.f_u);
    for (int i = 0; i < 3; ++i) os << ',' << format_double(u.tau_m(i));
    for (int i = 0; i < 6; ++i) os << ',' << format_double(chi(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.reference[k].p_w(i));
    for (int i = 0; i < 6; ++i) os << ',' << format_double(hat(i));
    os << ',' << d.sqp_iters << ',' << to_string(d.status) << '\n';
  }
}

void write_timing_csv(const std::string& path, const RolloutResult& r) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << "t,refit_ms,solve_ms\n";
  for (std::size_t k = 0; k < r.log.size(); ++k) {
    os << format_double(r.log.t[k]) << ',' << format_double(r.diagnostics[k].refit_ms) << ','
       << format_double(r.diagnostics[k].solve_ms) << '\n';
  }
}

}  // namespace npred
