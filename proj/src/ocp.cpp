#include "npred/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "npred/errors.hpp"

namespace npred {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One scalar bound: sign * (z[stage].on_x/u(idx) - bound) >= 0.
struct Bound {
  int stage;
  bool on_x;
  int idx;
  double value;
  double sign;
};

void collect_bounds(const VectorXd& lo, const VectorXd& hi, int stage, bool on_x,
                    std::vector<Bound>& out) {
  for (Eigen::Index j = 0; j < lo.size(); ++j) {
    if (std::isfinite(lo(j))) out.push_back({stage, on_x, static_cast<int>(j), lo(j), 1.0});
  }
  for (Eigen::Index j = 0; j < hi.size(); ++j) {
    if (std::isfinite(hi(j))) out.push_back({stage, on_x, static_cast<int>(j), hi(j), -1.0});
  }
}

struct RiccatiFactor {
  std::vector<MatrixXd> P;  // P[i], i = 1 .. N
  std::vector<MatrixXd> K;
  std::vector<MatrixXd> Qux;
  std::vector<Eigen::LLT<MatrixXd>> Quu;
};

// Riccati factorization with extra diagonal terms on x (stages 1..N) and u.
RiccatiFactor riccati_factor(const LqProblem& prob, const std::vector<VectorXd>& dx,
                             const std::vector<VectorXd>& du) {
  const int N = static_cast<int>(prob.stages.size());
  RiccatiFactor f;
  f.P.resize(N + 1);
  f.K.resize(N);
  f.Qux.resize(N);
  f.Quu.resize(N);
  f.P[N] = prob.Q_N;
  f.P[N].diagonal() += dx[N];
  for (int i = N - 1; i >= 0; --i) {
    const LqStage& s = prob.stages[i];
    const MatrixXd PA = f.P[i + 1] * s.A;
    const MatrixXd PB = f.P[i + 1] * s.B;
    MatrixXd Quu = s.R + s.B.transpose() * PB;
    Quu.diagonal() += du[i];
    f.Qux[i] = s.B.transpose() * PA;
    f.Quu[i].compute(Quu);
    if (f.Quu[i].info() != Eigen::Success) throw NumericalError("LQ subproblem is not convex");
    f.K[i] = -f.Quu[i].solve(f.Qux[i]);
    if (i > 0) {
      MatrixXd P = s.Q + s.A.transpose() * PA + f.Qux[i].transpose() * f.K[i];
      P.diagonal() += dx[i];
      f.P[i] = 0.5 * (P + P.transpose());
    }
  }
  return f;
}

// Solves the LQ problem with linear terms gx (stages 1..N), gu and offsets c
// starting from x_init; returns (x, u) trajectories.
void riccati_solve(const LqProblem& prob, const RiccatiFactor& f, const std::vector<VectorXd>& gx,
                   const std::vector<VectorXd>& gu, bool use_offsets, const VectorXd& x_init,
                   std::vector<VectorXd>& x, std::vector<VectorXd>& u) {
  const int N = static_cast<int>(prob.stages.size());
  std::vector<VectorXd> k(N);
  VectorXd p = gx[N];
  for (int i = N - 1; i >= 0; --i) {
    const LqStage& s = prob.stages[i];
    const VectorXd pc = use_offsets ? VectorXd(p + f.P[i + 1] * s.c) : p;
    k[i] = -f.Quu[i].solve(gu[i] + s.B.transpose() * pc);
    if (i > 0) p = gx[i] + s.A.transpose() * pc + f.Qux[i].transpose() * k[i];
  }
  x.resize(N + 1);
  u.resize(N);
  x[0] = x_init;
  for (int i = 0; i < N; ++i) {
    const LqStage& s = prob.stages[i];
    u[i] = f.K[i] * x[i] + k[i];
    x[i + 1] = s.A * x[i] + s.B * u[i];
    if (use_offsets) x[i + 1] += s.c;
  }
}

double& var(std::vector<VectorXd>& x, std::vector<VectorXd>& u, const Bound& b) {
  return b.on_x ? x[b.stage](b.idx) : u[b.stage](b.idx);
}

}  // namespace

LqSolution solve_box_lq(const LqProblem& prob, const QpOptions& opts) {
  const int N = static_cast<int>(prob.stages.size());
  if (N < 1) throw ConfigError("horizon must have at least one stage");
  const Eigen::Index nx = prob.x0.size();

  std::vector<Bound> bounds;
  for (int i = 0; i < N; ++i) {
    const LqStage& s = prob.stages[i];
    collect_bounds(s.u_lo, s.u_hi, i, false, bounds);
    if (i > 0) collect_bounds(s.x_lo, s.x_hi, i, true, bounds);
  }
  collect_bounds(prob.xN_lo, prob.xN_hi, N, true, bounds);
  const std::size_t nb = bounds.size();

  std::vector<VectorXd> dx(N + 1, VectorXd::Zero(nx));
  std::vector<VectorXd> du(N);
  for (int i = 0; i < N; ++i) du[i] = VectorXd::Zero(prob.stages[i].B.cols());
  std::vector<VectorXd> gx(N + 1), gu(N);
  gx[0] = VectorXd::Zero(nx);
  for (int i = 1; i < N; ++i) gx[i] = prob.stages[i].q;
  gx[N] = prob.q_N;
  for (int i = 0; i < N; ++i) gu[i] = prob.stages[i].r;

  // Unconstrained solution as the starting point, inputs clipped into their box.
  LqSolution sol;
  {
    const RiccatiFactor f = riccati_factor(prob, dx, du);
    riccati_solve(prob, f, gx, gu, true, prob.x0, sol.x, sol.u);
  }
  if (nb == 0) {
    sol.converged = true;
    sol.iterations = 1;
    return sol;
  }
  for (int i = 0; i < N; ++i) {
    const LqStage& s = prob.stages[i];
    if (s.u_lo.size()) sol.u[i] = sol.u[i].cwiseMax(s.u_lo);
    if (s.u_hi.size()) sol.u[i] = sol.u[i].cwiseMin(s.u_hi);
    sol.x[i + 1] = s.A * sol.x[i] + s.B * sol.u[i] + s.c;
  }

  std::vector<VectorXd>& x = sol.x;
  std::vector<VectorXd>& u = sol.u;
  VectorXd s(nb), lam(nb), rp(nb), ds(nb), dl(nb), ds_aff(nb), dl_aff(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    const Bound& b = bounds[j];
    s(j) = std::max(b.sign * (var(x, u, b) - b.value), 1.0);
    lam(j) = 1.0;
  }

  std::vector<VectorXd> rdx(N + 1), rdu(N), step_x, step_u;
  auto gradients = [&] {
    rdx[0] = VectorXd::Zero(nx);
    for (int i = 1; i < N; ++i) rdx[i] = prob.stages[i].Q * x[i] + prob.stages[i].q;
    rdx[N] = prob.Q_N * x[N] + prob.q_N;
    for (int i = 0; i < N; ++i) rdu[i] = prob.stages[i].R * u[i] + prob.stages[i].r;
    for (std::size_t j = 0; j < nb; ++j) {
      const Bound& b = bounds[j];
      (b.on_x ? rdx[b.stage](b.idx) : rdu[b.stage](b.idx)) -= b.sign * lam(j);
    }
  };
  auto reduced_gradient_norm = [&] {
    double worst = 0.0;
    VectorXd adj = rdx[N];
    for (int i = N - 1; i >= 0; --i) {
      const LqStage& st = prob.stages[i];
      worst = std::max(worst, (rdu[i] + st.B.transpose() * adj).cwiseAbs().maxCoeff());
      if (i > 0) adj = rdx[i] + st.A.transpose() * adj;
    }
    return worst;
  };
  // Newton direction for complementarity target rc.
  auto direction = [&](const RiccatiFactor& f, const VectorXd& rc, VectorXd& ds_out, VectorXd& dl_out) {
    std::vector<VectorXd> lx = rdx, lu = rdu;
    for (std::size_t j = 0; j < nb; ++j) {
      const Bound& b = bounds[j];
      const double t = b.sign * (rc(j) - lam(j) * rp(j)) / s(j);
      (b.on_x ? lx[b.stage](b.idx) : lu[b.stage](b.idx)) -= t;
    }
    riccati_solve(prob, f, lx, lu, false, VectorXd::Zero(nx), step_x, step_u);
    for (std::size_t j = 0; j < nb; ++j) {
      const Bound& b = bounds[j];
      const double dz = b.on_x ? step_x[b.stage](b.idx) : step_u[b.stage](b.idx);
      ds_out(j) = b.sign * dz + rp(j);
      dl_out(j) = (rc(j) - lam(j) * ds_out(j)) / s(j);
    }
  };
  auto max_step = [](const VectorXd& v, const VectorXd& dv) {
    double a = 1.0;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (dv(j) < 0.0) a = std::min(a, -v(j) / dv(j));
    }
    return a;
  };

  for (int it = 0; it < opts.max_iters; ++it) {
    gradients();
    for (std::size_t j = 0; j < nb; ++j) {
      const Bound& b = bounds[j];
      rp(j) = b.sign * (var(x, u, b) - b.value) - s(j);
    }
    const double mu = s.dot(lam) / static_cast<double>(nb);
    const double stat = reduced_gradient_norm();
    const double prim = rp.cwiseAbs().maxCoeff();
    sol.kkt_residual = std::max({stat, prim, mu});
    sol.iterations = it;
    if (sol.kkt_residual <= opts.tol) {
      sol.converged = true;
      return sol;
    }
    if (!std::isfinite(sol.kkt_residual) || lam.maxCoeff() > 1e14) break;

    for (auto& d : dx) d.setZero();
    for (auto& d : du) d.setZero();
    for (std::size_t j = 0; j < nb; ++j) {
      const Bound& b = bounds[j];
      (b.on_x ? dx[b.stage](b.idx) : du[b.stage](b.idx)) += lam(j) / s(j);
    }
    const RiccatiFactor f = riccati_factor(prob, dx, du);

    const VectorXd rc_aff = -s.cwiseProduct(lam);
    direction(f, rc_aff, ds_aff, dl_aff);
    const double ap_aff = max_step(s, ds_aff);
    const double ad_aff = max_step(lam, dl_aff);
    const double mu_aff =
        (s + ap_aff * ds_aff).dot(lam + ad_aff * dl_aff) / static_cast<double>(nb);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    const VectorXd rc = VectorXd::Constant(nb, sigma * mu) - s.cwiseProduct(lam) -
                        ds_aff.cwiseProduct(dl_aff);
    direction(f, rc, ds, dl);
    const double ap = std::min(1.0, 0.995 * max_step(s, ds));
    const double ad = std::min(1.0, 0.995 * max_step(lam, dl));
    for (int i = 0; i < N; ++i) u[i] += ap * step_u[i];
    for (int i = 1; i <= N; ++i) x[i] += ap * step_x[i];
    s += ap * ds;
    lam += ad * dl;
  }
  sol.iterations = opts.max_iters;
  gradients();
  double prim = 0.0;
  for (std::size_t j = 0; j < nb; ++j) {
    const Bound& b = bounds[j];
    prim = std::max(prim, std::max(0.0, -b.sign * (var(x, u, b) - b.value)));
  }
  sol.infeasible = prim > 1e-6;
  return sol;
}

LinearDynamics double_integrator(double dt, int axes) {
  MatrixXd A = MatrixXd::Identity(2 * axes, 2 * axes);
  A.topRightCorner(axes, axes) = dt * MatrixXd::Identity(axes, axes);
  MatrixXd B(2 * axes, axes);
  B << 0.5 * dt * dt * MatrixXd::Identity(axes, axes), dt * MatrixXd::Identity(axes, axes);
  return LinearDynamics(A, B);
}

std::vector<VectorXd> rollout(const OcpDynamics& dyn, const VectorXd& x0,
                              const std::vector<VectorXd>& us) {
  std::vector<VectorXd> xs;
  xs.reserve(us.size() + 1);
  xs.push_back(x0);
  for (std::size_t i = 0; i < us.size(); ++i) xs.push_back(dyn.step(xs.back(), us[i], static_cast<int>(i)));
  return xs;
}

double ocp_cost(const OcpDynamics& dyn, const std::vector<VectorXd>& xs,
                const std::vector<VectorXd>& us, const std::vector<VectorXd>& x_ref,
                const std::vector<VectorXd>& u_ref, const OcpCost& cost) {
  const std::size_t N = us.size();
  double J = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const VectorXd ex = dyn.difference(xs[i], x_ref[i]);
    const VectorXd eu = us[i] - u_ref[i];
    J += ex.dot(cost.Q * ex) + eu.dot(cost.R * eu);
  }
  const VectorXd eN = dyn.difference(xs[N], x_ref[N]);
  return J + eN.dot(cost.P * eN);
}

namespace {

double box_violation(const OcpDynamics& dyn, const std::vector<VectorXd>& xs, const OcpBounds& b) {
  if (b.x_lo.size() == 0 && b.x_hi.size() == 0) return 0.0;
  double v = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const VectorXd c = dyn.box_coordinates(xs[i]);
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      if (b.x_lo.size() && std::isfinite(b.x_lo(j))) v += std::max(0.0, b.x_lo(j) - c(j));
      if (b.x_hi.size() && std::isfinite(b.x_hi(j))) v += std::max(0.0, c(j) - b.x_hi(j));
    }
  }
  return v;
}

VectorXd shifted(const VectorXd& bound, const VectorXd& by) {
  if (bound.size() == 0) return bound;
  return bound - by;
}

}  // namespace

OcpSolution solve_ocp(OcpDynamics& dyn, const VectorXd& x0, const std::vector<VectorXd>& x_ref,
                      const std::vector<VectorXd>& u_ref, const OcpCost& cost,
                      const OcpBounds& bounds, const SqpOptions& opts,
                      const std::vector<VectorXd>& u_init) {
  const int N = static_cast<int>(u_ref.size());
  const int nx = dyn.tangent_dim();
  const int nu = dyn.input_dim();
  if (N < 1) throw ConfigError("horizon must have at least one stage");
  if (static_cast<int>(x_ref.size()) != N + 1) throw ConfigError("state reference must have N + 1 entries");
  if (!u_init.empty() && static_cast<int>(u_init.size()) != N) throw ConfigError("warm start must have N inputs");

  auto clip = [&](VectorXd u) {
    if (bounds.u_lo.size()) u = u.cwiseMax(bounds.u_lo);
    if (bounds.u_hi.size()) u = u.cwiseMin(bounds.u_hi);
    return u;
  };
  std::vector<VectorXd> U = u_init.empty() ? u_ref : u_init;
  for (auto& u : U) u = clip(u);
  std::vector<VectorXd> X = rollout(dyn, x0, U);

  OcpSolution out;
  out.status = SolveStatus::kMaxIter;
  const double h = opts.fd_step;
  const MatrixXd R2 = 2.0 * cost.R;

  for (int it = 1; it <= opts.max_iters; ++it) {
    out.iterations = it;
    dyn.refresh(X);
    X = rollout(dyn, x0, U);

    LqProblem lq;
    lq.x0 = VectorXd::Zero(nx);
    lq.stages.resize(N);
    for (int i = 0; i <= N; ++i) {
      const VectorXd e = dyn.difference(X[i], x_ref[i]);
      MatrixXd Jx(nx, nx);
      for (int j = 0; j < nx; ++j) {
        const VectorXd d = VectorXd::Unit(nx, j) * h;
        Jx.col(j) = (dyn.difference(dyn.retract(X[i], d), x_ref[i]) -
                     dyn.difference(dyn.retract(X[i], -d), x_ref[i])) / (2.0 * h);
      }
      const MatrixXd& W = i == N ? cost.P : cost.Q;
      const MatrixXd JW = Jx.transpose() * W;
      if (i == N) {
        lq.Q_N = 2.0 * JW * Jx;
        lq.q_N = 2.0 * JW * e;
      } else {
        LqStage& st = lq.stages[i];
        st.Q = 2.0 * JW * Jx;
        st.q = 2.0 * JW * e;
        st.R = R2;
        st.r = R2 * (U[i] - u_ref[i]);
        st.c = VectorXd::Zero(nx);
        st.A.resize(nx, nx);
        st.B.resize(nx, nu);
        for (int j = 0; j < nx; ++j) {
          const VectorXd d = VectorXd::Unit(nx, j) * h;
          st.A.col(j) = (dyn.difference(dyn.step(dyn.retract(X[i], d), U[i], i), X[i + 1]) -
                         dyn.difference(dyn.step(dyn.retract(X[i], -d), U[i], i), X[i + 1])) / (2.0 * h);
        }
        for (int j = 0; j < nu; ++j) {
          const VectorXd d = VectorXd::Unit(nu, j) * h;
          st.B.col(j) = (dyn.difference(dyn.step(X[i], U[i] + d, i), X[i + 1]) -
                         dyn.difference(dyn.step(X[i], U[i] - d, i), X[i + 1])) / (2.0 * h);
        }
        st.u_lo = shifted(bounds.u_lo, U[i]);
        st.u_hi = shifted(bounds.u_hi, U[i]);
        if (i > 0) {
          const VectorXd bc = dyn.box_coordinates(X[i]);
          st.x_lo = shifted(bounds.x_lo, bc);
          st.x_hi = shifted(bounds.x_hi, bc);
        }
      }
    }
    const VectorXd bcN = dyn.box_coordinates(X[N]);
    auto set_terminal = [&](bool with_terminal_box) {
      VectorXd lo = bounds.x_lo.size() ? VectorXd(bounds.x_lo) : VectorXd::Constant(nx, -INFINITY);
      VectorXd hi = bounds.x_hi.size() ? VectorXd(bounds.x_hi) : VectorXd::Constant(nx, INFINITY);
      if (with_terminal_box && bounds.terminal_halfwidth.size()) {
        const VectorXd center = dyn.box_coordinates(x_ref[N]);
        lo = lo.cwiseMax(center - bounds.terminal_halfwidth);
        hi = hi.cwiseMin(center + bounds.terminal_halfwidth);
      }
      lq.xN_lo = lo - bcN;
      lq.xN_hi = hi - bcN;
    };
    set_terminal(!out.terminal_relaxed);
    LqSolution qp = solve_box_lq(lq, opts.qp);
    if (qp.infeasible && !out.terminal_relaxed && bounds.terminal_halfwidth.size()) {
      out.terminal_relaxed = true;
      set_terminal(false);
      qp = solve_box_lq(lq, opts.qp);
    }
    if (qp.infeasible) {
      out.status = SolveStatus::kInfeasible;
      break;
    }

    const double cost0 = ocp_cost(dyn, X, U, x_ref, u_ref, cost);
    const double viol0 = box_violation(dyn, X, bounds);
    double slope = 0.0;
    for (int i = 0; i < N; ++i) slope += lq.stages[i].r.dot(qp.u[i]);
    for (int i = 1; i < N; ++i) slope += lq.stages[i].q.dot(qp.x[i]);
    slope += lq.q_N.dot(qp.x[N]);
    const double merit0 = cost0 + opts.merit_penalty * viol0;
    const double decrease = std::min(slope - opts.merit_penalty * viol0, 0.0);

    double step_inf = 0.0;
    for (const auto& du : qp.u) step_inf = std::max(step_inf, du.cwiseAbs().maxCoeff());
    out.kkt_residual = step_inf;

    double alpha = 1.0;
    bool accepted = false;
    std::vector<VectorXd> U_try(N), X_try;
    for (int ls = 0; ls < 20; ++ls, alpha *= 0.5) {
      for (int i = 0; i < N; ++i) U_try[i] = clip(U[i] + alpha * qp.u[i]);
      X_try = rollout(dyn, x0, U_try);
      const double merit = ocp_cost(dyn, X_try, U_try, x_ref, u_ref, cost) +
                           opts.merit_penalty * box_violation(dyn, X_try, bounds);
      if (std::isfinite(merit) && merit <= merit0 + 1e-4 * alpha * decrease) {
        accepted = true;
        break;
      }
    }
    if (accepted) {
      U = std::move(U_try);
      X = std::move(X_try);
    }
    if (step_inf <= opts.tol || !accepted || alpha * step_inf <= opts.tol * 1e-3) {
      out.status = step_inf <= opts.tol ? SolveStatus::kOptimal : SolveStatus::kMaxIter;
      break;
    }
  }

  out.u_seq = U;
  out.x_seq = X;
  out.cost = ocp_cost(dyn, X, U, x_ref, u_ref, cost);
  return out;
}

}  // namespace npred
