#include <doctest.h>

#include <random>

#include "npred/ocp.hpp"

using namespace npred;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Dense condensed QP: U stacked, X = Sx x0 + Su U.
struct Condensed {
  MatrixXd H;
  VectorXd g;
};

Condensed condense(const LinearDynamics& dyn, const VectorXd& x0, const std::vector<VectorXd>& xr,
                   const std::vector<VectorXd>& ur, const OcpCost& c) {
  const int N = static_cast<int>(ur.size());
  const int nx = dyn.state_dim(), nu = dyn.input_dim();
  MatrixXd Su = MatrixXd::Zero(nx * (N + 1), nu * N);
  MatrixXd Sx(nx * (N + 1), nx);
  Sx.topRows(nx).setIdentity();
  for (int i = 0; i < N; ++i) {
    Sx.middleRows(nx * (i + 1), nx) = dyn.A() * Sx.middleRows(nx * i, nx);
    Su.middleRows(nx * (i + 1), nx) = dyn.A() * Su.middleRows(nx * i, nx);
    Su.block(nx * (i + 1), nu * i, nx, nu) = dyn.B();
  }
  MatrixXd Qb = MatrixXd::Zero(nx * (N + 1), nx * (N + 1));
  MatrixXd Rb = MatrixXd::Zero(nu * N, nu * N);
  VectorXd Xr(nx * (N + 1)), Ur(nu * N);
  for (int i = 0; i < N; ++i) {
    Qb.block(nx * i, nx * i, nx, nx) = c.Q;
    Rb.block(nu * i, nu * i, nu, nu) = c.R;
    Xr.segment(nx * i, nx) = xr[i];
    Ur.segment(nu * i, nu) = ur[i];
  }
  Qb.block(nx * N, nx * N, nx, nx) = c.P;
  Xr.segment(nx * N, nx) = xr[N];
  Condensed out;
  out.H = 2.0 * (Su.transpose() * Qb * Su + Rb);
  out.g = 2.0 * (Su.transpose() * Qb * (Sx * x0 - Xr) - Rb * Ur);
  return out;
}

OcpCost di_cost() {
  OcpCost c;
  c.Q = VectorXd::LinSpaced(6, 1.0, 6.0).asDiagonal();
  c.R = 0.3 * MatrixXd::Identity(3, 3);
  c.P = 5.0 * c.Q;
  return c;
}

}  // namespace

TEST_CASE("SQP on the double integrator matches the batch LQR solution") {
  const LinearDynamics dyn = double_integrator(0.02);
  const int N = 20;
  std::vector<VectorXd> xr(N + 1, VectorXd::Zero(6)), ur(N, VectorXd::Zero(3));
  for (int i = 0; i <= N; ++i) xr[i] << std::sin(0.1 * i), 0.2 * i, 1.0, 0.0, 0.5, -0.1;
  VectorXd x0(6);
  x0 << 0.3, -0.2, 0.5, 1.0, 0.0, -0.4;
  const OcpCost c = di_cost();
  LinearDynamics d = dyn;
  const OcpSolution sol = solve_ocp(d, x0, xr, ur, c, {}, {});
  const Condensed cq = condense(dyn, x0, xr, ur, c);
  const VectorXd U = cq.H.ldlt().solve(-cq.g);
  double worst = 0.0;
  for (int i = 0; i < N; ++i) worst = std::max(worst, (sol.u_seq[i] - U.segment(3 * i, 3)).cwiseAbs().maxCoeff());
  CHECK(worst <= 1e-6);
  CHECK(sol.status == SolveStatus::kOptimal);
  CHECK(sol.iterations <= 2);
}

TEST_CASE("box-constrained LQ agrees with projected gradient on the dense QP") {
  const LinearDynamics dyn = double_integrator(0.1, 1);
  const int N = 15;
  std::vector<VectorXd> xr(N + 1, VectorXd::Zero(2)), ur(N, VectorXd::Zero(1));
  for (int i = 0; i <= N; ++i) xr[i] << 2.0, 0.0;
  OcpCost c;
  c.Q = MatrixXd::Identity(2, 2);
  c.R = 0.01 * MatrixXd::Identity(1, 1);
  c.P = 10.0 * c.Q;
  OcpBounds b;
  b.u_lo = VectorXd::Constant(1, -1.0);
  b.u_hi = VectorXd::Constant(1, 1.0);
  LinearDynamics d = dyn;
  const OcpSolution sol = solve_ocp(d, VectorXd::Zero(2), xr, ur, c, b, {});
  REQUIRE(sol.status == SolveStatus::kOptimal);

  const Condensed cq = condense(dyn, VectorXd::Zero(2), xr, ur, c);
  VectorXd U = VectorXd::Zero(N);
  const double step = 1.0 / cq.H.eigenvalues().real().maxCoeff();
  for (int it = 0; it < 200000; ++it) U = (U - step * (cq.H * U + cq.g)).cwiseMax(-1.0).cwiseMin(1.0);
  int active = 0;
  for (int i = 0; i < N; ++i) {
    CHECK(std::abs(sol.u_seq[i](0) - U(i)) < 1e-6);
    active += std::abs(U(i)) > 1.0 - 1e-9;
  }
  CHECK(active > 0);
}

TEST_CASE("state boxes are respected and infeasible boxes are reported") {
  const LinearDynamics dyn = double_integrator(0.1, 1);
  const int N = 10;
  std::vector<VectorXd> xr(N + 1, VectorXd::Constant(2, 0.0)), ur(N, VectorXd::Zero(1));
  for (auto& x : xr) x << 3.0, 0.0;
  OcpCost c;
  c.Q = MatrixXd::Identity(2, 2);
  c.R = 0.01 * MatrixXd::Identity(1, 1);
  c.P = c.Q;
  OcpBounds b;
  b.x_lo = VectorXd::Constant(2, -INFINITY);
  b.x_hi = VectorXd::Constant(2, INFINITY);
  b.x_hi(1) = 0.5;  // speed limit
  LinearDynamics d = dyn;
  const OcpSolution sol = solve_ocp(d, VectorXd::Zero(2), xr, ur, c, b, {});
  CHECK(sol.status == SolveStatus::kOptimal);
  for (const auto& x : sol.x_seq) CHECK(x(1) <= 0.5 + 1e-6);

  b.u_lo = VectorXd::Constant(1, -0.1);
  b.u_hi = VectorXd::Constant(1, 0.1);
  b.x_lo(0) = 1.0;  // unreachable from the origin with this input box
  const OcpSolution bad = solve_ocp(d, VectorXd::Zero(2), xr, ur, c, b, {});
  CHECK(bad.status == SolveStatus::kInfeasible);
}

TEST_CASE("relaxing the terminal box once recovers feasibility") {
  const LinearDynamics dyn = double_integrator(0.1, 1);
  const int N = 5;
  std::vector<VectorXd> xr(N + 1, VectorXd::Zero(2)), ur(N, VectorXd::Zero(1));
  xr[N] << 5.0, 0.0;
  OcpCost c;
  c.Q = MatrixXd::Identity(2, 2);
  c.R = MatrixXd::Identity(1, 1);
  c.P = c.Q;
  OcpBounds b;
  b.u_lo = VectorXd::Constant(1, -1.0);
  b.u_hi = VectorXd::Constant(1, 1.0);
  b.terminal_halfwidth = VectorXd::Constant(2, 0.1);
  LinearDynamics d = dyn;
  const OcpSolution sol = solve_ocp(d, VectorXd::Zero(2), xr, ur, c, b, {});
  CHECK(sol.terminal_relaxed);
  CHECK(sol.status != SolveStatus::kInfeasible);
}
