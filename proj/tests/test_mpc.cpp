#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pdectrl/mpc.hpp"
#include "pdectrl/spectral.hpp"

using namespace pdectrl;

namespace {

spectral::TruncatedSystem scenario_a_system() {
  const auto model = spectral::build_model(24.0, 5.0, 2, 10);
  return spectral::build_truncated(model, 2, 5.0);
}

mpc::MpcConfig basic_config(int n0, int horizon, double u_max) {
  mpc::MpcConfig cfg;
  cfg.horizon = horizon;
  cfg.Q = 2.0 * Eigen::MatrixXd::Identity(n0, n0);
  cfg.R = 1.0;
  cfg.u_max = u_max;
  Eigen::VectorXd s(n0);
  for (int i = 0; i < n0; ++i) s(i) = i == 0 ? 2.0 : 40.0;
  cfg.box = mpc::axis_box(s);
  return cfg;
}

}  // namespace

TEST_CASE("discretization is the exact diagonal exponential") {
  const auto sys = scenario_a_system();
  const auto sysd = mpc::discretize(sys, 0.01);
  CHECK(sysd.A(0) == doctest::Approx(std::exp(sys.A(0, 0) * 0.01)).epsilon(1e-14));
  CHECK(sysd.A(0) == doctest::Approx(1.24026).epsilon(1e-4));
  CHECK_THROWS_AS(mpc::discretize(sys, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(mpc::discretize(sys, -1.0), std::invalid_argument);

  // a = 0 falls back to the dt * beta limit.
  spectral::TruncatedSystem zero;
  zero.A = Eigen::MatrixXd::Zero(1, 1);
  zero.B = Eigen::VectorXd::Constant(1, 3.0);
  const auto zd = mpc::discretize(zero, 0.01);
  CHECK(zd.A(0) == 1.0);
  CHECK(zd.B(0) == doctest::Approx(0.03).epsilon(1e-14));

  // dt -> 0 limit: A_d -> I, B_d -> 0.
  const auto tiny = mpc::discretize(sys, 1e-12);
  CHECK(tiny.A(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(tiny.B(0)) < 1e-9);
}

TEST_CASE("discretization matches high-accuracy integration of each mode") {
  const auto sys = scenario_a_system();
  const double dt = 0.01;
  const auto sysd = mpc::discretize(sys, dt);
  const double u = 0.7;
  for (int i = 0; i < sys.dim(); ++i) {
    const double a = sys.A(i, i), b = sys.B(i);
    double z = 1.3;
    const int steps = 2000;  // RK4 at dt/2000 is well below 1e-9 here
    const double h = dt / steps;
    for (int k = 0; k < steps; ++k) {
      const auto f = [&](double zz) { return a * zz + b * u; };
      const double k1 = f(z), k2 = f(z + 0.5 * h * k1), k3 = f(z + 0.5 * h * k2),
                   k4 = f(z + h * k3);
      z += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    CHECK(std::abs(z - (sysd.A(i) * 1.3 + sysd.B(i) * u)) < 1e-9);
  }
}

TEST_CASE("origin is a zero-cost fixed point of the constrained problem") {
  const auto sys = scenario_a_system();
  const auto sysd = mpc::discretize(sys, 0.01);
  mpc::MpcConfig cfg = basic_config(2, 10, 20.0);
  const auto term = mpc::terminal_ingredients(cfg, sysd);
  cfg.terminal.P = term.P;
  cfg.terminal.c = term.c_f;

  const auto sol = mpc::solve_mpc(Eigen::VectorXd::Zero(2), cfg, sysd);
  REQUIRE(sol.status == mpc::SolveStatus::kOptimal);
  CHECK(sol.u.cwiseAbs().maxCoeff() < 1e-7);
  CHECK(std::abs(sol.objective) < 1e-10);
  CHECK(sol.kkt_residual < 1e-6);
}

TEST_CASE("loose bounds recover the unconstrained batch solution") {
  const auto sys = scenario_a_system();
  const auto sysd = mpc::discretize(sys, 0.01);
  mpc::MpcConfig cfg = basic_config(2, 5, 1e6);
  cfg.box.s = Eigen::VectorXd::Constant(2, 1e9);  // effectively unconstrained states
  cfg.terminal.P = mpc::terminal_ingredients(basic_config(2, 5, 1e6), sysd).P;

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dz(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd Z0(2);
    Z0 << 2.0 * dz(rng), 40.0 * dz(rng);
    const auto sol = mpc::solve_mpc(Z0, cfg, sysd);
    REQUIRE(sol.status == mpc::SolveStatus::kOptimal);

    const auto qp = oracles::condense_reference(Z0, cfg, sysd);
    const Eigen::VectorXd u_free = qp.P.ldlt().solve(-qp.q);
    CHECK((sol.u - u_free).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(sol.kkt_residual < 1e-6);
  }
}

TEST_CASE("objective matches the dense active-set reference on feasible instances") {
  const auto sys = scenario_a_system();
  const auto sysd = mpc::discretize(sys, 0.01);
  mpc::MpcConfig cfg = basic_config(2, 5, 0.4);  // tight inputs force active bounds
  cfg.box.s = Eigen::VectorXd::Constant(2, 1e9);
  cfg.terminal.P = mpc::terminal_ingredients(basic_config(2, 5, 20.0), sysd).P;

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dz(-1.0, 1.0);
  int active_hits = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd Z0(2);
    Z0 << 0.15 * dz(rng), 3.0 * dz(rng);
    const auto sol = mpc::solve_mpc(Z0, cfg, sysd);
    REQUIRE(sol.status == mpc::SolveStatus::kOptimal);
    const double ref = oracles::active_set_reference(Z0, cfg, sysd);
    CHECK(std::abs(sol.objective - ref) < 1e-6 * std::max(1.0, std::abs(ref)));
    CHECK(sol.kkt_residual < 1e-6);
    if (sol.u.cwiseAbs().maxCoeff() > cfg.u_max - 1e-6) ++active_hits;
  }
  CHECK(active_hits > 5);  // the instance family genuinely exercises the bounds
}

TEST_CASE("unrecoverable state with tight input bound is infeasible") {
  const auto sys = scenario_a_system();
  const auto sysd = mpc::discretize(sys, 0.01);
  mpc::MpcConfig cfg = basic_config(2, 3, 1.0);
  cfg.terminal.P = Eigen::MatrixXd::Identity(2, 2);
  cfg.terminal.c = 1e12;  // terminal set effectively off; the state box binds

  Eigen::VectorXd Z0(2);
  Z0 << 2.0, 0.0;
  const auto sol = mpc::solve_mpc(Z0, cfg, sysd);
  CHECK(sol.status == mpc::SolveStatus::kInfeasible);

  // Brute-force grid over input sequences confirms emptiness at M = 3.
  bool any_feasible = false;
  const int g = 41;
  for (int i0 = 0; i0 < g && !any_feasible; ++i0)
    for (int i1 = 0; i1 < g && !any_feasible; ++i1)
      for (int i2 = 0; i2 < g && !any_feasible; ++i2) {
        const double us[3] = {-1.0 + 2.0 * i0 / (g - 1), -1.0 + 2.0 * i1 / (g - 1),
                              -1.0 + 2.0 * i2 / (g - 1)};
        Eigen::VectorXd z = Z0;
        bool ok = true;
        for (int k = 0; k < 3 && ok; ++k) {
          z = sysd.A.cwiseProduct(z) + sysd.B * us[k];
          if (k < 2 && !cfg.box.contains(z)) ok = false;
        }
        any_feasible = ok;
      }
  CHECK_FALSE(any_feasible);
}

TEST_CASE("terminal ingredients solve the Riccati equation and certify a level") {
  const auto sys = scenario_a_system();
  const auto sysd = mpc::discretize(sys, 0.01);
  const mpc::MpcConfig cfg = basic_config(2, 10, 20.0);
  const auto term = mpc::terminal_ingredients(cfg, sysd);

  // Fixed point of the DARE, checked directly.
  const Eigen::MatrixXd A = Eigen::MatrixXd(sysd.A.asDiagonal());
  const Eigen::VectorXd& B = sysd.B;
  const double denom = cfg.R + B.dot(term.P * B);
  const Eigen::RowVectorXd BtPA = B.transpose() * term.P * A;
  const Eigen::MatrixXd res =
      cfg.Q + A.transpose() * term.P * A - BtPA.transpose() * BtPA / denom - term.P;
  CHECK(res.cwiseAbs().maxCoeff() < 1e-8);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(term.P);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);

  // Closed loop is a strict contraction.
  const Eigen::MatrixXd Acl = A - B * term.K;
  CHECK(Acl.eigenvalues().cwiseAbs().maxCoeff() < 1.0);

  CHECK(term.c_f > 0.0);
  // Boundary points of the certified level respect both constraint sets.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> peig(term.P);
  const Eigen::MatrixXd pis = peig.operatorInverseSqrt();
  for (int i = 0; i < 64; ++i) {
    const double th = 2.0 * M_PI * i / 64.0;
    Eigen::VectorXd d(2);
    d << std::cos(th), std::sin(th);
    const Eigen::VectorXd Z = std::sqrt(term.c_f) * (pis * d);
    CHECK(cfg.box.contains(Z, 1e-6));
    CHECK(std::abs(term.K.dot(Z)) <= cfg.u_max * (1.0 + 1e-6));
  }

  // Unstabilizable pair: unstable drift with no input authority.
  spectral::TruncatedSystem dead;
  dead.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
  dead.B = Eigen::VectorXd::Zero(1);
  const auto deadd = mpc::discretize(dead, 0.01);
  mpc::MpcConfig bad = basic_config(1, 5, 1.0);
  bad.Q = Eigen::MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(mpc::terminal_ingredients(bad, deadd), std::runtime_error);
}

TEST_CASE("receding-horizon rollout stays inside the state box") {
  const auto sys = scenario_a_system();
  const auto sysd = mpc::discretize(sys, 0.01);
  mpc::MpcConfig cfg = basic_config(2, 20, 20.0);
  const auto term = mpc::terminal_ingredients(cfg, sysd);
  cfg.terminal.P = term.P;
  cfg.terminal.c = term.c_f;

  Eigen::VectorXd z(2);
  z << 1.0, 10.0;
  for (int step = 0; step < 100; ++step) {
    const auto sol = mpc::solve_mpc(z, cfg, sysd);
    REQUIRE(sol.status == mpc::SolveStatus::kOptimal);
    CHECK(sol.kkt_residual < 1e-6);
    z = sysd.A.cwiseProduct(z) + sysd.B * sol.u(0);
    CHECK(cfg.box.contains(z, 1e-7));
  }
  CHECK(z.norm() < 0.05);
}

TEST_CASE("dataset generation filters infeasible grid points") {
  const auto sys = scenario_a_system();
  const auto sysd = mpc::discretize(sys, 0.01);
  mpc::MpcConfig cfg = basic_config(2, 10, 20.0);
  const auto term = mpc::terminal_ingredients(cfg, sysd);
  cfg.terminal.P = term.P;
  cfg.terminal.c = term.c_f;

  const auto ds = mpc::generate_dataset(cfg, sysd, {5, 5});
  CHECK(ds.size() + ds.infeasible + ds.solver_failures == 25);
  CHECK(ds.size() <= 25);
  CHECK(ds.size() > 0);
  CHECK(ds.solver_failures == 0);

  // The origin grid point is stored with a zero action.
  bool found_origin = false;
  for (int i = 0; i < ds.size(); ++i) {
    if (ds.Z.row(i).norm() == 0.0) {
      found_origin = true;
      CHECK(std::abs(ds.u(i)) < 1e-7);
    }
    CHECK(cfg.box.contains(ds.Z.row(i).transpose()));
    CHECK(std::abs(ds.u(i)) <= cfg.u_max + 1e-9);
  }
  CHECK(found_origin);

  // Zero input authority on an unstable plant: nothing but the origin can
  // stay feasible.
  mpc::MpcConfig hopeless = cfg;
  hopeless.u_max = 1e-9;
  const auto empty = mpc::generate_dataset(hopeless, sysd, {3, 3});
  CHECK(empty.size() <= 1);
}

TEST_CASE("degenerate zero-mode problem solves trivially") {
  spectral::TruncatedSystem sys;
  sys.A = Eigen::MatrixXd::Zero(0, 0);
  sys.B = Eigen::VectorXd::Zero(0);
  const auto sysd = mpc::discretize(sys, 0.01);
  mpc::MpcConfig cfg;
  cfg.horizon = 4;
  cfg.Q = Eigen::MatrixXd::Zero(0, 0);
  cfg.box = mpc::axis_box(Eigen::VectorXd::Zero(0));
  const auto sol = mpc::solve_mpc(Eigen::VectorXd::Zero(0), cfg, sysd);
  CHECK(sol.status == mpc::SolveStatus::kOptimal);
  CHECK(sol.objective == 0.0);
}
