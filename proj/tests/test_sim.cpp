#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pdectrl/sim.hpp"
#include "pdectrl/spectral.hpp"

using namespace pdectrl;

namespace {

const sim::Controller kOpenLoop = [](const Eigen::VectorXd&) { return 0.0; };

spectral::SpectralModel model24() { return spectral::build_model(24.0, 5.0, 2, 30); }

}  // namespace

TEST_CASE("open-loop stable mode follows the scalar exponential") {
  const auto model = model24();
  const int N_sim = 5;
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(N_sim);
  z0(2) = 0.8;  // mode 3 is stable at q_c = 24
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2, 2);
  const auto traj = sim::simulate_closed_loop(model, kOpenLoop, 2, z0, 0.1, 1e-4, P, 1.0);

  REQUIRE_FALSE(traj.diverged);
  const double a = -spectral::eigenpair(3).lambda + 24.0;
  const double exact = 0.8 * std::exp(a * 0.1);
  CHECK(std::abs(traj.Z.back()(2) - exact) < 1e-8);
  // Untouched modes remain identically zero.
  CHECK(traj.Z.back()(0) == 0.0);
  CHECK(traj.Z.back()(4) == 0.0);
}

TEST_CASE("zero initial state stays at the origin") {
  const auto model = model24();
  const auto traj = sim::simulate_closed_loop(model, kOpenLoop, 2,
                                              Eigen::VectorXd::Zero(6), 0.05, 1e-4,
                                              Eigen::MatrixXd::Identity(2, 2), 1.0);
  for (const auto& z : traj.Z) CHECK(z.norm() == 0.0);
}

TEST_CASE("unstable open loop trips the divergence guard") {
  const auto model = model24();
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(4);
  z0(0) = 1.0;  // mode 1 grows at rate 21.5
  const auto traj = sim::simulate_closed_loop(model, kOpenLoop, 2, z0, 5.0, 1e-3,
                                              Eigen::MatrixXd::Identity(2, 2), 1.0);
  CHECK(traj.diverged);
  CHECK(traj.t.back() < 5.0);
  for (const auto& z : traj.Z) CHECK(z.allFinite());
}

TEST_CASE("integration shows fourth-order convergence") {
  const auto model = model24();
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(3);
  z0(2) = 1.0;
  const double a = -spectral::eigenpair(3).lambda + 24.0;
  const double T = 0.1;
  const double exact = std::exp(a * T);

  const auto endpoint = [&](double h) {
    const auto traj = sim::simulate_closed_loop(model, kOpenLoop, 2, z0, T, h,
                                                Eigen::MatrixXd::Identity(2, 2), 1.0);
    return traj.Z.back()(2);
  };
  const double err1 = std::abs(endpoint(2e-3) - exact);
  const double err2 = std::abs(endpoint(1e-3) - exact);
  const double order = std::log2(err1 / err2);
  CHECK(order > 3.5);
  CHECK(order < 4.5);
}

TEST_CASE("field reconstruction matches the eigenbasis and the boundary") {
  const auto model = model24();

  // Single mode: z(0, 0) = sqrt(2).
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(4);
  z0(0) = 1.0;
  const auto traj = sim::simulate_closed_loop(model, kOpenLoop, 2, z0, 1e-3, 1e-3,
                                              Eigen::MatrixXd::Identity(2, 2), 1.0);
  const auto snap = sim::reconstruct_field(model, traj, 0, {0.0, 0.5, 1.0});
  CHECK(snap.z[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(snap.z[2] == doctest::Approx(0.0).epsilon(1e-12));  // Phi_n(1) = 0, u = 0

  // All-zero modes give the zero field.
  const auto zero_traj = sim::simulate_closed_loop(model, kOpenLoop, 2,
                                                   Eigen::VectorXd::Zero(4), 1e-3, 1e-3,
                                                   Eigen::MatrixXd::Identity(2, 2), 1.0);
  const auto zsnap = sim::reconstruct_field(model, zero_traj, 0, {0.0, 0.3, 1.0});
  for (double v : zsnap.z) CHECK(v == 0.0);
}

TEST_CASE("Parseval holds between field quadrature and coefficient energy") {
  const auto model = model24();
  Eigen::VectorXd z0(6);
  z0 << 0.7, -0.4, 0.25, -0.1, 0.05, 0.02;
  const auto traj = sim::simulate_closed_loop(model, kOpenLoop, 2, z0, 1e-3, 1e-3,
                                              Eigen::MatrixXd::Identity(2, 2), 1.0);
  // Quadrature of z(0, x)^2 against the coefficient sum.
  const auto field_sq = [&](double x) {
    double w = 0.0;
    for (int n = 1; n <= 6; ++n) w += z0(n - 1) * spectral::eigenfunction(n, x);
    return w * w;
  };
  const double integral = spectral::integrate(field_sq, 8);
  CHECK(std::abs(integral - z0.squaredNorm()) < 1e-8);
  (void)traj;
}

TEST_CASE("boundary trace equals the control through the lifted representation") {
  const auto model = model24();
  const sim::Controller steady = [](const Eigen::VectorXd& Z) { return 0.3 + 0.1 * Z(0); };
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(50);
  z0(0) = 0.5;
  z0(1) = -0.2;
  const auto traj = sim::simulate_closed_loop(model, steady, 2, z0, 0.01, 1e-3,
                                              Eigen::MatrixXd::Identity(2, 2), 1.0);
  for (size_t step : {size_t(0), traj.steps() / 2, traj.steps() - 1}) {
    const auto snap = sim::reconstruct_field(model, traj, step, {1.0});
    CHECK(std::abs(snap.z[0] - traj.u[step]) < 1e-6);
  }
}

TEST_CASE("decay metrics recover the analytic rate of a stable mode") {
  const auto model = model24();
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(4);
  z0(2) = 1.0;
  // V = V2 only (first two modes zero): rate 2(lambda_3 - q_c).
  const auto traj = sim::simulate_closed_loop(model, kOpenLoop, 2, z0, 0.05, 1e-4,
                                              Eigen::MatrixXd::Identity(2, 2), 1.0);
  const auto dm = sim::decay_metrics(traj, 1.0);
  const double expected_rate = 2.0 * (spectral::eigenpair(3).lambda - 24.0);
  CHECK(std::abs(dm.fitted_rate - expected_rate) / expected_rate < 0.01);
  CHECK(dm.rate_defined);
  // The analytic decay rate 75.4 beats 2 * 0.9 * delta for delta = 1.
  CHECK(dm.satisfied);

  // Zero initial energy: trivially satisfied, no rate.
  const auto zt = sim::simulate_closed_loop(model, kOpenLoop, 2, Eigen::VectorXd::Zero(4),
                                            0.01, 1e-4, Eigen::MatrixXd::Identity(2, 2), 1.0);
  const auto zdm = sim::decay_metrics(zt, 1.0);
  CHECK(zdm.satisfied);
  CHECK_FALSE(zdm.rate_defined);
}

TEST_CASE("roa validation accepts a stable plant and flags a broken policy") {
  // Stable plant: q_c = 0, all modes decay on their own.
  const auto stable_model = spectral::build_model(0.0, 1.0, 1, 20);
  const Eigen::MatrixXd P_tiny = 1e4 * Eigen::MatrixXd::Identity(1, 1);
  const auto ok = sim::roa_validation(P_tiny, kOpenLoop, stable_model, 8, 4.0, 1e-3, 10,
                                      1.0, 1.0);
  CHECK(ok.fraction_converged == 1.0);

  // Destabilizing policy on the unstable plant: u pushes mode 1 outward.
  const auto model = model24();
  const sim::Controller broken = [](const Eigen::VectorXd& Z) {
    return std::tanh(Z(0)) * 5.0;  // wrong sign feedback through beta_1 > 0
  };
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2, 2);
  const auto bad = sim::roa_validation(P, broken, model, 8, 1.0, 1e-3, 10, 1.0, 5.0);
  CHECK(bad.fraction_converged < 1.0);
}

TEST_CASE("timing benchmark reports a positive speedup") {
  const auto model = model24();
  const auto sys = spectral::build_truncated(model, 2, 5.0);
  const auto sysd = mpc::discretize(sys, 0.01);
  mpc::MpcConfig cfg;
  cfg.horizon = 10;
  cfg.Q = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  cfg.R = 1.0;
  cfg.u_max = 20.0;
  Eigen::VectorXd s(2);
  s << 2.0, 40.0;
  cfg.box = mpc::axis_box(s);

  std::mt19937_64 rng(97);
  const nn::Policy policy = oracles::random_policy(rng, 2, {10, 10}, 2.0);
  std::vector<Eigen::VectorXd> states;
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd Z(2);
    Z << 0.1 * i - 0.5, 1.0 * i - 5.0;
    states.push_back(Z);
  }
  const auto timing = sim::timing_benchmark(policy, cfg, sysd, states, 200, 5);
  CHECK(timing.nn_avg_ms > 0.0);
  CHECK(timing.mpc_avg_ms > timing.nn_avg_ms);
  CHECK(timing.speedup > 1.0);
}
