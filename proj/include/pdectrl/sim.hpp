#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "pdectrl/mpc.hpp"
#include "pdectrl/nn_policy.hpp"
#include "pdectrl/spectral.hpp"

namespace pdectrl::sim {

// Feedback law reading the first n0 modes.
using Controller = std::function<double(const Eigen::VectorXd&)>;

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> Z;  // N_sim modal coefficients per sample
  std::vector<double> u;
  std::vector<double> V1;  // Z_{n0}' P Z_{n0}
  std::vector<double> V2;  // gamma * sum_{n > n0} z_n^2
  bool diverged = false;
  int n0 = 0;

  size_t steps() const { return t.size(); }
  double V(size_t i) const { return V1[i] + V2[i]; }
};

// Classical fixed-step RK4 on the N_sim-mode closed loop; the controller is
// re-evaluated at every stage. Stops early with the diverged flag when the
// state norm passes 1e6.
Trajectory simulate_closed_loop(const spectral::SpectralModel& model,
                                const Controller& controller, int n0,
                                const Eigen::VectorXd& Z0_full, double T, double h,
                                const Eigen::MatrixXd& P, double gamma);

Controller policy_controller(const nn::Policy& policy);

struct FieldSnapshot {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> z;
};

// z(t, x) through the homogeneous-coordinate representation
// z = sum (z_n + b_n u) Phi_n(x) - b(x) u, which pins z(t, 1) = u(t).
FieldSnapshot reconstruct_field(const spectral::SpectralModel& model, const Trajectory& traj,
                                size_t step, const std::vector<double>& x_grid);

struct DecayMetrics {
  double V0 = 0.0;
  double fitted_rate = 0.0;  // V ~ V0 exp(-rate t)
  bool satisfied = false;    // V(t) <= V(0) exp(-2*0.9*delta*t) throughout
  double worst_margin = 0.0; // min over t of bound - V
  bool rate_defined = true;
};

DecayMetrics decay_metrics(const Trajectory& traj, double delta);

struct RoaValidation {
  double fraction_converged = 0.0;
  std::vector<bool> converged;
  std::vector<bool> decay_ok;
};

// Simulates from n_samples boundary points of E(P) (higher modes zero) and
// reports the fraction with terminal norm below 1e-3 of the initial norm.
RoaValidation roa_validation(const Eigen::MatrixXd& P, const Controller& controller,
                             const spectral::SpectralModel& model, int n_samples, double T,
                             double h, int N_sim, double gamma, double delta);

struct TimingResult {
  double nn_avg_ms = 0.0;
  double mpc_avg_ms = 0.0;
  double speedup = 0.0;
  int nn_evals = 0;
  int mpc_solves = 0;
};

TimingResult timing_benchmark(const nn::Policy& policy, const mpc::MpcConfig& cfg,
                              const mpc::DiscreteSystem& sysd,
                              const std::vector<Eigen::VectorXd>& states, int nn_evals = 1000,
                              int mpc_solves = 100);

}  // namespace pdectrl::sim
