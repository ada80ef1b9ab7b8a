#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace pdectrl::config {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SpectralConfig {
  double q_c = 24.0;
  double delta = 5.0;
  int n0 = -1;  // -1 means mode_split(q_c, delta)
  int extra_stable_modes = 0;
  int N_tail = 200;
};

struct MpcSection {
  int horizon = 20;
  double dt = 0.01;
  double q_weight = 2.0;
  double r_weight = 1.0;
  int grid_points = 21;
  int timing_horizon = 50;
};

struct TrainSection {
  double eta1 = 1.0;
  double eta2 = 200.0;
  double rho = 1.0;
  double gamma = 1.0;
  double tau = 0.1;
  int epochs = 400;
  int pretrain_epochs = 500;
  int k_max = 60;
  double step_size = 1e-3;
  double pretrain_step = 1e-2;
  double tol_c = 1e-3;
  double tol_o = 1e-4;
  std::vector<int> hidden = {10, 10};
};

struct VerifySection {
  std::string spillover = "b_residual";  // or "beta_window"
  std::string decay_factor = "delta";    // or "two_delta"
  std::string coupling = "full";         // or "row"
  bool gamma_line_search = true;
};

struct SimSection {
  int N_sim = 20;
  double h = 1e-4;
  double T = 2.0;
  int roa_samples = 20;
  int field_points = 101;
};

struct ExperimentConfig {
  std::string scenario = "custom";
  std::uint64_t seed = 1;
  SpectralConfig spectral;
  Eigen::VectorXd box_s;
  double u_max = 20.0;
  MpcSection mpc;
  TrainSection train;
  VerifySection verify;
  SimSection sim;
};

// Strict parse: unknown keys anywhere are rejected.
ExperimentConfig parse_config(const json& j);

// n0 after resolving "auto" and extra stable modes; validates the box size.
int resolve_n0(const ExperimentConfig& cfg);

}  // namespace pdectrl::config
