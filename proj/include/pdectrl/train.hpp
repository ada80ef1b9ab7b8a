#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "pdectrl/certify.hpp"
#include "pdectrl/mpc.hpp"
#include "pdectrl/nn_policy.hpp"
#include "pdectrl/spectral.hpp"

namespace pdectrl::train {

double imitation_loss(const nn::Policy& policy, const mpc::Dataset& dataset);

// eta1 L(N) - eta2 logdet(H1) + tr(Y'(F(N)H - L)) + rho/2 ||F(N)H - L||_F^2,
// with F(N) evaluated at the frozen sector data.
double augmented_lagrangian(const nn::Policy& policy, const nn::SectorBounds& sector,
                            const mpc::Dataset& dataset,
                            const certify::CertificateIterate& cert, const Eigen::MatrixXd& Y,
                            double rho, double eta1, double eta2);

struct PolicyGrads {
  std::vector<Eigen::MatrixXd> W;
  Eigen::RowVectorXd W_out;
};

// Analytic gradient of the augmented Lagrangian in the network weights.
// The imitation part is plain backpropagation; the consistency part flows
// through the loop transform, whose resolvent is the finite Neumann series.
PolicyGrads aug_lagrangian_gradient(const nn::Policy& policy, const nn::SectorBounds& sector,
                                    const mpc::Dataset& dataset,
                                    const certify::CertificateIterate& cert,
                                    const Eigen::MatrixXd& Y, double rho, double eta1);

struct AdamState {
  std::vector<Eigen::MatrixXd> mW, vW;
  Eigen::RowVectorXd m_out, v_out;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(const nn::Policy& p, double lr_ = 1e-3);
  void apply(nn::Policy& p, const PolicyGrads& g);
};

// One inner phase of Algorithm 1: E epochs of Adam on the augmented
// Lagrangian with (H, L, Y) and the sector data frozen.
void nn_step(nn::Policy& policy, AdamState& adam, const nn::SectorBounds& sector,
             const mpc::Dataset& dataset, const certify::CertificateIterate& cert,
             const Eigen::MatrixXd& Y, double rho, double eta1, int epochs);

Eigen::MatrixXd multiplier_update(const Eigen::MatrixXd& Y, double rho,
                                  const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                                  const Eigen::MatrixXd& L);

struct TrainConfig {
  double eta1 = 1.0;
  double eta2 = 200.0;
  double rho = 1.0;
  double gamma = 1.0;
  double tau = 0.1;
  double delta = 5.0;
  int epochs = 400;
  int pretrain_epochs = 500;
  int k_max = 60;
  double step_size = 1e-3;
  double pretrain_step = 1e-2;
  double tol_c = 1e-3;
  double tol_o = 1e-4;
  std::vector<int> hidden = {10, 10};
  std::uint64_t seed = 1;
  certify::CertificateStepOptions cert_opts;
  certify::VerifyOptions verify_opts;
  bool gamma_line_search = true;
  std::string spillover = "b_residual";  // or "beta_window"
};

struct HistoryRow {
  int k = 0;
  double imitation = 0.0;
  double logdet_H1 = 0.0;
  double residual_fro = 0.0;
  double lmi_min_eig = 0.0;
  double aug_lagrangian = 0.0;
};

struct GammaEntry {
  double gamma = 0.0;
  bool feasible = false;
  double alpha = 0.0;
  bool unbounded = false;
};

struct VerificationReport {
  bool feasible = false;
  double alpha_star = 0.0;
  double gamma_star = 1.0;
  bool alpha_unbounded = false;
  double tail_norm2 = 0.0;
  std::string spillover_mode;
  std::vector<GammaEntry> gamma_table;
  std::string remedy;  // add_mode | increase_delta_margin | shrink_box | ""
  // Diagnostic at the windowed sum of beta_n^2, which diverges with the
  // window for this lifting function.
  double beta_window_tail = 0.0;
  bool beta_window_feasible = false;
  double beta_window_alpha = 0.0;
  double condition_eig = 0.0;
};

struct TrainResult {
  nn::Policy policy;
  nn::TransformedPolicy transformed;
  certify::CertificateIterate certificate;
  Eigen::MatrixXd Y;
  std::vector<HistoryRow> history;
  bool converged = false;
  int iterations = 0;
  VerificationReport verification;
};

// Verification used both by train() and by the standalone certify stage.
VerificationReport verify_pipeline(const spectral::SpectralModel& model,
                                   const spectral::TruncatedSystem& sys,
                                   const nn::TransformedPolicy& tp,
                                   const certify::CertificateIterate& cert,
                                   const TrainConfig& cfg);

TrainResult train(const spectral::SpectralModel& model, const spectral::TruncatedSystem& sys,
                  const mpc::Dataset& dataset, const mpc::StateBox& box,
                  const TrainConfig& cfg);

}  // namespace pdectrl::train
