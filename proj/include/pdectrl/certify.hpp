#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "pdectrl/mpc.hpp"
#include "pdectrl/nn_policy.hpp"
#include "pdectrl/spectral.hpp"

namespace pdectrl::certify {

// Blocks of the transformed controller map used by the matrix conditions.
struct NtildeBlocks {
  Eigen::RowVectorXd uz;  // 1 x n0
  Eigen::RowVectorXd ux;  // 1 x n_phi
  Eigen::MatrixXd vz;     // n_phi x n0
  Eigen::MatrixXd vx;     // n_phi x n_phi

  int n0() const { return static_cast<int>(uz.size()); }
  int n_phi() const { return static_cast<int>(ux.size()); }
  Eigen::MatrixXd stacked() const;
};

NtildeBlocks blocks_of(const nn::TransformedPolicy& tp);

// Certificate iterate in the convexified variables.
struct CertificateIterate {
  Eigen::MatrixXd H1;    // n0 x n0 symmetric PD
  Eigen::VectorXd H2;    // diagonal of H2, PD
  Eigen::RowVectorXd L1;
  Eigen::RowVectorXd L2;
  Eigen::MatrixXd L3;
  Eigen::MatrixXd L4;

  int n0() const { return static_cast<int>(H1.rows()); }
  int n_phi() const { return static_cast<int>(H2.size()); }
  Eigen::MatrixXd H() const;  // blkdiag(H1, diag(H2))
  Eigen::MatrixXd L() const;  // [[L1, L2], [L3, L4]]
  NtildeBlocks ntilde() const;    // L H^{-1}
  Eigen::MatrixXd P() const;      // H1^{-1}
  Eigen::VectorXd Lambda() const; // 1 / H2
};

// Theorem matrix Rv' Q1* Rv + Rphi' Q2 Rphi + Q3 with the 2*delta margin
// scaled by delta_factor (1 checks the residual form, 2 the theorem form).
Eigen::MatrixXd assemble_theorem_lhs(const spectral::TruncatedSystem& sys,
                                     const NtildeBlocks& nt, const Eigen::MatrixXd& P,
                                     const Eigen::VectorXd& Lambda, double delta,
                                     double tau, double delta_factor = 2.0);

// Schur-convexified LMI(H, L); feasibility means the returned matrix > 0.
Eigen::MatrixXd assemble_convex_lmi(const spectral::TruncatedSystem& sys,
                                    const CertificateIterate& it, double delta, double tau);

struct ContainmentRow {
  double lhs;  // S_i H1 S_i'
  double rhs;  // s_i^2
  bool satisfied;
};

// E(H1^{-1}) inside {|S_i Z| <= s_i} row by row: S_i H1 S_i' <= s_i^2.
std::vector<ContainmentRow> containment_constraints(const Eigen::MatrixXd& H1,
                                                    const Eigen::MatrixXd& S,
                                                    const Eigen::VectorXd& s);

struct CertificateStepOptions {
  double psd_margin = 1e-7;
  double h1_margin = 1e-8;
  double h2_cap = 1e8;
  double gap_tol = 1e-9;
};

struct CertificateStepResult {
  CertificateIterate iterate;
  double lmi_min_eig = 0.0;
  double h1_min_eig = 0.0;
  double logdet_H1 = 0.0;
  double objective = 0.0;
  int newton_steps = 0;
};

class CertificateInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Convex certificate update: minimize
//   -eta2 logdet(H1) + tr(Y'(F H - L)) + rho/2 ||F H - L||_F^2
// over LMI(H, L) >= eps I, H1 >= eps_H I and the containment rows. F is the
// transformed map of the frozen network. The logdet term is handled exactly
// by the conic engine rather than linearized; linearization drops the
// barrier at singular H1 and lets the alternation collapse the ellipsoid
// onto the floor eps_H I. Warm started when prior is given.
CertificateStepResult certificate_step(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Y,
                                       double rho, double eta2,
                                       const spectral::TruncatedSystem& sys,
                                       const mpc::StateBox& box, double delta, double tau,
                                       const CertificateIterate* warm = nullptr,
                                       const CertificateStepOptions& opts = {});

// Strictly feasible start built from pole placement and a Lyapunov solve,
// scaled to sit inside the containment rows.
CertificateIterate feasible_initializer(const spectral::TruncatedSystem& sys,
                                        const mpc::StateBox& box, double delta, double tau,
                                        int n_phi);

struct VerifyOptions {
  double delta_factor = 1.0;   // residual check uses -delta V1 literally
  bool coupling_row_only = false;  // tighter u-row variant of the tail term
  double alpha_cap = 1e12;
};

struct VerifyResult {
  bool feasible = false;
  double alpha_star = 0.0;
  bool alpha_unbounded = false;
  double gamma = 1.0;
  double condition_eig = 0.0;  // max eigenvalue of the residual matrix at alpha*
  double gamma_star_max_eig = 0.0;
};

// Maximizes alpha subject to the residual matrix condition and the 2x2
// spillover Schur block at mode n0+1; bisection with eigenvalue checks.
VerifyResult verify_residual(const spectral::TruncatedSystem& sys, const NtildeBlocks& nt,
                             const Eigen::MatrixXd& P, const Eigen::VectorXd& Lambda,
                             double delta, double gamma, double tail_norm2,
                             double lambda_next, double q_c,
                             const VerifyOptions& opts = {});

struct RoaEllipsoid {
  Eigen::MatrixXd P;
  double logdet_H1 = 0.0;  // log det P^{-1}, volume proxy
};

RoaEllipsoid roa(const Eigen::MatrixXd& P);

}  // namespace pdectrl::certify
