#include "pdectrl/certify.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

#include "pdectrl/sdp.hpp"

namespace pdectrl::certify {

namespace {

// Variable layout of the certificate subproblem:
// H1 upper triangle, H2 diagonal, L1, L2, L3 (row major), L4 (row major).
struct VarMap {
  int n0 = 0;
  int n_phi = 0;
  int h1_begin = 0, h2_begin = 0, l1_begin = 0, l2_begin = 0, l3_begin = 0, l4_begin = 0;
  int dim = 0;

  VarMap(int n0_, int n_phi_) : n0(n0_), n_phi(n_phi_) {
    h1_begin = 0;
    h2_begin = h1_begin + n0 * (n0 + 1) / 2;
    l1_begin = h2_begin + n_phi;
    l2_begin = l1_begin + n0;
    l3_begin = l2_begin + n_phi;
    l4_begin = l3_begin + n_phi * n0;
    dim = l4_begin + n_phi * n_phi;
  }

  int h1(int i, int j) const {  // i <= j
    int k = 0;
    for (int a = 0; a < i; ++a) k += n0 - a;
    return h1_begin + k + (j - i);
  }
  int h2(int j) const { return h2_begin + j; }
  int l1(int j) const { return l1_begin + j; }
  int l2(int j) const { return l2_begin + j; }
  int l3(int i, int j) const { return l3_begin + i * n0 + j; }
  int l4(int i, int j) const { return l4_begin + i * n_phi + j; }
};

Eigen::VectorXd pack(const VarMap& vm, const CertificateIterate& it) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(vm.dim);
  for (int i = 0; i < vm.n0; ++i)
    for (int j = i; j < vm.n0; ++j) v(vm.h1(i, j)) = it.H1(i, j);
  for (int j = 0; j < vm.n_phi; ++j) v(vm.h2(j)) = it.H2(j);
  for (int j = 0; j < vm.n0; ++j) v(vm.l1(j)) = it.L1(j);
  for (int j = 0; j < vm.n_phi; ++j) v(vm.l2(j)) = it.L2(j);
  for (int i = 0; i < vm.n_phi; ++i)
    for (int j = 0; j < vm.n0; ++j) v(vm.l3(i, j)) = it.L3(i, j);
  for (int i = 0; i < vm.n_phi; ++i)
    for (int j = 0; j < vm.n_phi; ++j) v(vm.l4(i, j)) = it.L4(i, j);
  return v;
}

CertificateIterate unpack(const VarMap& vm, const Eigen::VectorXd& v) {
  CertificateIterate it;
  it.H1 = Eigen::MatrixXd::Zero(vm.n0, vm.n0);
  it.H2 = Eigen::VectorXd::Zero(vm.n_phi);
  it.L1 = Eigen::RowVectorXd::Zero(vm.n0);
  it.L2 = Eigen::RowVectorXd::Zero(vm.n_phi);
  it.L3 = Eigen::MatrixXd::Zero(vm.n_phi, vm.n0);
  it.L4 = Eigen::MatrixXd::Zero(vm.n_phi, vm.n_phi);
  for (int i = 0; i < vm.n0; ++i)
    for (int j = i; j < vm.n0; ++j) it.H1(i, j) = it.H1(j, i) = v(vm.h1(i, j));
  for (int j = 0; j < vm.n_phi; ++j) it.H2(j) = v(vm.h2(j));
  for (int j = 0; j < vm.n0; ++j) it.L1(j) = v(vm.l1(j));
  for (int j = 0; j < vm.n_phi; ++j) it.L2(j) = v(vm.l2(j));
  for (int i = 0; i < vm.n_phi; ++i)
    for (int j = 0; j < vm.n0; ++j) it.L3(i, j) = v(vm.l3(i, j));
  for (int i = 0; i < vm.n_phi; ++i)
    for (int j = 0; j < vm.n_phi; ++j) it.L4(i, j) = v(vm.l4(i, j));
  return it;
}

// Gain placing the eigenvalues of A + B K at distinct negative poles.
Eigen::RowVectorXd place_poles(const Eigen::MatrixXd& A, const Eigen::VectorXd& B,
                               const Eigen::VectorXd& poles) {
  const int n = static_cast<int>(B.size());
  Eigen::MatrixXd ctrb(n, n);
  Eigen::VectorXd col = B;
  for (int k = 0; k < n; ++k) {
    ctrb.col(k) = col;
    col = A * col;
  }
  // q(A) for q(s) = prod (s - p_i)
  Eigen::MatrixXd qA = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) qA = qA * (A - poles(i) * Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd en = Eigen::VectorXd::Zero(n);
  en(n - 1) = 1.0;
  const Eigen::RowVectorXd k_std = en.transpose() * ctrb.partialPivLu().solve(qA);
  return -k_std;  // A + B K convention
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A) {
  // A X + X A' = -I via vectorization; A is tiny here.
  const int n = static_cast<int>(A.rows());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        K(i * n + j, k * n + j) += A(i, k);
        K(i * n + j, i * n + k) += A(j, k);
      }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n * n);
  for (int i = 0; i < n; ++i) rhs(i * n + i) = -1.0;
  const Eigen::VectorXd x = K.partialPivLu().solve(rhs);
  Eigen::MatrixXd X(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) X(i, j) = x(i * n + j);
  return 0.5 * (X + X.transpose());
}

}  // namespace

Eigen::MatrixXd NtildeBlocks::stacked() const {
  Eigen::MatrixXd N(1 + n_phi(), n0() + n_phi());
  N.block(0, 0, 1, n0()) = uz;
  N.block(0, n0(), 1, n_phi()) = ux;
  N.block(1, 0, n_phi(), n0()) = vz;
  N.block(1, n0(), n_phi(), n_phi()) = vx;
  return N;
}

NtildeBlocks blocks_of(const nn::TransformedPolicy& tp) {
  return {tp.Nt_uz, tp.Nt_ux, tp.Nt_vz, tp.Nt_vx};
}

Eigen::MatrixXd CertificateIterate::H() const {
  const int n = n0() + n_phi();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  out.topLeftCorner(n0(), n0()) = H1;
  out.bottomRightCorner(n_phi(), n_phi()) = H2.asDiagonal();
  return out;
}

Eigen::MatrixXd CertificateIterate::L() const {
  Eigen::MatrixXd out(1 + n_phi(), n0() + n_phi());
  out.block(0, 0, 1, n0()) = L1;
  out.block(0, n0(), 1, n_phi()) = L2;
  out.block(1, 0, n_phi(), n0()) = L3;
  out.block(1, n0(), n_phi(), n_phi()) = L4;
  return out;
}

NtildeBlocks CertificateIterate::ntilde() const {
  const Eigen::MatrixXd H1_inv = H1.inverse();
  NtildeBlocks nt;
  nt.uz = L1 * H1_inv;
  nt.ux = L2 * H2.cwiseInverse().asDiagonal();
  nt.vz = L3 * H1_inv;
  nt.vx = L4 * H2.cwiseInverse().asDiagonal();
  return nt;
}

Eigen::MatrixXd CertificateIterate::P() const { return H1.inverse(); }

Eigen::VectorXd CertificateIterate::Lambda() const { return H2.cwiseInverse(); }

Eigen::MatrixXd assemble_theorem_lhs(const spectral::TruncatedSystem& sys,
                                     const NtildeBlocks& nt, const Eigen::MatrixXd& P,
                                     const Eigen::VectorXd& Lambda, double delta,
                                     double tau, double delta_factor) {
  const int n0 = sys.dim();
  const int n_phi = nt.n_phi();
  if (nt.n0() != n0 || P.rows() != n0 || Lambda.size() != n_phi)
    throw std::invalid_argument("dimension mismatch in theorem assembly");

  Eigen::MatrixXd Rv(n0 + 1, n0 + n_phi);
  Rv.setZero();
  Rv.topLeftCorner(n0, n0).setIdentity();
  Rv.block(n0, 0, 1, n0) = nt.uz;
  Rv.block(n0, n0, 1, n_phi) = nt.ux;

  Eigen::MatrixXd Q1(n0 + 1, n0 + 1);
  Q1.setZero();
  Q1.topLeftCorner(n0, n0) =
      sys.A.transpose() * P + P * sys.A + delta_factor * delta * P;
  Q1.block(0, n0, n0, 1) = P * sys.B;
  Q1.block(n0, 0, 1, n0) = (P * sys.B).transpose();

  Eigen::MatrixXd Rphi(2 * n_phi, n0 + n_phi);
  Rphi.setZero();
  Rphi.block(0, 0, n_phi, n0) = nt.vz;
  Rphi.block(0, n0, n_phi, n_phi) = nt.vx;
  Rphi.block(n_phi, n0, n_phi, n_phi).setIdentity();

  Eigen::MatrixXd Q2 = Eigen::MatrixXd::Zero(2 * n_phi, 2 * n_phi);
  Q2.topLeftCorner(n_phi, n_phi) = Eigen::MatrixXd(Lambda.asDiagonal());
  Q2.bottomRightCorner(n_phi, n_phi) = -Eigen::MatrixXd(Lambda.asDiagonal());

  Eigen::MatrixXd Q3 = Eigen::MatrixXd::Zero(n0 + n_phi, n0 + n_phi);
  Q3.topLeftCorner(n0, n0) = tau * P;
  Q3.bottomRightCorner(n_phi, n_phi) = tau * Eigen::MatrixXd(Lambda.asDiagonal());

  Eigen::MatrixXd M = Rv.transpose() * Q1 * Rv + Rphi.transpose() * Q2 * Rphi + Q3;
  return 0.5 * (M + M.transpose());
}

Eigen::MatrixXd assemble_convex_lmi(const spectral::TruncatedSystem& sys,
                                    const CertificateIterate& it, double delta, double tau) {
  const int n0 = it.n0();
  const int n_phi = it.n_phi();
  if (sys.dim() != n0) throw std::invalid_argument("dimension mismatch in LMI assembly");

  const Eigen::MatrixXd theta = it.H1 * sys.A.transpose() + sys.A * it.H1 +
                                sys.B * it.L1 + it.L1.transpose() * sys.B.transpose() +
                                (2.0 * delta + tau) * it.H1;
  const int n = n0 + 2 * n_phi;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  M.topLeftCorner(n0, n0) = -theta;
  M.block(0, n0, n0, n_phi) = -sys.B * it.L2;
  M.block(n0, 0, n_phi, n0) = -(sys.B * it.L2).transpose();
  M.block(0, n0 + n_phi, n0, n_phi) = it.L3.transpose();
  M.block(n0 + n_phi, 0, n_phi, n0) = it.L3;
  M.block(n0, n0, n_phi, n_phi) = (1.0 - tau) * Eigen::MatrixXd(it.H2.asDiagonal());
  M.block(n0, n0 + n_phi, n_phi, n_phi) = it.L4.transpose();
  M.block(n0 + n_phi, n0, n_phi, n_phi) = it.L4;
  M.bottomRightCorner(n_phi, n_phi) = Eigen::MatrixXd(it.H2.asDiagonal());
  return 0.5 * (M + M.transpose());
}

std::vector<ContainmentRow> containment_constraints(const Eigen::MatrixXd& H1,
                                                    const Eigen::MatrixXd& S,
                                                    const Eigen::VectorXd& s) {
  std::vector<ContainmentRow> rows;
  for (int i = 0; i < S.rows(); ++i) {
    if (s(i) < 0.0) throw std::invalid_argument("invalid-config: s must be nonnegative");
    const double lhs = S.row(i) * H1 * S.row(i).transpose();
    const double rhs = s(i) * s(i);
    rows.push_back({lhs, rhs, lhs <= rhs});
  }
  return rows;
}

CertificateIterate feasible_initializer(const spectral::TruncatedSystem& sys,
                                        const mpc::StateBox& box, double delta, double tau,
                                        int n_phi) {
  const int n0 = sys.dim();
  Eigen::VectorXd poles(n0);
  for (int i = 0; i < n0; ++i) poles(i) = -(delta + tau + 1.0 + i);
  const Eigen::RowVectorXd K = place_poles(sys.A, sys.B, poles);
  const Eigen::MatrixXd A_shift = sys.A + sys.B * K +
                                  (delta + 0.5 * tau) * Eigen::MatrixXd::Identity(n0, n0);
  Eigen::MatrixXd X = solve_lyapunov(A_shift);

  double scale = 1.0;
  for (int i = 0; i < box.S.rows(); ++i) {
    const double q = box.S.row(i) * X * box.S.row(i).transpose();
    if (q > 0.0) scale = std::min(scale, 0.5 * box.s(i) * box.s(i) / q);
  }
  if (scale <= 0.0 || !X.allFinite())
    throw CertificateInfeasible("initialization-infeasible: no strictly feasible start");

  CertificateIterate it;
  it.H1 = scale * X;
  it.H2 = Eigen::VectorXd::Ones(n_phi);
  it.L1 = K * it.H1;
  it.L2 = Eigen::RowVectorXd::Zero(n_phi);
  it.L3 = Eigen::MatrixXd::Zero(n_phi, n0);
  it.L4 = Eigen::MatrixXd::Zero(n_phi, n_phi);
  return it;
}

CertificateStepResult certificate_step(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Y,
                                       double rho, double eta2,
                                       const spectral::TruncatedSystem& sys,
                                       const mpc::StateBox& box, double delta, double tau,
                                       const CertificateIterate* warm,
                                       const CertificateStepOptions& opts) {
  const int n0 = sys.dim();
  const int n_phi = static_cast<int>(F.rows()) - 1;
  const VarMap vm(n0, n_phi);
  if (F.cols() != n0 + n_phi || Y.rows() != F.rows() || Y.cols() != F.cols())
    throw std::invalid_argument("dimension mismatch in certificate step");

  // Linear map v -> vec(F H(v) - L(v)), row-major vec of size (1+n_phi)(n0+n_phi).
  const int e_rows = (1 + n_phi) * (n0 + n_phi);
  const int cols = n0 + n_phi;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(e_rows, vm.dim);
  const auto evec = [cols](int r, int c) { return r * cols + c; };
  for (int i = 0; i < n0; ++i)
    for (int j = i; j < n0; ++j)
      for (int r = 0; r < 1 + n_phi; ++r) {
        J(evec(r, i), vm.h1(i, j)) += F(r, j);
        if (i != j) J(evec(r, j), vm.h1(i, j)) += F(r, i);
      }
  for (int j = 0; j < n_phi; ++j)
    for (int r = 0; r < 1 + n_phi; ++r) J(evec(r, n0 + j), vm.h2(j)) += F(r, n0 + j);
  for (int j = 0; j < n0; ++j) J(evec(0, j), vm.l1(j)) -= 1.0;
  for (int j = 0; j < n_phi; ++j) J(evec(0, n0 + j), vm.l2(j)) -= 1.0;
  for (int i = 0; i < n_phi; ++i) {
    for (int j = 0; j < n0; ++j) J(evec(1 + i, j), vm.l3(i, j)) -= 1.0;
    for (int j = 0; j < n_phi; ++j) J(evec(1 + i, n0 + j), vm.l4(i, j)) -= 1.0;
  }

  Eigen::VectorXd y_vec(e_rows);
  for (int r = 0; r < 1 + n_phi; ++r)
    for (int c = 0; c < cols; ++c) y_vec(evec(r, c)) = Y(r, c);

  sdp::Problem prob;
  prob.dim = vm.dim;
  prob.Q = rho * (J.transpose() * J);
  prob.c = J.transpose() * y_vec;

  // Big LMI block.
  sdp::PsdBlock lmi;
  lmi.size = n0 + 2 * n_phi;
  lmi.F0 = Eigen::MatrixXd::Zero(lmi.size, lmi.size);
  lmi.margin = opts.psd_margin;
  lmi.coeff.assign(static_cast<size_t>(vm.dim), {});
  for (int i = 0; i < n0; ++i)
    for (int j = i; j < n0; ++j) {
      const double v = -(sys.A(i, i) + sys.A(j, j) + 2.0 * delta + tau);
      if (i == j) {
        lmi.coeff[vm.h1(i, i)].push_back({i, i, v});
      } else {
        lmi.coeff[vm.h1(i, j)].push_back({i, j, v});
        lmi.coeff[vm.h1(i, j)].push_back({j, i, v});
      }
    }
  for (int j = 0; j < n0; ++j)
    for (int r = 0; r < n0; ++r) {
      if (r == j) {
        lmi.coeff[vm.l1(j)].push_back({j, j, -2.0 * sys.B(j)});
      } else {
        lmi.coeff[vm.l1(j)].push_back({r, j, -sys.B(r)});
        lmi.coeff[vm.l1(j)].push_back({j, r, -sys.B(r)});
      }
    }
  for (int j = 0; j < n_phi; ++j)
    for (int r = 0; r < n0; ++r) {
      lmi.coeff[vm.l2(j)].push_back({r, n0 + j, -sys.B(r)});
      lmi.coeff[vm.l2(j)].push_back({n0 + j, r, -sys.B(r)});
    }
  for (int j = 0; j < n_phi; ++j) {
    lmi.coeff[vm.h2(j)].push_back({n0 + j, n0 + j, 1.0 - tau});
    lmi.coeff[vm.h2(j)].push_back({n0 + n_phi + j, n0 + n_phi + j, 1.0});
  }
  for (int i = 0; i < n_phi; ++i)
    for (int j = 0; j < n0; ++j) {
      lmi.coeff[vm.l3(i, j)].push_back({n0 + n_phi + i, j, 1.0});
      lmi.coeff[vm.l3(i, j)].push_back({j, n0 + n_phi + i, 1.0});
    }
  for (int i = 0; i < n_phi; ++i)
    for (int j = 0; j < n_phi; ++j) {
      lmi.coeff[vm.l4(i, j)].push_back({n0 + n_phi + i, n0 + j, 1.0});
      lmi.coeff[vm.l4(i, j)].push_back({n0 + j, n0 + n_phi + i, 1.0});
    }
  prob.blocks.push_back(std::move(lmi));

  // H1 > 0 block.
  sdp::PsdBlock h1blk;
  h1blk.size = n0;
  h1blk.F0 = Eigen::MatrixXd::Zero(n0, n0);
  h1blk.margin = opts.h1_margin;
  h1blk.objective_logdet_weight = eta2;
  h1blk.coeff.assign(static_cast<size_t>(vm.dim), {});
  for (int i = 0; i < n0; ++i)
    for (int j = i; j < n0; ++j) {
      if (i == j) {
        h1blk.coeff[vm.h1(i, i)].push_back({i, i, 1.0});
      } else {
        h1blk.coeff[vm.h1(i, j)].push_back({i, j, 1.0});
        h1blk.coeff[vm.h1(i, j)].push_back({j, i, 1.0});
      }
    }
  prob.blocks.push_back(std::move(h1blk));

  // Containment rows and H2 caps.
  for (int i = 0; i < box.S.rows(); ++i) {
    sdp::LinearInequality lin;
    lin.a = Eigen::VectorXd::Zero(vm.dim);
    for (int a = 0; a < n0; ++a)
      for (int b = a; b < n0; ++b)
        lin.a(vm.h1(a, b)) = (a == b ? 1.0 : 2.0) * box.S(i, a) * box.S(i, b);
    lin.b = box.s(i) * box.s(i);
    prob.linear.push_back(std::move(lin));
  }
  for (int j = 0; j < n_phi; ++j) {
    sdp::LinearInequality lin;
    lin.a = Eigen::VectorXd::Zero(vm.dim);
    lin.a(vm.h2(j)) = 1.0;
    lin.b = opts.h2_cap;
    prob.linear.push_back(std::move(lin));
  }

  Eigen::VectorXd v0;
  if (warm != nullptr && sdp::strictly_feasible(prob, pack(vm, *warm), 1e-12)) {
    v0 = pack(vm, *warm);
  } else {
    const CertificateIterate init = feasible_initializer(sys, box, delta, tau, n_phi);
    v0 = pack(vm, init);
    if (!sdp::strictly_feasible(prob, v0))
      throw CertificateInfeasible("certificate-infeasible: no strictly feasible start");
  }

  sdp::Options sopts;
  sopts.gap_tol = opts.gap_tol;
  const sdp::Result res = sdp::solve(prob, v0, sopts);
  if (!res.ok) throw std::runtime_error("solver-failure: " + res.message);

  CertificateStepResult out;
  out.iterate = unpack(vm, res.v);
  out.lmi_min_eig = res.block_min_eig.at(0);
  out.h1_min_eig = res.block_min_eig.at(1);
  out.logdet_H1 = std::log(out.iterate.H1.determinant());
  out.objective = res.objective;
  out.newton_steps = res.newton_steps;
  return out;
}

VerifyResult verify_residual(const spectral::TruncatedSystem& sys, const NtildeBlocks& nt,
                             const Eigen::MatrixXd& P, const Eigen::VectorXd& Lambda,
                             double delta, double gamma, double tail_norm2,
                             double lambda_next, double q_c, const VerifyOptions& opts) {
  if (gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
  const int n0 = sys.dim();
  const int n_phi = nt.n_phi();

  VerifyResult out;
  out.gamma = gamma;

  // Gamma*_{n0+1} <= 0: the (1,1) entry must be negative, then alpha is
  // bounded below by the Schur determinant.
  const double g11 = 2.0 * gamma * (-lambda_next + q_c + delta);
  if (g11 >= 0.0) return out;
  const double alpha_min = 1.0 / (2.0 * gamma * (lambda_next - q_c - delta));

  // Residual matrix at a given alpha.
  const Eigen::MatrixXd base =
      assemble_theorem_lhs(sys, nt, P, Lambda, delta, /*tau=*/0.0, opts.delta_factor);
  Eigen::MatrixXd W;
  if (opts.coupling_row_only) {
    Eigen::MatrixXd row(1, n0 + n_phi);
    row.block(0, 0, 1, n0) = nt.uz;
    row.block(0, n0, 1, n_phi) = nt.ux;
    W = row.transpose() * row;
  } else {
    Eigen::MatrixXd Rv(n0 + 1, n0 + n_phi);
    Rv.setZero();
    Rv.topLeftCorner(n0, n0).setIdentity();
    Rv.block(n0, 0, 1, n0) = nt.uz;
    Rv.block(n0, n0, 1, n_phi) = nt.ux;
    W = Rv.transpose() * Rv;
  }
  W = 0.5 * (W + W.transpose());

  const auto max_eig = [&](double alpha) {
    const Eigen::MatrixXd M = base + alpha * gamma * tail_norm2 * W;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()));
    return eig.eigenvalues().maxCoeff();
  };
  const double scale = std::max(1.0, base.cwiseAbs().maxCoeff());
  const auto feasible = [&](double alpha) { return max_eig(alpha) <= 1e-12 * scale; };

  if (!feasible(alpha_min)) return out;  // Infeasible; remedy handled by caller

  out.feasible = true;
  if (tail_norm2 <= 0.0) {
    out.alpha_star = opts.alpha_cap;
    out.alpha_unbounded = true;
  } else {
    double lo = alpha_min, hi = alpha_min;
    while (feasible(hi) && hi < opts.alpha_cap) {
      lo = hi;
      hi *= 2.0;
    }
    if (hi >= opts.alpha_cap) {
      out.alpha_star = opts.alpha_cap;
      out.alpha_unbounded = true;
    } else {
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
        if (hi - lo <= 1e-12 * hi) break;
      }
      out.alpha_star = lo;
    }
  }
  out.condition_eig = max_eig(out.alpha_star);
  const Eigen::Matrix2d gs = (Eigen::Matrix2d() << g11, 1.0, 1.0, -out.alpha_star).finished();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(gs);
  out.gamma_star_max_eig = eig.eigenvalues().maxCoeff();  // feasible when <= 0
  return out;
}

RoaEllipsoid roa(const Eigen::MatrixXd& P) {
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("invalid-certificate: P is not positive definite");
  RoaEllipsoid e;
  e.P = P;
  e.logdet_H1 = -std::log(P.determinant());
  return e;
}

}  // namespace pdectrl::certify
