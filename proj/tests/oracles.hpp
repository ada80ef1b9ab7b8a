// Test-only reference implementations, kept independent of the library paths
// they are used to check.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "pdectrl/mpc.hpp"
#include "pdectrl/nn_policy.hpp"

namespace oracles {

inline pdectrl::nn::Policy random_policy(std::mt19937_64& rng, int n0,
                                         const std::vector<int>& hidden,
                                         double out_scale = 1.0) {
  pdectrl::nn::Policy p = pdectrl::nn::make_policy(n0, hidden);
  for (auto& w : p.W) {
    const double a = std::sqrt(6.0 / (w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-a, a);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  }
  std::uniform_real_distribution<double> dist(-out_scale, out_scale);
  for (int j = 0; j < p.W_out.size(); ++j) p.W_out(j) = dist(rng);
  return p;
}

// Condensed quadratic data of the finite-horizon problem, derived afresh.
struct CondensedQp {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  double c0 = 0.0;
};

inline CondensedQp condense_reference(const Eigen::VectorXd& Z0,
                                      const pdectrl::mpc::MpcConfig& cfg,
                                      const pdectrl::mpc::DiscreteSystem& sysd) {
  const int n = sysd.dim();
  const int M = cfg.horizon;
  std::vector<Eigen::VectorXd> apow(M + 1, Eigen::VectorXd::Ones(n));
  for (int k = 1; k <= M; ++k) apow[k] = apow[k - 1].cwiseProduct(sysd.A);

  CondensedQp out;
  out.P = Eigen::MatrixXd::Zero(M, M);
  out.q = Eigen::VectorXd::Zero(M);
  out.c0 = Z0.dot(cfg.Q * Z0);
  for (int k = 1; k <= M; ++k) {
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(n, M);
    for (int j = 0; j < k; ++j) Phi.col(j) = apow[k - 1 - j].cwiseProduct(sysd.B);
    const Eigen::VectorXd d = apow[k].cwiseProduct(Z0);
    const Eigen::MatrixXd& Wk = k == M ? cfg.terminal.P : cfg.Q;
    if (k == M && cfg.terminal.P.size() == 0) continue;
    out.P += 2.0 * Phi.transpose() * Wk * Phi;
    out.q += 2.0 * Phi.transpose() * (Wk * d);
    out.c0 += d.dot(Wk * d);
  }
  out.P += 2.0 * cfg.R * Eigen::MatrixXd::Identity(M, M);
  return out;
}

// Brute-force KKT reference for the box-constrained condensed QP: enumerate
// the 3^M sign patterns of the input bounds and keep the best consistent one.
inline double active_set_reference(const Eigen::VectorXd& Z0,
                                   const pdectrl::mpc::MpcConfig& cfg,
                                   const pdectrl::mpc::DiscreteSystem& sysd,
                                   Eigen::VectorXd* u_opt = nullptr) {
  const CondensedQp qp = condense_reference(Z0, cfg, sysd);
  const int M = cfg.horizon;
  double best = std::numeric_limits<double>::infinity();

  std::vector<int> pattern(M, 0);
  long total = 1;
  for (int i = 0; i < M; ++i) total *= 3;
  for (long code = 0; code < total; ++code) {
    long rem = code;
    for (int i = 0; i < M; ++i) {
      pattern[i] = static_cast<int>(rem % 3) - 1;  // -1 lower, 0 free, +1 upper
      rem /= 3;
    }
    std::vector<int> free_idx;
    Eigen::VectorXd u(M);
    for (int i = 0; i < M; ++i) {
      if (pattern[i] == 0) free_idx.push_back(i);
      else u(i) = pattern[i] * cfg.u_max;
    }
    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      Eigen::MatrixXd Pff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs(a) = -qp.q(free_idx[a]);
        for (int i = 0; i < M; ++i)
          if (pattern[i] != 0) rhs(a) -= qp.P(free_idx[a], i) * u(i);
        for (int b = 0; b < nf; ++b) Pff(a, b) = qp.P(free_idx[a], free_idx[b]);
      }
      const Eigen::VectorXd uf = Pff.ldlt().solve(rhs);
      for (int a = 0; a < nf; ++a) u(free_idx[a]) = uf(a);
    }

    // Primal feasibility of free inputs and dual feasibility of the bounds.
    bool ok = true;
    const Eigen::VectorXd grad = qp.P * u + qp.q;
    for (int i = 0; i < M && ok; ++i) {
      if (pattern[i] == 0 && std::abs(u(i)) > cfg.u_max + 1e-9) ok = false;
      if (pattern[i] == 1 && -grad(i) < -1e-9) ok = false;
      if (pattern[i] == -1 && grad(i) < -1e-9) ok = false;
    }
    if (!ok) continue;
    const double val = 0.5 * u.dot(qp.P * u) + qp.q.dot(u) + qp.c0;
    if (val < best) {
      best = val;
      if (u_opt != nullptr) *u_opt = u;
    }
  }
  return best;
}

}  // namespace oracles
