#include "pdectrl/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace pdectrl::sdp {

namespace {

Eigen::MatrixXd assemble(const PsdBlock& blk, const Eigen::VectorXd& v) {
  Eigen::MatrixXd M = blk.F0;
  for (int k = 0; k < v.size(); ++k) {
    if (blk.coeff[static_cast<size_t>(k)].empty() || v(k) == 0.0) continue;
    for (const Entry& e : blk.coeff[static_cast<size_t>(k)]) M(e.row, e.col) += e.val * v(k);
  }
  return 0.5 * (M + M.transpose());
}

// Cholesky-based strict feasibility of M(v) - (margin + slack) I.
bool block_feasible(const PsdBlock& blk, const Eigen::VectorXd& v, double slack) {
  Eigen::MatrixXd M = assemble(blk, v);
  M.diagonal().array() -= blk.margin + slack;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  return llt.info() == Eigen::Success;
}

// -logdet(M(v) - margin I), +inf outside the cone.
double block_logdet_barrier(const PsdBlock& blk, const Eigen::VectorXd& v) {
  Eigen::MatrixXd M = assemble(blk, v);
  M.diagonal().array() -= blk.margin;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  double logdet = 0.0;
  for (int i = 0; i < blk.size; ++i) logdet += std::log(llt.matrixL()(i, i));
  return -2.0 * logdet;
}

}  // namespace

bool strictly_feasible(const Problem& prob, const Eigen::VectorXd& v, double slack_tol) {
  for (const auto& blk : prob.blocks)
    if (!block_feasible(blk, v, slack_tol)) return false;
  for (const auto& lin : prob.linear)
    if (lin.b - lin.a.dot(v) <= slack_tol) return false;
  return true;
}

Result solve(const Problem& prob, const Eigen::VectorXd& v0, const Options& opts) {
  Result res;
  res.v = v0;
  if (!strictly_feasible(prob, v0)) {
    res.message = "start point not strictly feasible";
    return res;
  }

  const int d = prob.dim;
  double barrier_count = static_cast<double>(prob.linear.size());
  for (const auto& blk : prob.blocks) barrier_count += blk.size;

  // Objective including the exact logdet terms.
  const auto objective_full = [&](const Eigen::VectorXd& v) {
    double f = 0.5 * v.dot(prob.Q * v) + prob.c.dot(v);
    for (const auto& blk : prob.blocks)
      if (blk.objective_logdet_weight > 0.0)
        f += blk.objective_logdet_weight * block_logdet_barrier(blk, v);
    return f;
  };

  // Merit for the centering step at parameter t: t * objective + barriers.
  const auto merit = [&](const Eigen::VectorXd& v, double t) {
    double psi = t * (0.5 * v.dot(prob.Q * v) + prob.c.dot(v));
    for (const auto& blk : prob.blocks) {
      const double coeff = 1.0 + t * blk.objective_logdet_weight;
      const double b = block_logdet_barrier(blk, v);
      if (std::isinf(b)) return b;
      psi += coeff * b;
    }
    for (const auto& lin : prob.linear) {
      const double slack = lin.b - lin.a.dot(v);
      if (slack <= 0.0) return std::numeric_limits<double>::infinity();
      psi -= std::log(slack);
    }
    return psi;
  };

  double t = opts.t0;
  Eigen::VectorXd v = v0;
  Eigen::VectorXd grad(d);
  Eigen::MatrixXd hess(d, d);

  while (true) {
    for (int inner = 0; inner < opts.max_newton; ++inner) {
      grad = t * (prob.Q * v + prob.c);
      hess = t * prob.Q;

      for (const auto& blk : prob.blocks) {
        const double coeff = 1.0 + t * blk.objective_logdet_weight;
        Eigen::MatrixXd M = assemble(blk, v);
        M.diagonal().array() -= blk.margin;
        const Eigen::MatrixXd X = M.llt().solve(Eigen::MatrixXd::Identity(blk.size, blk.size));
        // grad_k = -coeff tr(X G_k); hess_kl = coeff tr(X G_k X G_l), expanded
        // over the sparse coefficient entries.
        std::vector<int> active;
        for (int k = 0; k < d; ++k)
          if (!blk.coeff[static_cast<size_t>(k)].empty()) active.push_back(k);
        for (int k : active) {
          double g = 0.0;
          for (const Entry& e : blk.coeff[static_cast<size_t>(k)]) g += e.val * X(e.row, e.col);
          grad(k) -= coeff * g;
        }
        for (size_t ai = 0; ai < active.size(); ++ai) {
          const int k = active[ai];
          for (size_t aj = ai; aj < active.size(); ++aj) {
            const int l = active[aj];
            double hacc = 0.0;
            for (const Entry& ek : blk.coeff[static_cast<size_t>(k)])
              for (const Entry& el : blk.coeff[static_cast<size_t>(l)])
                hacc += ek.val * el.val * X(el.col, ek.row) * X(ek.col, el.row);
            hess(k, l) += coeff * hacc;
            if (l != k) hess(l, k) += coeff * hacc;
          }
        }
      }
      for (const auto& lin : prob.linear) {
        const double slack = lin.b - lin.a.dot(v);
        grad += lin.a / slack;
        hess += (lin.a * lin.a.transpose()) / (slack * slack);
      }

      Eigen::VectorXd step;
      double ridge = 0.0;
      for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd H = hess;
        if (ridge > 0.0) H.diagonal().array() += ridge;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        step = ldlt.solve(-grad);
        if (ldlt.info() == Eigen::Success && step.allFinite() && grad.dot(step) < 0.0) break;
        ridge = ridge == 0.0 ? 1e-10 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff()) : ridge * 100.0;
        step.setZero();
      }
      ++res.newton_steps;
      if (step.isZero()) break;

      const double decrement = -grad.dot(step);
      if (decrement * 0.5 < 1e-10 * std::max(1.0, std::abs(merit(v, t)) * 1e-8)) break;

      const double psi0 = merit(v, t);
      double s = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Eigen::VectorXd cand = v + s * step;
        if (strictly_feasible(prob, cand)) {
          const double psi = merit(cand, t);
          if (psi <= psi0 - 0.25 * s * decrement) {
            v = cand;
            moved = true;
            break;
          }
        }
        s *= 0.5;
      }
      if (!moved) break;
    }

    if (barrier_count / t <= opts.gap_tol * std::max(1.0, std::abs(objective_full(v)))) break;
    if (t > 1e16) break;
    t *= opts.mu;
  }

  res.ok = true;
  res.v = v;
  res.objective = objective_full(v);
  res.min_linear_slack = std::numeric_limits<double>::infinity();
  for (const auto& lin : prob.linear)
    res.min_linear_slack = std::min(res.min_linear_slack, lin.b - lin.a.dot(v));
  for (const auto& blk : prob.blocks) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(assemble(blk, v));
    res.block_min_eig.push_back(eig.eigenvalues().minCoeff());
  }
  return res;
}

}  // namespace pdectrl::sdp
