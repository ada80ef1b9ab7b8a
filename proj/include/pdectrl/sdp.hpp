#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace pdectrl::sdp {

// Entry of a per-variable symmetric coefficient matrix, full storage (list
// both (r,c) and (c,r) for off-diagonal positions).
struct Entry {
  int row;
  int col;
  double val;
};

// Affine matrix constraint M(v) = F0 + sum_k v_k G_k  >=  margin * I.
// A positive objective_logdet_weight w adds -w * logdet(M(v) - margin I) to
// the objective (convex), sharing the barrier machinery.
struct PsdBlock {
  int size = 0;
  Eigen::MatrixXd F0;
  std::vector<std::vector<Entry>> coeff;  // indexed by variable
  double margin = 0.0;
  double objective_logdet_weight = 0.0;
};

// a' v <= b, kept strictly interior by the barrier.
struct LinearInequality {
  Eigen::VectorXd a;
  double b = 0.0;
};

// minimize 0.5 v'Qv + c'v subject to the blocks and inequalities.
struct Problem {
  int dim = 0;
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  std::vector<PsdBlock> blocks;
  std::vector<LinearInequality> linear;
};

struct Options {
  double gap_tol = 1e-9;
  double t0 = 1.0;
  double mu = 20.0;
  int max_newton = 400;
};

struct Result {
  bool ok = false;
  Eigen::VectorXd v;
  double objective = 0.0;
  std::vector<double> block_min_eig;  // smallest eigenvalue of each M(v)
  double min_linear_slack = 0.0;
  int newton_steps = 0;
  std::string message;
};

bool strictly_feasible(const Problem& prob, const Eigen::VectorXd& v, double slack_tol = 0.0);

// Primal barrier method with damped Newton steps. The caller must supply a
// strictly feasible start.
Result solve(const Problem& prob, const Eigen::VectorXd& v0, const Options& opts = {});

}  // namespace pdectrl::sdp
