#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

#include "pdectrl/spectral.hpp"

namespace pdectrl::mpc {

// Exact zero-order-hold discretization of the diagonal truncated system.
struct DiscreteSystem {
  Eigen::VectorXd A;  // diagonal of A_d, exp(a_i dt)
  Eigen::VectorXd B;  // (exp(a_i dt) - 1) / a_i * beta_i
  double dt = 0.0;

  int dim() const { return static_cast<int>(A.size()); }
};

DiscreteSystem discretize(const spectral::TruncatedSystem& sys, double dt);

// Polytopic state set {Z : |S Z| <= s rowwise}.
struct StateBox {
  Eigen::MatrixXd S;
  Eigen::VectorXd s;

  bool contains(const Eigen::VectorXd& Z, double tol = 1e-9) const {
    return ((S * Z).cwiseAbs().array() <= s.array() + tol).all();
  }
};

StateBox axis_box(const Eigen::VectorXd& s);

// Terminal set {Z : Z' P Z <= c}; c = +inf disables the constraint.
struct TerminalSet {
  Eigen::MatrixXd P;
  double c = std::numeric_limits<double>::infinity();

  bool enabled() const { return std::isfinite(c); }
};

struct MpcConfig {
  int horizon = 10;    // M
  Eigen::MatrixXd Q;   // state weight, PSD
  double R = 1.0;      // control weight, > 0
  double u_max = std::numeric_limits<double>::infinity();
  StateBox box;
  TerminalSet terminal;

  int max_iters = 20000;
  double tol = 1e-8;
};

enum class SolveStatus { kOptimal, kInfeasible, kSolverFailure };

struct MpcSolution {
  SolveStatus status = SolveStatus::kSolverFailure;
  Eigen::VectorXd u;
  double objective = 0.0;
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool polished = false;
};

// Condensed QP over the input sequence, solved by ADMM splitting with box
// and terminal-ellipsoid projections; clean active sets are polished with an
// equality KKT solve.
MpcSolution solve_mpc(const Eigen::VectorXd& Z0, const MpcConfig& cfg,
                      const DiscreteSystem& sysd);

struct TerminalIngredients {
  Eigen::MatrixXd P;  // DARE solution
  Eigen::RowVectorXd K;  // u = -K Z
  double c_f = 0.0;   // largest admissible level of Z' P Z
};

// Riccati fixed point to 1e-10 plus bisection on the level set so that the
// LQR law respects the state box and input bound on the boundary.
TerminalIngredients terminal_ingredients(const MpcConfig& cfg, const DiscreteSystem& sysd);

struct Dataset {
  Eigen::MatrixXd Z;  // one row per stored sample
  Eigen::VectorXd u;  // first optimal move
  std::vector<int> grid;
  int feasible = 0;
  int infeasible = 0;
  int solver_failures = 0;

  int size() const { return static_cast<int>(u.size()); }
};

// Uniform grid over the axis-aligned state box; stores (Z0, u0) only when
// the MPC finds a feasible solution.
Dataset generate_dataset(const MpcConfig& cfg, const DiscreteSystem& sysd,
                         const std::vector<int>& grid);

}  // namespace pdectrl::mpc
