#pragma once

#include <Eigen/Dense>

#include <vector>

namespace pdectrl::nn {

// Feedforward tanh controller u = W_out tanh(W_l ... tanh(W_1 Z)).
// Biases are kept in the type but held at zero so the origin is an
// equilibrium of the closed loop.
struct Policy {
  std::vector<Eigen::MatrixXd> W;  // hidden weights, W[i]: n_{i+1} x n_i
  std::vector<Eigen::VectorXd> b;  // hidden biases (zero by convention)
  Eigen::RowVectorXd W_out;        // 1 x n_l
  double b_out = 0.0;

  int input_dim() const { return W.empty() ? 0 : static_cast<int>(W.front().cols()); }
  int layer_count() const { return static_cast<int>(W.size()); }
  int n_phi() const {
    int total = 0;
    for (const auto& w : W) total += static_cast<int>(w.rows());
    return total;
  }
  std::vector<int> layer_sizes() const {
    std::vector<int> sizes;
    sizes.reserve(W.size());
    for (const auto& w : W) sizes.push_back(static_cast<int>(w.rows()));
    return sizes;
  }
};

Policy make_policy(int n0, const std::vector<int>& hidden, double fill = 0.0);

double forward(const Policy& policy, const Eigen::VectorXd& Z);

// Block-sparse map [u; nu] = N [Z; omega; 1] isolating the activations.
struct IsolatedPolicy {
  Eigen::RowVectorXd N_uz;  // 1 x n0 (structurally zero for this family)
  Eigen::RowVectorXd N_uw;  // 1 x n_phi, [0 ... 0 W_out]
  Eigen::MatrixXd N_vz;     // n_phi x n0, [W_1; 0; ...]
  Eigen::MatrixXd N_vw;     // n_phi x n_phi, strictly block lower triangular
  double N_ub = 0.0;
  Eigen::VectorXd N_vb;
  std::vector<int> layers;  // block sizes n_1..n_l
  int n0 = 0;

  int n_phi() const { return static_cast<int>(N_vz.rows()); }
};

IsolatedPolicy isolate(const Policy& policy);

// Evaluates through the isolated representation; must match forward exactly.
double isolated_forward(const IsolatedPolicy& iso, const Eigen::VectorXd& Z);

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  bool contains(const Eigen::VectorXd& Z) const {
    return (Z.array() >= lo.array() - 1e-12).all() &&
           (Z.array() <= hi.array() + 1e-12).all();
  }
};

struct Interval {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

// Pre-activation intervals from layerwise interval arithmetic over the box.
Interval propagate_bounds(const IsolatedPolicy& iso, const Box& box);

struct SectorBounds {
  Eigen::VectorXd nu_lo;
  Eigen::VectorXd nu_hi;
  Eigen::VectorXd m;  // lower slope
  Eigen::VectorXd r;  // upper slope
};

// Local tanh sector [m, r] on each pre-activation interval. g(v) = tanh(v)/v
// is even and decreasing in |v|, so the slope extremes sit at the endpoints
// (and at the origin when it is interior).
SectorBounds sector_bounds(const Eigen::VectorXd& nu_lo, const Eigen::VectorXd& nu_hi);

// Sector-normalized representation [u; nu] = Ntilde [Z; x], x = phitilde(nu),
// with phitilde in [-1, 1] on the interval.
struct TransformedPolicy {
  Eigen::RowVectorXd Nt_uz;
  Eigen::RowVectorXd Nt_ux;
  Eigen::MatrixXd Nt_vz;
  Eigen::MatrixXd Nt_vx;
  SectorBounds sector;
  Eigen::VectorXd alpha;  // (m + r) / 2
  Eigen::VectorXd beta;   // (r - m) / 2; zero marks a degenerate neuron
  std::vector<int> layers;
  int n0 = 0;

  int n_phi() const { return static_cast<int>(Nt_vz.rows()); }

  // Stacked (1 + n_phi) x (n0 + n_phi) matrix; this is F(N) in the
  // consistency constraint F(N) H = L.
  Eigen::MatrixXd stacked() const;
};

TransformedPolicy loop_transform(const IsolatedPolicy& iso, const SectorBounds& sector);

// Inverse of (I - C4) by the finite Neumann series; exact because C4 is
// strictly block lower triangular, hence nilpotent.
Eigen::MatrixXd neumann_inverse(const Eigen::MatrixXd& C4, const std::vector<int>& layers);

// Solves the block-triangular fixed point nu = Nt_vz Z + Nt_vx phitilde(nu)
// by forward substitution. Equals forward(policy, Z) up to roundoff.
double transformed_forward(const TransformedPolicy& tp, const Eigen::VectorXd& Z,
                           bool* outside_box = nullptr);

double normalized_activation(double nu, double alpha, double beta);

}  // namespace pdectrl::nn
