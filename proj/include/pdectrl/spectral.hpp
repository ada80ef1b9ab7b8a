#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <vector>

namespace pdectrl::spectral {

// Scalar map on [0, 1], e.g. a lifting function or an eigenfunction.
using ScalarMap = std::function<double(double)>;

struct Eigenpair {
  double lambda;  // mu^2
  double mu;      // (n - 1/2) * pi
};

// Analytic eigenpair of -d^2/dx^2 on {f'(0) = 0, f(1) = 0}.
// lambda_n = ((n - 1/2) pi)^2, Phi_n(x) = sqrt(2) cos(mu_n x).
Eigenpair eigenpair(int n);

double eigenfunction(int n, double x);

// Integral of f over [0, 1] by composite Gauss-Legendre with 64 nodes per
// panel. `panels` subdivides [0, 1] uniformly.
double integrate(const ScalarMap& f, int panels = 1);

// <f, Phi_n> with the panel count scaled to the mode's oscillation so the
// rule stays exact well below 1e-10 up to n ~ 50.
double project(const ScalarMap& f, int n);

struct LiftingCoefficients {
  double a;     // <a, Phi_n> with a(x) = 2 + q_c x^2
  double b;     // <b, Phi_n> with b(x) = -x^2
  double beta;  // (-lambda_n + q_c) b_n + a_n
};

LiftingCoefficients lifting_coefficients(int n, double q_c);

// Smallest n0 >= 0 with -lambda_{n0+1} + q_c < -delta.
int mode_split(double q_c, double delta);

struct Mode {
  int n;
  double mu;
  double lambda;
  double a;
  double b;
  double beta;
};

struct TailEnergy {
  double partial_norm2;    // sum_{n=n0+1}^{n0+N_tail} beta_n^2
  double last_term;        // beta_{n0+N_tail}^2
  double last_over_total;  // divergence diagnostic; stays > 0 for b = -x^2
};

struct SpectralModel {
  double q_c = 0.0;
  double delta = 0.0;
  int n0 = 0;
  int N_tail = 200;
  std::vector<Mode> modes;  // modes 1..n0+N_tail

  const Mode& mode(int n) const {
    if (n < 1 || n > static_cast<int>(modes.size()))
      throw std::out_of_range("mode index outside stored range");
    return modes[static_cast<size_t>(n - 1)];
  }
};

SpectralModel build_model(double q_c, double delta, int n0, int N_tail = 200);

struct TruncatedSystem {
  Eigen::MatrixXd A;  // diag(-lambda_n + q_c), n = 1..n0
  Eigen::VectorXd B;  // (beta_1, ..., beta_n0)
  double delta = 0.0;

  int dim() const { return static_cast<int>(B.size()); }
};

// Throws invalid-truncation when the split condition fails at (n0, delta).
TruncatedSystem build_truncated(const SpectralModel& model, int n0, double delta);

TailEnergy tail_energy(const SpectralModel& model, int n0, int N_tail);

// L2 energy of the lifting function's expansion beyond mode n0,
// sum_{n > n0} b_n^2. Converges (b_n ~ 1/mu_n); summed to machine accuracy.
double lifting_residual_norm2(int n0);

}  // namespace pdectrl::spectral
