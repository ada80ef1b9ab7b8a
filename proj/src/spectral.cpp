#include "pdectrl/spectral.hpp"

#include <cmath>
#include <numbers>

namespace pdectrl::spectral {

namespace {

constexpr double kPi = std::numbers::pi;

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// 64-node Gauss-Legendre rule, nodes found by Newton iteration on P_64.
const QuadratureRule& gauss64() {
  static const QuadratureRule rule = [] {
    constexpr int n = 64;
    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        // Legendre recurrence for P_n(x) and P'_n(x).
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      double w = 2.0 / ((1.0 - x * x) * dp * dp);
      r.nodes[i] = -x;
      r.weights[i] = w;
      r.nodes[n - 1 - i] = x;
      r.weights[n - 1 - i] = w;
    }
    return r;
  }();
  return rule;
}

}  // namespace

Eigenpair eigenpair(int n) {
  if (n < 1) throw std::invalid_argument("mode index must be >= 1");
  const double mu = (n - 0.5) * kPi;
  return {mu * mu, mu};
}

double eigenfunction(int n, double x) {
  const auto [lambda, mu] = eigenpair(n);
  (void)lambda;
  return std::sqrt(2.0) * std::cos(mu * x);
}

double integrate(const ScalarMap& f, int panels) {
  if (panels < 1) throw std::invalid_argument("panel count must be >= 1");
  const auto& rule = gauss64();
  const double h = 1.0 / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    double acc = 0.0;
    for (size_t i = 0; i < rule.nodes.size(); ++i) {
      const double x = mid + 0.5 * h * rule.nodes[i];
      const double v = f(x);
      if (!std::isfinite(v)) throw std::runtime_error("non-finite integrand sample");
      acc += rule.weights[i] * v;
    }
    total += 0.5 * h * acc;
  }
  return total;
}

double project(const ScalarMap& f, int n) {
  const auto [lambda, mu] = eigenpair(n);
  (void)lambda;
  // One panel per half-period keeps the 64-node rule far beyond 1e-10.
  const int panels = std::max(1, static_cast<int>(std::ceil(mu / kPi)));
  return integrate([&](double x) { return f(x) * eigenfunction(n, x); }, panels);
}

LiftingCoefficients lifting_coefficients(int n, double q_c) {
  // b(x) = -x^2 satisfies b'(0) = 0 and b(1) = -1; a = -(p b')' - q_c b.
  const double a_n = project([q_c](double x) { return 2.0 + q_c * x * x; }, n);
  const double b_n = project([](double x) { return -x * x; }, n);
  const auto [lambda, mu] = eigenpair(n);
  (void)mu;
  const double beta = (-lambda + q_c) * b_n + a_n;
  return {a_n, b_n, beta};
}

int mode_split(double q_c, double delta) {
  if (delta <= 0.0) throw std::invalid_argument("delta must be positive");
  int n0 = 0;
  while (-eigenpair(n0 + 1).lambda + q_c >= -delta) ++n0;
  return n0;
}

SpectralModel build_model(double q_c, double delta, int n0, int N_tail) {
  SpectralModel model;
  model.q_c = q_c;
  model.delta = delta;
  model.n0 = n0;
  model.N_tail = N_tail;
  const int n_max = n0 + std::max(N_tail, 1);
  model.modes.reserve(static_cast<size_t>(n_max));
  for (int n = 1; n <= n_max; ++n) {
    const auto [lambda, mu] = eigenpair(n);
    const auto lift = lifting_coefficients(n, q_c);
    model.modes.push_back({n, mu, lambda, lift.a, lift.b, lift.beta});
  }
  return model;
}

TruncatedSystem build_truncated(const SpectralModel& model, int n0, double delta) {
  if (n0 < 0) throw std::invalid_argument("n0 must be >= 0");
  if (-eigenpair(n0 + 1).lambda + model.q_c >= -delta)
    throw std::runtime_error("invalid-truncation: -lambda_{n0+1} + q_c >= -delta");
  TruncatedSystem sys;
  sys.A = Eigen::MatrixXd::Zero(n0, n0);
  sys.B = Eigen::VectorXd::Zero(n0);
  sys.delta = delta;
  for (int i = 0; i < n0; ++i) {
    const Mode& m = model.mode(i + 1);
    sys.A(i, i) = -m.lambda + model.q_c;
    sys.B(i) = m.beta;
  }
  return sys;
}

TailEnergy tail_energy(const SpectralModel& model, int n0, int N_tail) {
  TailEnergy tail{0.0, 0.0, 0.0};
  for (int k = 1; k <= N_tail; ++k) {
    const int n = n0 + k;
    const double beta = n <= static_cast<int>(model.modes.size())
                            ? model.mode(n).beta
                            : lifting_coefficients(n, model.q_c).beta;
    tail.last_term = beta * beta;
    tail.partial_norm2 += tail.last_term;
  }
  if (tail.partial_norm2 > 0.0)
    tail.last_over_total = tail.last_term / tail.partial_norm2;
  return tail;
}

double lifting_residual_norm2(int n0) {
  // b_n = -sqrt(2) (-1)^{n+1} (1/mu - 2/mu^3) exactly. Sum a long window
  // term-by-term; the leftover 2/mu^2 tail is the trigamma asymptote.
  const int N = n0 + 20000;
  double total = 0.0;
  for (int n = N; n > n0; --n) {
    const double mu = (n - 0.5) * kPi;
    const double bn = std::sqrt(2.0) * (1.0 / mu - 2.0 / (mu * mu * mu));
    total += bn * bn;
  }
  const double z = N + 0.5;
  total += (2.0 / (kPi * kPi)) * (1.0 / z + 0.5 / (z * z) + 1.0 / (6.0 * z * z * z));
  return total;
}

}  // namespace pdectrl::spectral
