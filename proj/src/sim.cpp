#include "pdectrl/sim.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pdectrl::sim {

namespace {

struct ModeData {
  Eigen::VectorXd drift;  // -lambda_n + q_c
  Eigen::VectorXd beta;
  Eigen::VectorXd b;      // lifting projections, for field reconstruction
};

ModeData mode_data(const spectral::SpectralModel& model, int N_sim) {
  ModeData md;
  md.drift = Eigen::VectorXd::Zero(N_sim);
  md.beta = Eigen::VectorXd::Zero(N_sim);
  md.b = Eigen::VectorXd::Zero(N_sim);
  for (int n = 1; n <= N_sim; ++n) {
    if (n <= static_cast<int>(model.modes.size())) {
      const auto& m = model.mode(n);
      md.drift(n - 1) = -m.lambda + model.q_c;
      md.beta(n - 1) = m.beta;
      md.b(n - 1) = m.b;
    } else {
      const auto ep = spectral::eigenpair(n);
      const auto lift = spectral::lifting_coefficients(n, model.q_c);
      md.drift(n - 1) = -ep.lambda + model.q_c;
      md.beta(n - 1) = lift.beta;
      md.b(n - 1) = lift.b;
    }
  }
  return md;
}

}  // namespace

Controller policy_controller(const nn::Policy& policy) {
  return [&policy](const Eigen::VectorXd& Z) { return nn::forward(policy, Z); };
}

Trajectory simulate_closed_loop(const spectral::SpectralModel& model,
                                const Controller& controller, int n0,
                                const Eigen::VectorXd& Z0_full, double T, double h,
                                const Eigen::MatrixXd& P, double gamma) {
  const int N_sim = static_cast<int>(Z0_full.size());
  if (N_sim <= n0) throw std::invalid_argument("N_sim must exceed n0");
  if (h <= 0.0 || T <= 0.0) throw std::invalid_argument("T and h must be positive");

  const ModeData md = mode_data(model, N_sim);
  const auto rhs = [&](const Eigen::VectorXd& z) {
    const double u = controller(z.head(n0));
    return Eigen::VectorXd(md.drift.cwiseProduct(z) + md.beta * u);
  };

  Trajectory traj;
  traj.n0 = n0;
  const long n_steps = std::lround(T / h);
  traj.t.reserve(n_steps + 1);

  Eigen::VectorXd z = Z0_full;
  const auto record = [&](double t) {
    traj.t.push_back(t);
    traj.Z.push_back(z);
    traj.u.push_back(controller(z.head(n0)));
    traj.V1.push_back(P.size() > 0 ? z.head(n0).dot(P * z.head(n0)) : 0.0);
    traj.V2.push_back(gamma * z.tail(N_sim - n0).squaredNorm());
  };
  record(0.0);

  for (long k = 0; k < n_steps; ++k) {
    const Eigen::VectorXd k1 = rhs(z);
    const Eigen::VectorXd k2 = rhs(z + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(z + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(z + h * k3);
    z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!z.allFinite() || z.norm() > 1e6) {
      traj.diverged = true;
      break;
    }
    record((k + 1) * h);
  }
  return traj;
}

FieldSnapshot reconstruct_field(const spectral::SpectralModel& model, const Trajectory& traj,
                                size_t step, const std::vector<double>& x_grid) {
  if (step >= traj.steps()) throw std::out_of_range("step outside trajectory");
  const int N_sim = static_cast<int>(traj.Z[step].size());
  const ModeData md = mode_data(model, N_sim);

  FieldSnapshot snap;
  snap.t = traj.t[step];
  snap.x = x_grid;
  snap.z.resize(x_grid.size(), 0.0);
  const double u = traj.u[step];
  for (size_t i = 0; i < x_grid.size(); ++i) {
    const double x = x_grid[i];
    double w = 0.0;
    for (int n = 1; n <= N_sim; ++n)
      w += (traj.Z[step](n - 1) + md.b(n - 1) * u) * spectral::eigenfunction(n, x);
    snap.z[i] = w - (-x * x) * u;
  }
  return snap;
}

DecayMetrics decay_metrics(const Trajectory& traj, double delta) {
  if (traj.diverged) throw std::invalid_argument("trajectory diverged");
  DecayMetrics dm;
  dm.V0 = traj.V(0);
  if (dm.V0 <= 0.0) {
    dm.rate_defined = false;
    dm.satisfied = true;  // zero initial energy decays trivially
    return dm;
  }

  // Least-squares fit of log V(t) = log V0 - rate * t.
  double sum_t = 0.0, sum_t2 = 0.0, sum_v = 0.0, sum_tv = 0.0;
  long count = 0;
  for (size_t i = 0; i < traj.steps(); ++i) {
    const double v = traj.V(i);
    if (v <= 0.0) continue;
    const double lv = std::log(v);
    sum_t += traj.t[i];
    sum_t2 += traj.t[i] * traj.t[i];
    sum_v += lv;
    sum_tv += traj.t[i] * lv;
    ++count;
  }
  if (count >= 2) {
    const double denom = count * sum_t2 - sum_t * sum_t;
    dm.fitted_rate = denom == 0.0 ? 0.0 : -(count * sum_tv - sum_t * sum_v) / denom;
  }

  dm.satisfied = true;
  dm.worst_margin = std::numeric_limits<double>::infinity();
  const double rate = 2.0 * 0.9 * delta;
  for (size_t i = 0; i < traj.steps(); ++i) {
    const double bound = dm.V0 * std::exp(-rate * traj.t[i]);
    const double margin = bound - traj.V(i);
    dm.worst_margin = std::min(dm.worst_margin, margin);
    if (traj.V(i) > bound * (1.0 + 1e-9)) dm.satisfied = false;
  }
  return dm;
}

RoaValidation roa_validation(const Eigen::MatrixXd& P, const Controller& controller,
                             const spectral::SpectralModel& model, int n_samples, double T,
                             double h, int N_sim, double gamma, double delta) {
  const int n0 = static_cast<int>(P.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("invalid-certificate: P not positive definite");
  const Eigen::MatrixXd P_inv_sqrt = eig.eigenvectors() *
                                     eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                     eig.eigenvectors().transpose();

  std::vector<Eigen::VectorXd> dirs;
  if (n0 == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    if (n_samples > 1) dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
  } else if (n0 == 2) {
    for (int i = 0; i < n_samples; ++i) {
      const double th = 2.0 * std::numbers::pi * i / n_samples;
      Eigen::VectorXd v(2);
      v << std::cos(th), std::sin(th);
      dirs.push_back(v);
    }
  } else {
    // Fibonacci sphere points, deterministic.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n_samples; ++i) {
      const double y = 1.0 - 2.0 * (i + 0.5) / n_samples;
      const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
      const double th = golden * i;
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n0);
      v(0) = r * std::cos(th);
      v(1) = y;
      v(2) = r * std::sin(th);
      dirs.push_back(v);
    }
  }

  RoaValidation out;
  for (const auto& dir : dirs) {
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(N_sim);
    z0.head(n0) = P_inv_sqrt * dir;
    const Trajectory traj = simulate_closed_loop(model, controller, n0, z0, T, h, P, gamma);
    bool conv = false;
    bool decay_ok = false;
    if (!traj.diverged) {
      const double init = traj.Z.front().head(n0).norm();
      const double fin = traj.Z.back().head(n0).norm();
      conv = fin < 1e-3 * init;
      decay_ok = decay_metrics(traj, delta).satisfied;
    }
    out.converged.push_back(conv);
    out.decay_ok.push_back(decay_ok);
    if (conv) out.fraction_converged += 1.0;
  }
  if (!dirs.empty()) out.fraction_converged /= static_cast<double>(dirs.size());
  return out;
}

TimingResult timing_benchmark(const nn::Policy& policy, const mpc::MpcConfig& cfg,
                              const mpc::DiscreteSystem& sysd,
                              const std::vector<Eigen::VectorXd>& states, int nn_evals,
                              int mpc_solves) {
  if (states.empty()) throw std::invalid_argument("timing needs at least one state");
  using clock = std::chrono::steady_clock;

  TimingResult out;
  out.nn_evals = nn_evals;
  out.mpc_solves = mpc_solves;

  volatile double sink = 0.0;
  const auto t0 = clock::now();
  for (int i = 0; i < nn_evals; ++i)
    sink = sink + nn::forward(policy, states[i % states.size()]);
  const auto t1 = clock::now();
  out.nn_avg_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count() / nn_evals;

  const auto t2 = clock::now();
  for (int i = 0; i < mpc_solves; ++i)
    (void)mpc::solve_mpc(states[i % states.size()], cfg, sysd);
  const auto t3 = clock::now();
  out.mpc_avg_ms =
      std::chrono::duration<double, std::milli>(t3 - t2).count() / mpc_solves;

  out.speedup = out.nn_avg_ms > 0.0 ? out.mpc_avg_ms / out.nn_avg_ms : 0.0;
  return out;
}

}  // namespace pdectrl::sim
