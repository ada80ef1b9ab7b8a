#include "pdectrl/mpc.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <stdexcept>

namespace pdectrl::mpc {

namespace {

// Condensed prediction data: Z_k = d_k + Phi_k u.
struct Condensed {
  std::vector<Eigen::MatrixXd> Phi;  // Phi[k], k = 0..M
  std::vector<Eigen::VectorXd> d;    // d[k] = A^k Z0
  Eigen::MatrixXd P;                 // quadratic term
  Eigen::VectorXd q;                 // linear term
  double c0 = 0.0;                   // constant term
};

Condensed condense(const Eigen::VectorXd& Z0, const MpcConfig& cfg,
                   const DiscreteSystem& sysd) {
  const int n = sysd.dim();
  const int M = cfg.horizon;

  std::vector<Eigen::VectorXd> apow(M + 1);
  apow[0] = Eigen::VectorXd::Ones(n);
  for (int k = 1; k <= M; ++k) apow[k] = apow[k - 1].cwiseProduct(sysd.A);

  Condensed c;
  c.Phi.resize(M + 1, Eigen::MatrixXd::Zero(n, M));
  c.d.resize(M + 1);
  for (int k = 0; k <= M; ++k) {
    c.d[k] = apow[k].cwiseProduct(Z0);
    for (int j = 0; j < k; ++j)
      c.Phi[k].col(j) = apow[k - 1 - j].cwiseProduct(sysd.B);
  }

  const Eigen::MatrixXd& Pt = cfg.terminal.P;
  c.P = Eigen::MatrixXd::Zero(M, M);
  c.q = Eigen::VectorXd::Zero(M);
  c.c0 = n > 0 ? Z0.dot(cfg.Q * Z0) : 0.0;
  for (int k = 1; k < M; ++k) {
    c.P += 2.0 * c.Phi[k].transpose() * cfg.Q * c.Phi[k];
    c.q += 2.0 * c.Phi[k].transpose() * (cfg.Q * c.d[k]);
    c.c0 += c.d[k].dot(cfg.Q * c.d[k]);
  }
  if (Pt.size() > 0) {
    c.P += 2.0 * c.Phi[M].transpose() * Pt * c.Phi[M];
    c.q += 2.0 * c.Phi[M].transpose() * (Pt * c.d[M]);
    c.c0 += c.d[M].dot(Pt * c.d[M]);
  }
  c.P += 2.0 * cfg.R * Eigen::MatrixXd::Identity(M, M);
  return c;
}

double objective_of(const Condensed& c, const Eigen::VectorXd& u) {
  return 0.5 * u.dot(c.P * u) + c.q.dot(u) + c.c0;
}

// Projection onto {y : y' P y <= level} via the secular equation in the
// eigenbasis of P.
Eigen::VectorXd project_ellipsoid(const Eigen::VectorXd& v,
                                  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& eig,
                                  double level) {
  const Eigen::VectorXd d = eig.eigenvalues();
  const Eigen::VectorXd t = eig.eigenvectors().transpose() * v;
  const auto quad = [&](double lam) {
    double acc = 0.0;
    for (int i = 0; i < d.size(); ++i) {
      const double s = t(i) / (1.0 + lam * d(i));
      acc += d(i) * s * s;
    }
    return acc;
  };
  if (quad(0.0) <= level) return v;
  double lo = 0.0, hi = 1.0;
  while (quad(hi) > level && hi < 1e16) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (quad(mid) > level ? lo : hi) = mid;
    if (hi - lo < 1e-15 * (1.0 + hi)) break;
  }
  const double lam = 0.5 * (lo + hi);
  Eigen::VectorXd y = t;
  for (int i = 0; i < d.size(); ++i) y(i) /= 1.0 + lam * d(i);
  return eig.eigenvectors() * y;
}

}  // namespace

DiscreteSystem discretize(const spectral::TruncatedSystem& sys, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("invalid-config: dt must be positive");
  const int n = sys.dim();
  DiscreteSystem out;
  out.dt = dt;
  out.A = Eigen::VectorXd::Zero(n);
  out.B = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    const double a = sys.A(i, i);
    out.A(i) = std::exp(a * dt);
    out.B(i) = a == 0.0 ? dt * sys.B(i) : (std::exp(a * dt) - 1.0) / a * sys.B(i);
  }
  return out;
}

StateBox axis_box(const Eigen::VectorXd& s) {
  StateBox box;
  box.S = Eigen::MatrixXd::Identity(s.size(), s.size());
  box.s = s;
  return box;
}

MpcSolution solve_mpc(const Eigen::VectorXd& Z0, const MpcConfig& cfg,
                      const DiscreteSystem& sysd) {
  const int n = sysd.dim();
  const int M = cfg.horizon;
  if (M < 1) throw std::invalid_argument("invalid-config: horizon must be >= 1");
  if (!Z0.allFinite()) throw std::invalid_argument("Z0 must be finite");
  if (cfg.box.s.size() > 0 && !cfg.box.contains(Z0)) {
    MpcSolution sol;
    sol.status = SolveStatus::kInfeasible;
    return sol;
  }
  if (n == 0) {
    MpcSolution sol;
    sol.status = SolveStatus::kOptimal;
    sol.u = Eigen::VectorXd::Zero(M);
    sol.objective = 0.0;
    sol.kkt_residual = 0.0;
    return sol;
  }

  const Condensed cnd = condense(Z0, cfg, sysd);
  const int n_z = static_cast<int>(cfg.box.s.size());
  const bool has_terminal = cfg.terminal.enabled();

  // Row layout of the splitting variable: [u rows | S Z_k rows | Z_M rows].
  const int state_rows = n_z * (M - 1);
  const int term_rows = has_terminal ? n : 0;
  const int rows = M + state_rows + term_rows;

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(rows, M);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(rows);
  G.topRows(M).setIdentity();
  for (int k = 1; k < M; ++k) {
    G.middleRows(M + (k - 1) * n_z, n_z) = cfg.box.S * cnd.Phi[k];
    h.segment(M + (k - 1) * n_z, n_z) = cfg.box.S * cnd.d[k];
  }
  if (has_terminal) {
    G.bottomRows(n) = cnd.Phi[M];
    h.tail(n) = cnd.d[M];
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> term_eig;
  if (has_terminal) term_eig.compute(cfg.terminal.P);

  const auto project = [&](Eigen::VectorXd v) {
    v.head(M) = v.head(M).cwiseMax(-cfg.u_max).cwiseMin(cfg.u_max);
    for (int k = 1; k < M; ++k) {
      auto seg = v.segment(M + (k - 1) * n_z, n_z);
      seg = seg.cwiseMax(-cfg.box.s).cwiseMin(cfg.box.s);
    }
    if (has_terminal) v.tail(n) = project_ellipsoid(v.tail(n), term_eig, cfg.terminal.c);
    return v;
  };

  const Eigen::MatrixXd GtG = G.transpose() * G;
  double rho = 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(cnd.P + rho * GtG);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(M);
  Eigen::VectorXd y = project(h);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(rows);

  MpcSolution sol;
  double best_prim = std::numeric_limits<double>::infinity();
  int stall = 0;
  bool converged = false;

  for (int it = 1; it <= cfg.max_iters; ++it) {
    u = llt.solve(-cnd.q + rho * G.transpose() * (y - w - h));
    const Eigen::VectorXd v = G * u + h;
    const Eigen::VectorXd y_old = y;
    y = project(v + w);
    w += v - y;

    const double r_prim = (v - y).lpNorm<Eigen::Infinity>();
    const double r_dual = rho * (G.transpose() * (y - y_old)).lpNorm<Eigen::Infinity>();
    // Stationarity gap of the multipliers rho*w is rho*G'(v - y); it must be
    // driven below the KKT budget as well when rho has grown large.
    const double r_stat = rho * (G.transpose() * (v - y)).lpNorm<Eigen::Infinity>();
    sol.iterations = it;

    if (r_prim < cfg.tol && r_dual < cfg.tol && r_stat < 1e-8) {
      converged = true;
      break;
    }
    if (r_prim > 1e-4) {
      stall = r_prim > 0.999 * best_prim ? stall + 1 : 0;
      if (stall >= 2000) {
        sol.status = SolveStatus::kInfeasible;
        return sol;
      }
    } else {
      stall = 0;
    }
    best_prim = std::min(best_prim, r_prim);

    if (it % 200 == 0) {
      double new_rho = rho;
      if (r_prim > 10.0 * r_dual) new_rho = std::min(rho * 2.0, 1e6);
      else if (r_dual > 10.0 * r_prim) new_rho = std::max(rho * 0.5, 1e-4);
      if (new_rho != rho) {
        w *= rho / new_rho;
        rho = new_rho;
        llt.compute(cnd.P + rho * GtG);
      }
    }
  }

  if (!converged) {
    sol.status = SolveStatus::kSolverFailure;
    return sol;
  }

  sol.status = SolveStatus::kOptimal;
  sol.u = u;

  // Try an equality-KKT polish on the input-box active set; applicable only
  // when no state or terminal row is near-active.
  const double atol = 1e-6 * std::max(1.0, cfg.u_max);
  bool interior_ok = true;
  for (int k = 1; k < M && interior_ok; ++k) {
    const Eigen::VectorXd sz = (cfg.box.S * (cnd.d[k] + cnd.Phi[k] * u)).cwiseAbs();
    if (n_z > 0 && (sz.array() > (cfg.box.s.array() - 1e-6 * cfg.box.s.array().max(1.0))).any())
      interior_ok = false;
  }
  if (has_terminal) {
    const Eigen::VectorXd zM = cnd.d[M] + cnd.Phi[M] * u;
    if (zM.dot(cfg.terminal.P * zM) > cfg.terminal.c * (1.0 - 1e-6)) interior_ok = false;
  }
  if (interior_ok && std::isfinite(cfg.u_max)) {
    std::vector<int> fixed(M, 0);  // -1 lower, +1 upper, 0 free
    for (int i = 0; i < M; ++i) {
      if (u(i) >= cfg.u_max - atol) fixed[i] = 1;
      else if (u(i) <= -cfg.u_max + atol) fixed[i] = -1;
    }
    std::vector<int> free_idx;
    for (int i = 0; i < M; ++i)
      if (fixed[i] == 0) free_idx.push_back(i);

    Eigen::VectorXd up = u;
    for (int i = 0; i < M; ++i)
      if (fixed[i] != 0) up(i) = fixed[i] * cfg.u_max;
    if (!free_idx.empty()) {
      const int nf = static_cast<int>(free_idx.size());
      Eigen::MatrixXd Pff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs(a) = -cnd.q(free_idx[a]);
        for (int i = 0; i < M; ++i)
          if (fixed[i] != 0) rhs(a) -= cnd.P(free_idx[a], i) * up(i);
        for (int bcol = 0; bcol < nf; ++bcol) Pff(a, bcol) = cnd.P(free_idx[a], free_idx[bcol]);
      }
      const Eigen::VectorXd uf = Pff.ldlt().solve(rhs);
      for (int a = 0; a < nf; ++a) up(free_idx[a]) = uf(a);
    }

    const Eigen::VectorXd grad = cnd.P * up + cnd.q;
    bool ok = (up.cwiseAbs().array() <= cfg.u_max + 1e-9).all();
    for (int i = 0; i < M && ok; ++i) {
      if (fixed[i] == 1 && -grad(i) < -1e-9) ok = false;   // upper multiplier >= 0
      if (fixed[i] == -1 && grad(i) < -1e-9) ok = false;   // lower multiplier >= 0
    }
    for (int k = 1; k < M && ok; ++k) {
      if (n_z > 0 &&
          !(((cfg.box.S * (cnd.d[k] + cnd.Phi[k] * up)).cwiseAbs().array() <=
             cfg.box.s.array() + 1e-9).all()))
        ok = false;
    }
    if (ok) {
      sol.u = up;
      sol.polished = true;
    }
  }

  sol.objective = objective_of(cnd, sol.u);

  // KKT residual: stationarity with the splitting multipliers, primal
  // violation, and complementary slackness on the box rows.
  const Eigen::VectorXd lambda = rho * w;
  const Eigen::VectorXd v = G * sol.u + h;
  double stat, comp = 0.0, pviol = 0.0;
  if (sol.polished) {
    stat = 0.0;
    const Eigen::VectorXd grad = cnd.P * sol.u + cnd.q;
    for (int i = 0; i < M; ++i)
      if (std::abs(sol.u(i)) < cfg.u_max - atol) stat = std::max(stat, std::abs(grad(i)));
  } else {
    stat = (cnd.P * sol.u + cnd.q + G.transpose() * lambda).lpNorm<Eigen::Infinity>();
    for (int i = 0; i < rows; ++i) {
      double bound = i < M ? cfg.u_max
                           : (i < M + state_rows ? cfg.box.s((i - M) % std::max(n_z, 1))
                                                 : std::numeric_limits<double>::infinity());
      if (!std::isfinite(bound)) continue;
      const double slack = bound - std::abs(v(i));
      comp = std::max(comp, std::abs(lambda(i)) * std::max(0.0, slack));
    }
  }
  pviol = std::max(0.0, (sol.u.cwiseAbs().array() - cfg.u_max).maxCoeff());
  for (int k = 1; k < M; ++k) {
    if (n_z > 0) {
      const Eigen::VectorXd sz = (cfg.box.S * (cnd.d[k] + cnd.Phi[k] * sol.u)).cwiseAbs();
      pviol = std::max(pviol, (sz - cfg.box.s).maxCoeff());
    }
  }
  if (has_terminal) {
    const Eigen::VectorXd zM = cnd.d[M] + cnd.Phi[M] * sol.u;
    pviol = std::max(pviol, zM.dot(cfg.terminal.P * zM) - cfg.terminal.c);
  }
  sol.kkt_residual = std::max({stat, comp, std::max(0.0, pviol)});
  return sol;
}

TerminalIngredients terminal_ingredients(const MpcConfig& cfg, const DiscreteSystem& sysd) {
  const int n = sysd.dim();
  const Eigen::MatrixXd A = Eigen::MatrixXd(sysd.A.asDiagonal());
  const Eigen::VectorXd& B = sysd.B;

  Eigen::MatrixXd P = cfg.Q;
  for (int it = 0; it < 200000; ++it) {
    const double denom = cfg.R + B.dot(P * B);
    const Eigen::RowVectorXd BtPA = B.transpose() * P * A;
    const Eigen::MatrixXd Pn =
        cfg.Q + A.transpose() * P * A - BtPA.transpose() * BtPA / denom;
    const double diff = (Pn - P).cwiseAbs().maxCoeff();
    P = 0.5 * (Pn + Pn.transpose());
    if (diff < 1e-10) break;
    if (!P.allFinite() || P.cwiseAbs().maxCoeff() > 1e14)
      throw std::runtime_error("invalid-config: Riccati iteration diverged");
    if (it == 199999)
      throw std::runtime_error("invalid-config: Riccati iteration did not converge");
  }

  TerminalIngredients out;
  out.P = P;
  out.K = B.transpose() * P * A / (cfg.R + B.dot(P * B));

  // Boundary samples of the unit level set, used to certify a level c by
  // checking state-box membership and |K Z| <= u_max.
  std::vector<Eigen::VectorXd> dirs;
  if (n == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
  } else if (n == 2) {
    for (int i = 0; i < 256; ++i) {
      const double th = 2.0 * M_PI * i / 256.0;
      Eigen::VectorXd v(2);
      v << std::cos(th), std::sin(th);
      dirs.push_back(v);
    }
  } else {
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < 512; ++i) {
      Eigen::VectorXd v(n);
      for (int j = 0; j < n; ++j) v(j) = gauss(rng);
      dirs.push_back(v.normalized());
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
  const Eigen::MatrixXd P_inv_sqrt =
      eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();

  const auto feasible = [&](double c) {
    const double rc = std::sqrt(c);
    for (const auto& dir : dirs) {
      const Eigen::VectorXd Z = rc * (P_inv_sqrt * dir);
      if (cfg.box.s.size() > 0 && !cfg.box.contains(Z)) return false;
      if (std::abs(out.K.dot(Z)) > cfg.u_max) return false;
    }
    return true;
  };

  double hi = 1.0;
  while (feasible(hi) && hi < 1e12) hi *= 2.0;
  if (hi >= 1e12) {
    out.c_f = hi;
    return out;
  }
  double lo = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  out.c_f = lo;
  return out;
}

Dataset generate_dataset(const MpcConfig& cfg, const DiscreteSystem& sysd,
                         const std::vector<int>& grid) {
  const int n = sysd.dim();
  if (static_cast<int>(grid.size()) != n)
    throw std::invalid_argument("grid must give one sample count per state axis");
  if (!cfg.box.S.isApprox(Eigen::MatrixXd::Identity(n, n)))
    throw std::invalid_argument("dataset gridding expects an axis-aligned state box");

  std::vector<std::vector<double>> axes(n);
  for (int i = 0; i < n; ++i) {
    const int g = grid[i];
    if (g < 1) throw std::invalid_argument("grid counts must be >= 1");
    for (int j = 0; j < g; ++j)
      axes[i].push_back(g == 1 ? 0.0 : -cfg.box.s(i) + 2.0 * cfg.box.s(i) * j / (g - 1));
  }

  long total = 1;
  for (int g : grid) total *= g;

  std::vector<Eigen::VectorXd> states;
  std::vector<double> actions;
  Dataset ds;
  ds.grid = grid;
  for (long idx = 0; idx < total; ++idx) {
    Eigen::VectorXd Z0(n);
    long rem = idx;
    for (int i = n - 1; i >= 0; --i) {
      Z0(i) = axes[i][rem % grid[i]];
      rem /= grid[i];
    }
    const MpcSolution sol = solve_mpc(Z0, cfg, sysd);
    if (sol.status == SolveStatus::kOptimal) {
      states.push_back(Z0);
      actions.push_back(sol.u(0));
      ++ds.feasible;
    } else if (sol.status == SolveStatus::kInfeasible) {
      ++ds.infeasible;
    } else {
      ++ds.solver_failures;
    }
  }

  ds.Z = Eigen::MatrixXd::Zero(static_cast<int>(states.size()), n);
  ds.u = Eigen::VectorXd::Zero(static_cast<int>(actions.size()));
  for (size_t i = 0; i < states.size(); ++i) {
    ds.Z.row(static_cast<int>(i)) = states[i].transpose();
    ds.u(static_cast<int>(i)) = actions[i];
  }
  return ds;
}

}  // namespace pdectrl::mpc
