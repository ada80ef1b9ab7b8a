#include "pdectrl/train.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>
#include <stdexcept>

namespace pdectrl::train {

namespace {

nn::Box box_from(const mpc::StateBox& box) {
  return {-box.s, box.s};
}

// Sector pipeline for the current weights.
nn::TransformedPolicy transform_of(const nn::Policy& policy, const mpc::StateBox& box) {
  const nn::IsolatedPolicy iso = nn::isolate(policy);
  const nn::Interval bounds = nn::propagate_bounds(iso, box_from(box));
  const nn::SectorBounds sector = nn::sector_bounds(bounds.lo, bounds.hi);
  return nn::loop_transform(iso, sector);
}

Eigen::MatrixXd stacked_F(const nn::Policy& policy, const nn::SectorBounds& sector) {
  return nn::loop_transform(nn::isolate(policy), sector).stacked();
}

struct ForwardTrace {
  std::vector<Eigen::VectorXd> omega;  // per layer outputs
  double u = 0.0;
};

ForwardTrace forward_trace(const nn::Policy& p, const Eigen::VectorXd& Z) {
  ForwardTrace t;
  Eigen::VectorXd cur = Z;
  for (size_t i = 0; i < p.W.size(); ++i) {
    cur = (p.W[i] * cur + p.b[i]).array().tanh().matrix();
    t.omega.push_back(cur);
  }
  t.u = p.W_out.dot(cur) + p.b_out;
  return t;
}

}  // namespace

double imitation_loss(const nn::Policy& policy, const mpc::Dataset& dataset) {
  if (dataset.size() == 0) throw std::invalid_argument("invalid-input: empty dataset");
  double acc = 0.0;
  for (int i = 0; i < dataset.size(); ++i) {
    const double diff = nn::forward(policy, dataset.Z.row(i).transpose()) - dataset.u(i);
    acc += diff * diff;
  }
  return acc / dataset.size();
}

double augmented_lagrangian(const nn::Policy& policy, const nn::SectorBounds& sector,
                            const mpc::Dataset& dataset,
                            const certify::CertificateIterate& cert, const Eigen::MatrixXd& Y,
                            double rho, double eta1, double eta2) {
  Eigen::LLT<Eigen::MatrixXd> llt(cert.H1);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("invalid-certificate: H1 not positive definite");
  double logdet = 0.0;
  for (int i = 0; i < cert.H1.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));

  const Eigen::MatrixXd E = stacked_F(policy, sector) * cert.H() - cert.L();
  return eta1 * imitation_loss(policy, dataset) - eta2 * logdet +
         (Y.transpose() * E).trace() + 0.5 * rho * E.squaredNorm();
}

PolicyGrads aug_lagrangian_gradient(const nn::Policy& policy, const nn::SectorBounds& sector,
                                    const mpc::Dataset& dataset,
                                    const certify::CertificateIterate& cert,
                                    const Eigen::MatrixXd& Y, double rho, double eta1) {
  const int n0 = policy.input_dim();
  const int n_phi = policy.n_phi();
  const auto layers = policy.layer_sizes();
  std::vector<int> off(layers.size() + 1, 0);
  for (size_t i = 0; i < layers.size(); ++i) off[i + 1] = off[i] + layers[i];

  PolicyGrads g;
  for (const auto& w : policy.W) g.W.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  g.W_out = Eigen::RowVectorXd::Zero(policy.W_out.size());

  // Imitation term by backpropagation.
  const double inv_count = 1.0 / dataset.size();
  for (int s = 0; s < dataset.size(); ++s) {
    const Eigen::VectorXd Z = dataset.Z.row(s).transpose();
    const ForwardTrace t = forward_trace(policy, Z);
    const double d_u = eta1 * 2.0 * (t.u - dataset.u(s)) * inv_count;
    g.W_out += d_u * t.omega.back().transpose();
    Eigen::VectorXd delta =
        (policy.W_out.transpose() * d_u).cwiseProduct(
            (1.0 - t.omega.back().array().square()).matrix());
    for (int i = static_cast<int>(policy.W.size()) - 1; i >= 0; --i) {
      const Eigen::VectorXd& input = i == 0 ? Z : t.omega[static_cast<size_t>(i - 1)];
      g.W[static_cast<size_t>(i)] += delta * input.transpose();
      if (i > 0)
        delta = (policy.W[static_cast<size_t>(i)].transpose() * delta).cwiseProduct(
            (1.0 - t.omega[static_cast<size_t>(i - 1)].array().square()).matrix());
    }
  }

  // Consistency term: dL/dNtilde = (Y + rho E) H, pulled back through the
  // loop transform with the sector data held fixed.
  const nn::IsolatedPolicy iso = nn::isolate(policy);
  const nn::TransformedPolicy tp = nn::loop_transform(iso, sector);
  const Eigen::MatrixXd H = cert.H();
  const Eigen::MatrixXd E_c = tp.stacked() * H - cert.L();
  const Eigen::MatrixXd Gbar = (Y + rho * E_c) * H;  // (1+n_phi) x (n0+n_phi)

  const Eigen::RowVectorXd g_u = Gbar.row(0);
  const Eigen::MatrixXd G_nu = Gbar.bottomRows(n_phi);

  const Eigen::VectorXd& alpha = tp.alpha;
  const Eigen::VectorXd& beta = tp.beta;
  const Eigen::MatrixXd C3 = iso.N_vw * beta.asDiagonal();
  const Eigen::MatrixXd C4 = iso.N_vw * alpha.asDiagonal();
  const Eigen::MatrixXd Einv = nn::neumann_inverse(C4, layers);

  Eigen::MatrixXd T(n_phi, n0 + n_phi);  // [Nt_vz, Nt_vx]
  T.leftCols(n0) = tp.Nt_vz;
  T.rightCols(n_phi) = tp.Nt_vx;

  // dL/dN_uw from the top row, dL/dT via the resolvent adjoint.
  const Eigen::RowVectorXd g_ux = g_u.tail(n_phi);
  Eigen::RowVectorXd dN_uw = g_u * T.transpose() * alpha.asDiagonal() +
                             g_ux * beta.asDiagonal();
  const Eigen::MatrixXd Tbar =
      alpha.asDiagonal() * iso.N_uw.transpose() * g_u + G_nu;
  const Eigen::MatrixXd Sbar = Einv.transpose() * Tbar;
  const Eigen::MatrixXd dN_vz = Sbar.leftCols(n0);
  const Eigen::MatrixXd dN_vw =
      Sbar.rightCols(n_phi) * beta.asDiagonal() + (Sbar * T.transpose()) * alpha.asDiagonal();

  // Scatter onto the structural blocks.
  g.W[0] += dN_vz.topRows(layers[0]);
  for (size_t i = 1; i < policy.W.size(); ++i)
    g.W[i] += dN_vw.block(off[i], off[i - 1], layers[i], layers[i - 1]);
  g.W_out += dN_uw.tail(layers.back());
  return g;
}

AdamState::AdamState(const nn::Policy& p, double lr_) : lr(lr_) {
  for (const auto& w : p.W) {
    mW.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    vW.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  m_out = Eigen::RowVectorXd::Zero(p.W_out.size());
  v_out = Eigen::RowVectorXd::Zero(p.W_out.size());
}

void AdamState::apply(nn::Policy& p, const PolicyGrads& g) {
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  const auto update = [&](Eigen::MatrixXd& w, Eigen::MatrixXd& m, Eigen::MatrixXd& v,
                          const Eigen::MatrixXd& grad) {
    if (!grad.allFinite()) throw std::runtime_error("training-diverged: non-finite gradient");
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    w -= lr * ((m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
  };
  for (size_t i = 0; i < p.W.size(); ++i) update(p.W[i], mW[i], vW[i], g.W[i]);
  Eigen::MatrixXd wo = p.W_out, mo = m_out, vo = v_out;
  update(wo, mo, vo, g.W_out);
  p.W_out = wo;
  m_out = mo;
  v_out = vo;
}

void nn_step(nn::Policy& policy, AdamState& adam, const nn::SectorBounds& sector,
             const mpc::Dataset& dataset, const certify::CertificateIterate& cert,
             const Eigen::MatrixXd& Y, double rho, double eta1, int epochs) {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  for (int e = 0; e < epochs; ++e) {
    const PolicyGrads g =
        aug_lagrangian_gradient(policy, sector, dataset, cert, Y, rho, eta1);
    adam.apply(policy, g);
  }
}

Eigen::MatrixXd multiplier_update(const Eigen::MatrixXd& Y, double rho,
                                  const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                                  const Eigen::MatrixXd& L) {
  return Y + rho * (F * H - L);
}

VerificationReport verify_pipeline(const spectral::SpectralModel& model,
                                   const spectral::TruncatedSystem& sys,
                                   const nn::TransformedPolicy& tp,
                                   const certify::CertificateIterate& cert,
                                   const TrainConfig& cfg) {
  const int n0 = sys.dim();
  const double lambda_next = spectral::eigenpair(n0 + 1).lambda;
  const certify::NtildeBlocks nt = certify::blocks_of(tp);
  const Eigen::MatrixXd P = cert.P();
  const Eigen::VectorXd Lambda = cert.Lambda();

  VerificationReport rep;
  rep.spillover_mode = cfg.spillover;
  const double beta_tail = spectral::tail_energy(model, n0, model.N_tail).partial_norm2;
  rep.beta_window_tail = beta_tail;
  rep.tail_norm2 =
      cfg.spillover == "beta_window" ? beta_tail : spectral::lifting_residual_norm2(n0);

  std::vector<double> gammas;
  if (cfg.gamma_line_search) {
    for (double g = 1e-2; g <= 1e2 * (1.0 + 1e-12); g *= std::sqrt(10.0)) gammas.push_back(g);
  } else {
    gammas.push_back(cfg.gamma);
  }

  for (double g : gammas) {
    const certify::VerifyResult r = certify::verify_residual(
        sys, nt, P, Lambda, cfg.delta, g, rep.tail_norm2, lambda_next, model.q_c,
        cfg.verify_opts);
    rep.gamma_table.push_back({g, r.feasible, r.alpha_star, r.alpha_unbounded});
    if (r.feasible && (!rep.feasible || r.alpha_star > rep.alpha_star)) {
      rep.feasible = true;
      rep.alpha_star = r.alpha_star;
      rep.gamma_star = g;
      rep.alpha_unbounded = r.alpha_unbounded;
      rep.condition_eig = r.condition_eig;
    }
  }

  // Diagnostic against the windowed beta tail (the paper's literal constant).
  {
    const certify::VerifyResult r = certify::verify_residual(
        sys, nt, P, Lambda, cfg.delta, rep.feasible ? rep.gamma_star : cfg.gamma, beta_tail,
        lambda_next, model.q_c, cfg.verify_opts);
    rep.beta_window_feasible = r.feasible;
    rep.beta_window_alpha = r.alpha_star;
  }

  if (!rep.feasible) rep.remedy = "add_mode";
  return rep;
}

TrainResult train(const spectral::SpectralModel& model, const spectral::TruncatedSystem& sys,
                  const mpc::Dataset& dataset, const mpc::StateBox& box,
                  const TrainConfig& cfg) {
  const int n0 = sys.dim();
  if (dataset.size() == 0) throw std::invalid_argument("invalid-input: empty dataset");

  // Seeded initialization; output layer scaled to the expert action range.
  std::mt19937_64 rng(cfg.seed);
  nn::Policy policy = nn::make_policy(n0, cfg.hidden);
  const double u_scale = std::max(1.0, dataset.u.cwiseAbs().maxCoeff());
  for (auto& w : policy.W) {
    const double a = std::sqrt(6.0 / (w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-a, a);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  }
  {
    const double a = 2.0 * u_scale / policy.W_out.size();
    std::uniform_real_distribution<double> dist(-a, a);
    for (int j = 0; j < policy.W_out.size(); ++j) policy.W_out(j) = dist(rng);
  }

  // Pure imitation pretraining (rho = 0, Y = 0).
  {
    certify::CertificateIterate zero;
    zero.H1 = Eigen::MatrixXd::Identity(n0, n0);
    zero.H2 = Eigen::VectorXd::Ones(policy.n_phi());
    zero.L1 = Eigen::RowVectorXd::Zero(n0);
    zero.L2 = Eigen::RowVectorXd::Zero(policy.n_phi());
    zero.L3 = Eigen::MatrixXd::Zero(policy.n_phi(), n0);
    zero.L4 = Eigen::MatrixXd::Zero(policy.n_phi(), policy.n_phi());
    const Eigen::MatrixXd Y0 =
        Eigen::MatrixXd::Zero(1 + policy.n_phi(), n0 + policy.n_phi());
    AdamState adam(policy, cfg.pretrain_step);
    const nn::TransformedPolicy tp0 = transform_of(policy, box);
    nn_step(policy, adam, tp0.sector, dataset, zero, Y0, 0.0, cfg.eta1,
            cfg.pretrain_epochs);
  }

  const int n_phi = policy.n_phi();
  TrainResult result;
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(1 + n_phi, n0 + n_phi);

  nn::TransformedPolicy tp = transform_of(policy, box);
  certify::CertificateStepResult cert;
  try {
    const certify::CertificateIterate init =
        certify::feasible_initializer(sys, box, cfg.delta, cfg.tau, n_phi);
    cert = certify::certificate_step(tp.stacked(), Y, cfg.rho, cfg.eta2, sys, box, cfg.delta,
                                     cfg.tau, &init, cfg.cert_opts);
  } catch (const certify::CertificateInfeasible& err) {
    throw certify::CertificateInfeasible(std::string("initialization-infeasible: ") +
                                         err.what());
  }

  AdamState adam(policy, cfg.step_size);
  double la_prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.k_max; ++k) {
    nn_step(policy, adam, tp.sector, dataset, cert.iterate, Y, cfg.rho, cfg.eta1, cfg.epochs);

    // Sector refresh before the certificate step so the certificate is
    // computed for the network it certifies.
    tp = transform_of(policy, box);
    cert = certify::certificate_step(tp.stacked(), Y, cfg.rho, cfg.eta2, sys, box, cfg.delta,
                                     cfg.tau, &cert.iterate, cfg.cert_opts);

    const Eigen::MatrixXd F = tp.stacked();
    const Eigen::MatrixXd residual = F * cert.iterate.H() - cert.iterate.L();
    Y = Y + cfg.rho * residual;

    const double la = augmented_lagrangian(policy, tp.sector, dataset, cert.iterate, Y,
                                           cfg.rho, cfg.eta1, cfg.eta2);
    HistoryRow row;
    row.k = k;
    row.imitation = imitation_loss(policy, dataset);
    row.logdet_H1 = cert.logdet_H1;
    row.residual_fro = residual.norm();
    row.lmi_min_eig = cert.lmi_min_eig;
    row.aug_lagrangian = la;
    result.history.push_back(row);
    result.iterations = k + 1;

    const double rel_change = std::abs(la - la_prev) / std::max(1.0, std::abs(la_prev));
    if (row.residual_fro < cfg.tol_c && rel_change < cfg.tol_o) {
      result.converged = true;
      break;
    }
    la_prev = la;
  }

  result.policy = policy;
  result.transformed = tp;
  result.certificate = cert.iterate;
  result.Y = Y;
  result.verification = verify_pipeline(model, sys, tp, cert.iterate, cfg);
  return result;
}

}  // namespace pdectrl::train
