#include "pdectrl/stages.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pdectrl/artifacts.hpp"
#include "pdectrl/certify.hpp"
#include "pdectrl/mpc.hpp"
#include "pdectrl/nn_policy.hpp"
#include "pdectrl/sim.hpp"
#include "pdectrl/spectral.hpp"
#include "pdectrl/train.hpp"

namespace pdectrl::stages {

namespace {

namespace fs = std::filesystem;
using artifacts::json;
using clock_type = std::chrono::steady_clock;

struct StageTimer {
  clock_type::time_point start = clock_type::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(clock_type::now() - start).count();
  }
};

json load_manifest(const fs::path& out) {
  const fs::path p = out / "manifest.json";
  if (!fs::exists(p)) return json{{"stages", json::object()}};
  return artifacts::read_json(p);
}

void record_stage(const StageContext& ctx, const std::string& stage, const json& inputs,
                  const json& outputs, double wall_ms) {
  json manifest = load_manifest(ctx.out);
  manifest["stages"][stage] = {{"config_hash", ctx.config_hash()},
                               {"seed", ctx.cfg.seed},
                               {"inputs", inputs},
                               {"outputs", outputs},
                               {"wall_ms", wall_ms}};
  artifacts::write_json(ctx.out / "manifest.json", manifest);
}

json meta_of(const StageContext& ctx, const json& inputs) {
  return {{"config_hash", ctx.config_hash()}, {"inputs", inputs}, {"seed", ctx.cfg.seed}};
}

json require_artifact(const StageContext& ctx, const std::string& name) {
  const fs::path p = ctx.out / name;
  if (!fs::exists(p)) throw UpstreamError("missing upstream artifact: " + name);
  const json j = artifacts::read_json(p);
  if (!j.contains("_meta") ||
      j.at("_meta").at("config_hash").get<std::string>() != ctx.config_hash())
    throw UpstreamError("artifact " + name + " was produced by a different config");
  return j;
}

std::string require_text_artifact(const StageContext& ctx, const std::string& name) {
  const fs::path p = ctx.out / name;
  if (!fs::exists(p)) throw UpstreamError("missing upstream artifact: " + name);
  return artifacts::read_text(p);
}

spectral::SpectralModel build_model(const StageContext& ctx, int n0) {
  return spectral::build_model(ctx.cfg.spectral.q_c, ctx.cfg.spectral.delta, n0,
                               ctx.cfg.spectral.N_tail);
}

mpc::MpcConfig mpc_config(const StageContext& ctx, int n0, int horizon) {
  mpc::MpcConfig m;
  m.horizon = horizon;
  m.Q = ctx.cfg.mpc.q_weight * Eigen::MatrixXd::Identity(n0, n0);
  m.R = ctx.cfg.mpc.r_weight;
  m.u_max = ctx.cfg.u_max;
  m.box = mpc::axis_box(ctx.cfg.box_s);
  return m;
}

train::TrainConfig train_config(const StageContext& ctx) {
  train::TrainConfig t;
  const auto& s = ctx.cfg.train;
  t.eta1 = s.eta1;
  t.eta2 = s.eta2;
  t.rho = s.rho;
  t.gamma = s.gamma;
  t.tau = s.tau;
  t.delta = ctx.cfg.spectral.delta;
  t.epochs = s.epochs;
  t.pretrain_epochs = s.pretrain_epochs;
  t.k_max = s.k_max;
  t.step_size = s.step_size;
  t.pretrain_step = s.pretrain_step;
  t.tol_c = s.tol_c;
  t.tol_o = s.tol_o;
  t.hidden = s.hidden;
  t.seed = ctx.cfg.seed;
  t.verify_opts.delta_factor = ctx.cfg.verify.decay_factor == "two_delta" ? 2.0 : 1.0;
  t.verify_opts.coupling_row_only = ctx.cfg.verify.coupling == "row";
  t.gamma_line_search = ctx.cfg.verify.gamma_line_search;
  t.spillover = ctx.cfg.verify.spillover;
  return t;
}

mpc::Dataset load_dataset(const StageContext& ctx, int n0) {
  const std::string text = require_text_artifact(ctx, "dataset.csv");
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw UpstreamError("dataset.csv is empty");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != n0 + 1)
      throw UpstreamError("dataset.csv row width does not match n0 + 1");
    rows.push_back(row);
  }
  mpc::Dataset ds;
  ds.Z = Eigen::MatrixXd(static_cast<int>(rows.size()), n0);
  ds.u = Eigen::VectorXd(static_cast<int>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < n0; ++j) ds.Z(static_cast<int>(i), j) = rows[i][static_cast<size_t>(j)];
    ds.u(static_cast<int>(i)) = rows[i][static_cast<size_t>(n0)];
  }
  ds.feasible = ds.size();
  return ds;
}

json verification_to_json(const train::VerificationReport& rep) {
  json gamma_table = json::array();
  for (const auto& g : rep.gamma_table)
    gamma_table.push_back({{"gamma", g.gamma},
                           {"feasible", g.feasible},
                           {"alpha", g.alpha},
                           {"unbounded", g.unbounded}});
  return {{"feasible", rep.feasible},
          {"alpha_star", rep.alpha_star},
          {"gamma_star", rep.gamma_star},
          {"alpha_unbounded", rep.alpha_unbounded},
          {"tail_norm2", rep.tail_norm2},
          {"spillover_mode", rep.spillover_mode},
          {"gamma_table", gamma_table},
          {"remedy", rep.remedy},
          {"condition_max_eig", rep.condition_eig},
          {"beta_window", {{"tail_norm2", rep.beta_window_tail},
                           {"feasible", rep.beta_window_feasible},
                           {"alpha", rep.beta_window_alpha}}}};
}

}  // namespace

std::string StageContext::config_hash() const { return artifacts::artifact_hash(cfg_json); }

void cmd_model(const StageContext& ctx) {
  StageTimer timer;
  const int n0 = config::resolve_n0(ctx.cfg);
  const auto model = build_model(ctx, n0);
  const auto sys = spectral::build_truncated(model, n0, ctx.cfg.spectral.delta);
  const auto tail = spectral::tail_energy(model, n0, ctx.cfg.spectral.N_tail);
  const double b_res = spectral::lifting_residual_norm2(n0);

  json modes = json::array();
  for (int n = 1; n <= n0; ++n) {
    const auto& m = model.mode(n);
    modes.push_back({{"n", m.n},
                     {"lambda", m.lambda},
                     {"beta", m.beta},
                     {"mu", m.mu},
                     {"a", m.a},
                     {"b", m.b}});
  }
  json out = {{"q_c", model.q_c},
              {"n0", n0},
              {"delta", model.delta},
              {"modes", modes},
              {"tail",
               {{"N_tail", ctx.cfg.spectral.N_tail},
                {"partial_norm2", tail.partial_norm2},
                {"last_term", tail.last_term},
                {"last_over_total", tail.last_over_total}}},
              {"lifting_residual_norm2", b_res},
              {"lambda_next", spectral::eigenpair(n0 + 1).lambda},
              {"A_diag", artifacts::vector_to_json(sys.A.diagonal())},
              {"B", artifacts::vector_to_json(sys.B)},
              {"_meta", meta_of(ctx, json::object())}};
  artifacts::write_json(ctx.out / "model.json", out);

  std::ostringstream table;
  table << "n      lambda_n        beta_n\n";
  for (int n = 1; n <= n0 + 3; ++n) {
    const auto ep = spectral::eigenpair(n);
    const auto lift = spectral::lifting_coefficients(n, model.q_c);
    table << n << "  " << ep.lambda << "  " << lift.beta
          << (n <= n0 ? "  (retained)\n" : "  (neglected)\n");
  }
  artifacts::write_text(ctx.out / "mode_table.txt", table.str());

  record_stage(ctx, "model", json::object(),
               {{"model.json", artifacts::artifact_hash(out)},
                {"mode_table.txt", artifacts::fnv1a_hex(table.str())}},
               timer.ms());
}

void cmd_dataset(const StageContext& ctx) {
  StageTimer timer;
  const json model_json = require_artifact(ctx, "model.json");
  const int n0 = model_json.at("n0").get<int>();
  const auto model = build_model(ctx, n0);
  const auto sys = spectral::build_truncated(model, n0, ctx.cfg.spectral.delta);
  const auto sysd = mpc::discretize(sys, ctx.cfg.mpc.dt);

  mpc::MpcConfig m = mpc_config(ctx, n0, ctx.cfg.mpc.horizon);
  const auto term = mpc::terminal_ingredients(m, sysd);
  m.terminal.P = term.P;
  m.terminal.c = term.c_f;

  const std::vector<int> grid(static_cast<size_t>(n0), ctx.cfg.mpc.grid_points);
  const auto ds = mpc::generate_dataset(m, sysd, grid);

  std::vector<std::string> header;
  for (int i = 1; i <= n0; ++i) header.push_back("z_" + std::to_string(i));
  header.push_back("u");
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < ds.size(); ++i) {
    std::vector<double> row;
    for (int j = 0; j < n0; ++j) row.push_back(ds.Z(i, j));
    row.push_back(ds.u(i));
    rows.push_back(row);
  }
  artifacts::write_csv(ctx.out / "dataset.csv", header, rows);
  const std::string csv_text = artifacts::read_text(ctx.out / "dataset.csv");

  const json inputs = {{"model.json", artifacts::artifact_hash(model_json)}};
  json meta = {{"grid", ds.grid},
               {"feasible", ds.feasible},
               {"infeasible", ds.infeasible},
               {"solver_failures", ds.solver_failures},
               {"horizon", ctx.cfg.mpc.horizon},
               {"dt", ctx.cfg.mpc.dt},
               {"terminal",
                {{"P", artifacts::matrix_to_json(term.P)},
                 {"c_f", term.c_f},
                 {"K", artifacts::matrix_to_json(term.K)}}},
               {"csv_hash", artifacts::fnv1a_hex(csv_text)},
               {"_meta", meta_of(ctx, inputs)}};
  artifacts::write_json(ctx.out / "dataset_meta.json", meta);

  record_stage(ctx, "dataset", inputs,
               {{"dataset.csv", artifacts::fnv1a_hex(csv_text)},
                {"dataset_meta.json", artifacts::artifact_hash(meta)}},
               timer.ms());
}

void cmd_train(const StageContext& ctx) {
  StageTimer timer;
  const json model_json = require_artifact(ctx, "model.json");
  const json ds_meta = require_artifact(ctx, "dataset_meta.json");
  const int n0 = model_json.at("n0").get<int>();
  const auto dataset = load_dataset(ctx, n0);
  if (ds_meta.at("csv_hash").get<std::string>() !=
      artifacts::fnv1a_hex(require_text_artifact(ctx, "dataset.csv")))
    throw UpstreamError("dataset.csv does not match its recorded hash");
  if (dataset.size() == 0) throw std::runtime_error("empty dataset: nothing to imitate");

  const auto model = build_model(ctx, n0);
  const auto sys = spectral::build_truncated(model, n0, ctx.cfg.spectral.delta);
  const auto box = mpc::axis_box(ctx.cfg.box_s);
  const auto tcfg = train_config(ctx);

  const auto result = train::train(model, sys, dataset, box, tcfg);

  const json inputs = {{"model.json", artifacts::artifact_hash(model_json)},
                       {"dataset_meta.json", artifacts::artifact_hash(ds_meta)}};

  json weights = artifacts::policy_to_json(result.policy);
  weights["_meta"] = meta_of(ctx, inputs);
  artifacts::write_json(ctx.out / "weights.json", weights);

  // Certificate with derived quantities and the PSD margins actually achieved.
  const auto& cert = result.certificate;
  const Eigen::MatrixXd lmi = certify::assemble_convex_lmi(sys, cert, tcfg.delta, tcfg.tau);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> lmi_eig(lmi);
  const Eigen::MatrixXd theorem = certify::assemble_theorem_lhs(
      sys, certify::blocks_of(result.transformed), cert.P(), cert.Lambda(), tcfg.delta,
      tcfg.tau, 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> thm_eig(theorem);
  const auto rows = certify::containment_constraints(cert.H1, box.S, box.s);
  json containment = json::array();
  for (const auto& r : rows)
    containment.push_back({{"lhs", r.lhs}, {"rhs", r.rhs}, {"satisfied", r.satisfied}});

  json cert_json = artifacts::certificate_to_json(cert);
  cert_json["delta"] = tcfg.delta;
  cert_json["tau"] = tcfg.tau;
  cert_json["gamma"] = result.verification.gamma_star;
  cert_json["alpha"] = result.verification.alpha_star;
  cert_json["logdet"] = -std::log(cert.P().determinant());
  cert_json["psd_margins"] = {{"lmi_min_eig", lmi_eig.eigenvalues().minCoeff()},
                              {"theorem_max_eig", thm_eig.eigenvalues().maxCoeff()},
                              {"containment", containment}};
  cert_json["_meta"] = meta_of(ctx, inputs);
  artifacts::write_json(ctx.out / "certificate.json", cert_json);

  std::vector<std::vector<double>> hist;
  for (const auto& row : result.history)
    hist.push_back({static_cast<double>(row.k), row.imitation, row.logdet_H1,
                    row.residual_fro, row.lmi_min_eig, row.aug_lagrangian});
  artifacts::write_csv(ctx.out / "history.csv",
                       {"k", "imitation", "logdet_H1", "residual_fro", "lmi_min_eig",
                        "aug_lagrangian"},
                       hist);

  json verification = verification_to_json(result.verification);
  verification["converged"] = result.converged;
  verification["iterations"] = result.iterations;
  verification["_meta"] = meta_of(ctx, inputs);
  artifacts::write_json(ctx.out / "verification.json", verification);

  record_stage(ctx, "train", inputs,
               {{"weights.json", artifacts::artifact_hash(weights)},
                {"certificate.json", artifacts::artifact_hash(cert_json)},
                {"history.csv",
                 artifacts::fnv1a_hex(artifacts::read_text(ctx.out / "history.csv"))},
                {"verification.json", artifacts::artifact_hash(verification)}},
               timer.ms());
}

void cmd_certify(const StageContext& ctx) {
  StageTimer timer;
  const json model_json = require_artifact(ctx, "model.json");
  const json weights = require_artifact(ctx, "weights.json");
  const json cert_json = require_artifact(ctx, "certificate.json");
  const int n0 = model_json.at("n0").get<int>();

  const auto model = build_model(ctx, n0);
  const auto sys = spectral::build_truncated(model, n0, ctx.cfg.spectral.delta);
  const auto box = mpc::axis_box(ctx.cfg.box_s);
  const auto policy = artifacts::policy_from_json(weights);
  const auto cert = artifacts::certificate_from_json(cert_json);

  const nn::IsolatedPolicy iso = nn::isolate(policy);
  const nn::Interval bounds = nn::propagate_bounds(iso, {-box.s, box.s});
  const nn::SectorBounds sector = nn::sector_bounds(bounds.lo, bounds.hi);
  const nn::TransformedPolicy tp = nn::loop_transform(iso, sector);

  const auto rep = train::verify_pipeline(model, sys, tp, cert, train_config(ctx));

  const json inputs = {{"model.json", artifacts::artifact_hash(model_json)},
                       {"weights.json", artifacts::artifact_hash(weights)},
                       {"certificate.json", artifacts::artifact_hash(cert_json)}};
  json verification = verification_to_json(rep);
  const Eigen::MatrixXd lmi = certify::assemble_convex_lmi(
      sys, cert, ctx.cfg.spectral.delta, ctx.cfg.train.tau);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> lmi_eig(lmi);
  verification["lmi_min_eig"] = lmi_eig.eigenvalues().minCoeff();
  verification["_meta"] = meta_of(ctx, inputs);
  artifacts::write_json(ctx.out / "verification.json", verification);

  record_stage(ctx, "certify", inputs,
               {{"verification.json", artifacts::artifact_hash(verification)}}, timer.ms());
}

void cmd_simulate(const StageContext& ctx) {
  StageTimer timer;
  const json model_json = require_artifact(ctx, "model.json");
  const json weights = require_artifact(ctx, "weights.json");
  const json cert_json = require_artifact(ctx, "certificate.json");
  const json verification = require_artifact(ctx, "verification.json");
  const int n0 = model_json.at("n0").get<int>();

  const auto model = build_model(ctx, n0);
  const auto policy = artifacts::policy_from_json(weights);
  const auto cert = artifacts::certificate_from_json(cert_json);
  const Eigen::MatrixXd P = cert.P();
  const double gamma = verification.at("feasible").get<bool>()
                           ? verification.at("gamma_star").get<double>()
                           : ctx.cfg.train.gamma;
  const double delta = ctx.cfg.spectral.delta;
  const auto controller = sim::policy_controller(policy);

  const auto roa_val =
      sim::roa_validation(P, controller, model, ctx.cfg.sim.roa_samples, ctx.cfg.sim.T,
                          ctx.cfg.sim.h, ctx.cfg.sim.N_sim, gamma, delta);

  // One representative boundary trajectory for the CSV/plot artifacts.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(n0);
  dir(0) = 1.0;
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(ctx.cfg.sim.N_sim);
  z0.head(n0) = eig.operatorInverseSqrt() * dir;
  const auto traj = sim::simulate_closed_loop(model, controller, n0, z0, ctx.cfg.sim.T,
                                              ctx.cfg.sim.h, P, gamma);
  const auto metrics = sim::decay_metrics(traj, delta);

  const size_t stride = std::max<size_t>(1, traj.steps() / 2000);
  std::vector<std::string> header = {"t"};
  for (int i = 1; i <= ctx.cfg.sim.N_sim; ++i) header.push_back("z_" + std::to_string(i));
  header.push_back("u");
  header.push_back("V1");
  header.push_back("V2");
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < traj.steps(); i += stride) {
    std::vector<double> row = {traj.t[i]};
    for (int j = 0; j < ctx.cfg.sim.N_sim; ++j) row.push_back(traj.Z[i](j));
    row.push_back(traj.u[i]);
    row.push_back(traj.V1[i]);
    row.push_back(traj.V2[i]);
    rows.push_back(row);
  }
  artifacts::write_csv(ctx.out / "trajectory.csv", header, rows);

  // Field snapshots at t = 0, T/4 and T.
  std::vector<double> x_grid;
  for (int i = 0; i < ctx.cfg.sim.field_points; ++i)
    x_grid.push_back(static_cast<double>(i) / (ctx.cfg.sim.field_points - 1));
  const std::vector<size_t> snaps = {0, traj.steps() / 4, traj.steps() - 1};
  std::vector<std::string> fheader = {"x"};
  std::vector<sim::FieldSnapshot> fields;
  for (size_t s : snaps) {
    fields.push_back(sim::reconstruct_field(model, traj, s, x_grid));
    fheader.push_back("z_t" + std::to_string(fields.back().t));
  }
  std::vector<std::vector<double>> frows;
  for (size_t i = 0; i < x_grid.size(); ++i) {
    std::vector<double> row = {x_grid[i]};
    for (const auto& f : fields) row.push_back(f.z[i]);
    frows.push_back(row);
  }
  artifacts::write_csv(ctx.out / "field.csv", fheader, frows);

  // Lyapunov decay plot with the certified envelope.
  std::vector<artifacts::Series> vplot(4);
  vplot[0].label = "V";
  vplot[1].label = "V1";
  vplot[2].label = "V2";
  vplot[3].label = "bound";
  for (size_t i = 0; i < traj.steps(); i += stride) {
    vplot[0].x.push_back(traj.t[i]);
    vplot[0].y.push_back(traj.V(i));
    vplot[1].x.push_back(traj.t[i]);
    vplot[1].y.push_back(traj.V1[i]);
    vplot[2].x.push_back(traj.t[i]);
    vplot[2].y.push_back(traj.V2[i]);
    vplot[3].x.push_back(traj.t[i]);
    vplot[3].y.push_back(metrics.V0 * std::exp(-2.0 * 0.9 * delta * traj.t[i]));
  }
  artifacts::write_text(ctx.out / "v_decay.svg",
                        artifacts::svg_line_plot(vplot, "Lyapunov decay", "t", "V", true));

  // Phase portrait: trajectory, certified ellipse and the state box.
  std::vector<artifacts::Series> phase;
  {
    artifacts::Series s;
    s.label = "trajectory";
    for (size_t i = 0; i < traj.steps(); i += stride) {
      s.x.push_back(traj.Z[i](0));
      s.y.push_back(traj.Z[i](n0 > 1 ? 1 : 0));
    }
    phase.push_back(s);
  }
  if (n0 >= 2) {
    artifacts::Series e;
    e.label = "E(P) boundary";
    const Eigen::MatrixXd Pis = eig.operatorInverseSqrt();
    for (int i = 0; i <= 128; ++i) {
      const double th = 2.0 * M_PI * i / 128.0;
      Eigen::VectorXd d = Eigen::VectorXd::Zero(n0);
      d(0) = std::cos(th);
      d(1) = std::sin(th);
      const Eigen::VectorXd z = Pis * d;
      e.x.push_back(z(0));
      e.y.push_back(z(1));
    }
    phase.push_back(e);
    artifacts::Series bx;
    bx.label = "state box";
    const double s1 = ctx.cfg.box_s(0), s2 = ctx.cfg.box_s(1);
    bx.x = {-s1, s1, s1, -s1, -s1};
    bx.y = {-s2, -s2, s2, s2, -s2};
    phase.push_back(bx);
  }
  artifacts::write_text(ctx.out / "phase.svg",
                        artifacts::svg_line_plot(phase, "Phase portrait", "z_1", "z_2"));

  json plot_data = {{"v_decay", json::array()}, {"phase", json::array()}};
  for (const auto& s : vplot)
    plot_data["v_decay"].push_back({{"label", s.label}, {"x", s.x}, {"y", s.y}});
  for (const auto& s : phase)
    plot_data["phase"].push_back({{"label", s.label}, {"x", s.x}, {"y", s.y}});

  const json inputs = {{"model.json", artifacts::artifact_hash(model_json)},
                       {"weights.json", artifacts::artifact_hash(weights)},
                       {"certificate.json", artifacts::artifact_hash(cert_json)},
                       {"verification.json", artifacts::artifact_hash(verification)}};
  json converged = json::array();
  json decay_ok = json::array();
  for (size_t i = 0; i < roa_val.converged.size(); ++i) {
    converged.push_back(static_cast<bool>(roa_val.converged[i]));
    decay_ok.push_back(static_cast<bool>(roa_val.decay_ok[i]));
  }
  bool all_decay = !roa_val.decay_ok.empty();
  for (bool ok : roa_val.decay_ok) all_decay = all_decay && ok;
  json summary = {{"fraction_converged", roa_val.fraction_converged},
                  {"converged", converged},
                  {"decay_ok", decay_ok},
                  {"all_decay_ok", all_decay},
                  {"gamma", gamma},
                  {"N_sim", ctx.cfg.sim.N_sim},
                  {"T", ctx.cfg.sim.T},
                  {"h", ctx.cfg.sim.h},
                  {"representative",
                   {{"fitted_rate", metrics.fitted_rate},
                    {"satisfied", metrics.satisfied},
                    {"V0", metrics.V0}}},
                  {"_meta", meta_of(ctx, inputs)}};
  plot_data["_meta"] = meta_of(ctx, inputs);
  artifacts::write_json(ctx.out / "sim_summary.json", summary);
  artifacts::write_json(ctx.out / "plot_data.json", plot_data);

  record_stage(
      ctx, "simulate", inputs,
      {{"sim_summary.json", artifacts::artifact_hash(summary)},
       {"plot_data.json", artifacts::artifact_hash(plot_data)},
       {"trajectory.csv",
        artifacts::fnv1a_hex(artifacts::read_text(ctx.out / "trajectory.csv"))},
       {"field.csv", artifacts::fnv1a_hex(artifacts::read_text(ctx.out / "field.csv"))},
       {"v_decay.svg", artifacts::fnv1a_hex(artifacts::read_text(ctx.out / "v_decay.svg"))},
       {"phase.svg", artifacts::fnv1a_hex(artifacts::read_text(ctx.out / "phase.svg"))}},
      timer.ms());
}

void cmd_report(const StageContext& ctx) {
  StageTimer timer;
  const json model_json = require_artifact(ctx, "model.json");
  const json ds_meta = require_artifact(ctx, "dataset_meta.json");
  const json weights = require_artifact(ctx, "weights.json");
  const json cert_json = require_artifact(ctx, "certificate.json");
  const json verification = require_artifact(ctx, "verification.json");
  const json summary = require_artifact(ctx, "sim_summary.json");
  const int n0 = model_json.at("n0").get<int>();

  const auto model = build_model(ctx, n0);
  const auto sys = spectral::build_truncated(model, n0, ctx.cfg.spectral.delta);
  const auto sysd = mpc::discretize(sys, ctx.cfg.mpc.dt);
  const auto policy = artifacts::policy_from_json(weights);
  const auto dataset = load_dataset(ctx, n0);

  mpc::MpcConfig m = mpc_config(ctx, n0, ctx.cfg.mpc.timing_horizon);
  m.terminal.P = artifacts::matrix_from_json(ds_meta.at("terminal").at("P"));
  m.terminal.c = ds_meta.at("terminal").at("c_f").get<double>();

  std::vector<Eigen::VectorXd> states;
  for (int i = 0; i < dataset.size(); ++i) states.push_back(dataset.Z.row(i).transpose());
  if (states.empty()) states.push_back(Eigen::VectorXd::Zero(n0));
  const auto timing = sim::timing_benchmark(policy, m, sysd, states);

  const json inputs = {{"model.json", artifacts::artifact_hash(model_json)},
                       {"dataset_meta.json", artifacts::artifact_hash(ds_meta)},
                       {"weights.json", artifacts::artifact_hash(weights)},
                       {"certificate.json", artifacts::artifact_hash(cert_json)},
                       {"verification.json", artifacts::artifact_hash(verification)},
                       {"sim_summary.json", artifacts::artifact_hash(summary)}};

  json report = {{"scenario", ctx.cfg.scenario},
                 {"n0", n0},
                 {"delta", ctx.cfg.spectral.delta},
                 {"verification",
                  {{"feasible", verification.at("feasible")},
                   {"alpha_star", verification.at("alpha_star")},
                   {"gamma_star", verification.at("gamma_star")},
                   {"remedy", verification.at("remedy")},
                   {"spillover_mode", verification.at("spillover_mode")},
                   {"tail_norm2", verification.at("tail_norm2")},
                   {"beta_window", verification.at("beta_window")}}},
                 {"certificate",
                  {{"logdet", cert_json.at("logdet")},
                   {"psd_margins", cert_json.at("psd_margins")}}},
                 {"roa_validation",
                  {{"fraction_converged", summary.at("fraction_converged")},
                   {"all_decay_ok", summary.at("all_decay_ok")}}},
                 {"dataset",
                  {{"feasible", ds_meta.at("feasible")},
                   {"infeasible", ds_meta.at("infeasible")}}},
                 {"timing",
                  {{"nn_avg_ms", timing.nn_avg_ms},
                   {"mpc_avg_ms", timing.mpc_avg_ms},
                   {"speedup", timing.speedup},
                   {"nn_evals", timing.nn_evals},
                   {"mpc_solves", timing.mpc_solves},
                   {"mpc_horizon", ctx.cfg.mpc.timing_horizon}}},
                 {"_meta", meta_of(ctx, inputs)}};
  artifacts::write_json(ctx.out / "report.json", report);

  record_stage(ctx, "report", inputs,
               {{"report.json", artifacts::artifact_hash(report)}}, timer.ms());
}

int run_stage(const std::string& stage, const StageContext& ctx) {
  try {
    std::filesystem::create_directories(ctx.out);
    if (stage == "model") cmd_model(ctx);
    else if (stage == "dataset") cmd_dataset(ctx);
    else if (stage == "train") cmd_train(ctx);
    else if (stage == "certify") cmd_certify(ctx);
    else if (stage == "simulate") cmd_simulate(ctx);
    else if (stage == "report") cmd_report(ctx);
    else if (stage == "all") {
      for (const char* s : {"model", "dataset", "train", "certify", "simulate", "report"}) {
        const int rc = run_stage(s, ctx);
        if (rc != kOk) return rc;
      }
    } else {
      std::cerr << "{\"error\": \"unknown stage '" << stage << "'\"}\n";
      return kConfigError;
    }
  } catch (const UpstreamError& e) {
    std::cerr << "{\"error\": \"" << e.what() << "\", \"stage\": \"" << stage << "\"}\n";
    return kUpstreamError;
  } catch (const config::ConfigError& e) {
    std::cerr << "{\"error\": \"" << e.what() << "\", \"stage\": \"" << stage << "\"}\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\": \"" << e.what() << "\", \"stage\": \"" << stage << "\"}\n";
    return kStageError;
  }
  return kOk;
}

}  // namespace pdectrl::stages
