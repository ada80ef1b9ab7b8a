#include "pdectrl/config.hpp"

#include <set>

#include "pdectrl/spectral.hpp"

namespace pdectrl::config {

namespace {

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (allowed.find(key) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  require_keys(j, "config",
               {"scenario", "seed", "spectral", "box", "u_max", "mpc", "train", "verify",
                "sim"});
  ExperimentConfig cfg;
  cfg.scenario = get_or<std::string>(j, "scenario", cfg.scenario);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.u_max = get_or<double>(j, "u_max", cfg.u_max);
  if (cfg.u_max <= 0.0) throw ConfigError("u_max must be positive");

  if (j.contains("spectral")) {
    const json& s = j.at("spectral");
    require_keys(s, "spectral", {"q_c", "delta", "n0", "extra_stable_modes", "N_tail"});
    cfg.spectral.q_c = get_or<double>(s, "q_c", cfg.spectral.q_c);
    cfg.spectral.delta = get_or<double>(s, "delta", cfg.spectral.delta);
    if (s.contains("n0")) {
      if (s.at("n0").is_string()) {
        if (s.at("n0").get<std::string>() != "auto")
          throw ConfigError("spectral.n0 must be \"auto\" or an integer");
        cfg.spectral.n0 = -1;
      } else {
        cfg.spectral.n0 = s.at("n0").get<int>();
        if (cfg.spectral.n0 < 0) throw ConfigError("spectral.n0 must be >= 0");
      }
    }
    cfg.spectral.extra_stable_modes = get_or<int>(s, "extra_stable_modes", 0);
    cfg.spectral.N_tail = get_or<int>(s, "N_tail", cfg.spectral.N_tail);
    if (cfg.spectral.delta <= 0.0) throw ConfigError("spectral.delta must be positive");
    if (cfg.spectral.N_tail < 0) throw ConfigError("spectral.N_tail must be >= 0");
  }

  if (!j.contains("box")) throw ConfigError("missing 'box' section");
  require_keys(j.at("box"), "box", {"s"});
  {
    const auto vals = j.at("box").at("s").get<std::vector<double>>();
    cfg.box_s = Eigen::VectorXd(static_cast<int>(vals.size()));
    for (size_t i = 0; i < vals.size(); ++i) {
      if (vals[i] <= 0.0) throw ConfigError("box.s entries must be positive");
      cfg.box_s(static_cast<int>(i)) = vals[i];
    }
  }

  if (j.contains("mpc")) {
    const json& m = j.at("mpc");
    require_keys(m, "mpc",
                 {"horizon", "dt", "q_weight", "r_weight", "grid_points", "timing_horizon"});
    cfg.mpc.horizon = get_or<int>(m, "horizon", cfg.mpc.horizon);
    cfg.mpc.dt = get_or<double>(m, "dt", cfg.mpc.dt);
    cfg.mpc.q_weight = get_or<double>(m, "q_weight", cfg.mpc.q_weight);
    cfg.mpc.r_weight = get_or<double>(m, "r_weight", cfg.mpc.r_weight);
    cfg.mpc.grid_points = get_or<int>(m, "grid_points", cfg.mpc.grid_points);
    cfg.mpc.timing_horizon = get_or<int>(m, "timing_horizon", cfg.mpc.timing_horizon);
    if (cfg.mpc.horizon < 1) throw ConfigError("mpc.horizon must be >= 1");
    if (cfg.mpc.dt <= 0.0) throw ConfigError("mpc.dt must be positive");
    if (cfg.mpc.grid_points < 1) throw ConfigError("mpc.grid_points must be >= 1");
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    require_keys(t, "train",
                 {"eta1", "eta2", "rho", "gamma", "tau", "epochs", "pretrain_epochs", "k_max",
                  "step_size", "pretrain_step", "tol_c", "tol_o", "hidden"});
    cfg.train.eta1 = get_or<double>(t, "eta1", cfg.train.eta1);
    cfg.train.eta2 = get_or<double>(t, "eta2", cfg.train.eta2);
    cfg.train.rho = get_or<double>(t, "rho", cfg.train.rho);
    cfg.train.gamma = get_or<double>(t, "gamma", cfg.train.gamma);
    cfg.train.tau = get_or<double>(t, "tau", cfg.train.tau);
    cfg.train.epochs = get_or<int>(t, "epochs", cfg.train.epochs);
    cfg.train.pretrain_epochs = get_or<int>(t, "pretrain_epochs", cfg.train.pretrain_epochs);
    cfg.train.k_max = get_or<int>(t, "k_max", cfg.train.k_max);
    cfg.train.step_size = get_or<double>(t, "step_size", cfg.train.step_size);
    cfg.train.pretrain_step = get_or<double>(t, "pretrain_step", cfg.train.pretrain_step);
    cfg.train.tol_c = get_or<double>(t, "tol_c", cfg.train.tol_c);
    cfg.train.tol_o = get_or<double>(t, "tol_o", cfg.train.tol_o);
    cfg.train.hidden = get_or<std::vector<int>>(t, "hidden", cfg.train.hidden);
    if (cfg.train.tau <= 0.0 || cfg.train.tau >= 1.0)
      throw ConfigError("train.tau must lie in (0, 1)");
    if (cfg.train.rho <= 0.0) throw ConfigError("train.rho must be positive");
    if (cfg.train.hidden.empty()) throw ConfigError("train.hidden must be nonempty");
  }

  if (j.contains("verify")) {
    const json& v = j.at("verify");
    require_keys(v, "verify", {"spillover", "decay_factor", "coupling", "gamma_line_search"});
    cfg.verify.spillover = get_or<std::string>(v, "spillover", cfg.verify.spillover);
    cfg.verify.decay_factor = get_or<std::string>(v, "decay_factor", cfg.verify.decay_factor);
    cfg.verify.coupling = get_or<std::string>(v, "coupling", cfg.verify.coupling);
    cfg.verify.gamma_line_search =
        get_or<bool>(v, "gamma_line_search", cfg.verify.gamma_line_search);
    if (cfg.verify.spillover != "b_residual" && cfg.verify.spillover != "beta_window")
      throw ConfigError("verify.spillover must be b_residual or beta_window");
    if (cfg.verify.decay_factor != "delta" && cfg.verify.decay_factor != "two_delta")
      throw ConfigError("verify.decay_factor must be delta or two_delta");
    if (cfg.verify.coupling != "full" && cfg.verify.coupling != "row")
      throw ConfigError("verify.coupling must be full or row");
  }

  if (j.contains("sim")) {
    const json& s = j.at("sim");
    require_keys(s, "sim", {"N_sim", "h", "T", "roa_samples", "field_points"});
    cfg.sim.N_sim = get_or<int>(s, "N_sim", cfg.sim.N_sim);
    cfg.sim.h = get_or<double>(s, "h", cfg.sim.h);
    cfg.sim.T = get_or<double>(s, "T", cfg.sim.T);
    cfg.sim.roa_samples = get_or<int>(s, "roa_samples", cfg.sim.roa_samples);
    cfg.sim.field_points = get_or<int>(s, "field_points", cfg.sim.field_points);
    if (cfg.sim.h <= 0.0 || cfg.sim.T <= 0.0) throw ConfigError("sim.h and sim.T positive");
  }

  return cfg;
}

int resolve_n0(const ExperimentConfig& cfg) {
  int n0 = cfg.spectral.n0 >= 0 ? cfg.spectral.n0
                                : spectral::mode_split(cfg.spectral.q_c, cfg.spectral.delta);
  n0 += cfg.spectral.extra_stable_modes;
  if (cfg.box_s.size() != n0)
    throw ConfigError("box.s must have one bound per retained mode (n0 = " +
                      std::to_string(n0) + ", got " + std::to_string(cfg.box_s.size()) + ")");
  return n0;
}

}  // namespace pdectrl::config
