#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "pdectrl/artifacts.hpp"
#include "pdectrl/config.hpp"
#include "pdectrl/stages.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Certified neural boundary control for a reaction-diffusion plant"};

  std::string config_path;
  std::string out_dir = ".";
  std::string stage = "all";
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "experiment config JSON")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--stage", stage, "model|dataset|train|certify|simulate|report|all");
  app.add_option("--seed", seed, "override the config seed");

  CLI11_PARSE(app, argc, argv);

  pdectrl::stages::StageContext ctx;
  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "{\"error\": \"cannot open config " << config_path << "\"}\n";
      return pdectrl::stages::kConfigError;
    }
    ctx.cfg_json = pdectrl::config::json::parse(in);
    if (seed) ctx.cfg_json["seed"] = *seed;
    ctx.cfg = pdectrl::config::parse_config(ctx.cfg_json);
  } catch (const std::exception& e) {
    std::cerr << "{\"error\": \"" << e.what() << "\"}\n";
    return pdectrl::stages::kConfigError;
  }
  ctx.out = out_dir;

  return pdectrl::stages::run_stage(stage, ctx);
}
