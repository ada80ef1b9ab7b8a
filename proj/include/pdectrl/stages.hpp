#pragma once

#include <filesystem>
#include <string>

#include "pdectrl/config.hpp"

namespace pdectrl::stages {

// Exit codes shared with the CLI.
inline constexpr int kOk = 0;
inline constexpr int kStageError = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kUpstreamError = 3;

class UpstreamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StageContext {
  config::ExperimentConfig cfg;
  config::json cfg_json;  // canonical config, hashed into every artifact
  std::filesystem::path out;

  std::string config_hash() const;
};

void cmd_model(const StageContext& ctx);
void cmd_dataset(const StageContext& ctx);
void cmd_train(const StageContext& ctx);
void cmd_certify(const StageContext& ctx);
void cmd_simulate(const StageContext& ctx);
void cmd_report(const StageContext& ctx);

// Dispatches one stage name or "all"; returns an exit code and prints
// structured errors to stderr.
int run_stage(const std::string& stage, const StageContext& ctx);

}  // namespace pdectrl::stages
