#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace pidon::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kTrainingError = 3, kIoError = 4 };

/// Writes train/, val/, test/, colloc/ and manifest.json under `out`.
void cmd_generate(const RunConfig& cfg, const std::filesystem::path& out);

/// Trains on the datasets of `data` (as written by cmd_generate) and writes
/// model.json, report.json and loss.csv under `out`.
void cmd_train(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& out);

/// Model argument "name=path[,path...]" (one path per seed) or "path"; the
/// path "solver" replays the integrator.
struct ModelArg {
  std::string name;
  std::vector<std::string> paths;
};
ModelArg parse_model_arg(const std::string& arg);

/// table2.csv, accuracy_curve.csv (first model) and eval.json under `out`.
void cmd_eval(const RunConfig& cfg, const std::vector<ModelArg>& models, const std::filesystem::path& data,
              const std::filesystem::path& out);

/// table3.csv and bench.json under `out`.
void cmd_bench(const RunConfig& cfg, const std::vector<ModelArg>& models, const std::filesystem::path& data,
               const std::filesystem::path& out);

/// Full command line; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace pidon::cli
