#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pidon/dataset.hpp"
#include "pidon/evaluation.hpp"
#include "pidon/operator_model.hpp"
#include "pidon/training.hpp"

namespace pidon::cli {

inline constexpr int kConfigFormatVersion = 1;

/// Invalid configuration file or flag; the message names the offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::uint64_t seed{0};
  unsigned threads{0};  ///< 0: available hardware threads
  DomainSpec domain{};
  ModelSpec model{};
  TrainConfig train{};
  BenchOptions bench{};

  /// Copies the shared seed and sensor count into the sections that use them.
  void propagate();
  /// Validates every section; throws ConfigError naming the key.
  void validate() const;
  unsigned worker_threads() const;
};

/// One documented configuration key.
struct ConfigKey {
  std::string key;  ///< dotted path, e.g. "train.lr"
  std::string doc;
  nlohmann::json default_value;
};

/// Every accepted key with its default.
std::vector<ConfigKey> config_reference();

/// Applies a JSON document to the defaults. Keys are dotted paths into
/// nested objects; unknown keys and a missing or wrong format_version are
/// rejected with ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved configuration in the file schema.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace pidon::cli
