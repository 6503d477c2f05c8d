#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "pidon/operator_model.hpp"

namespace pidon {

inline constexpr int kModelFormatVersion = 1;

/// JSON document of a model: architecture, networks (f64 arrays as base64 of
/// little-endian bytes), normalization statistics and a CRC-32C of the
/// canonical "model" object.
nlohmann::json model_to_json(const OperatorModel& model);
/// Throws VersionMismatch (format or architecture) or CorruptModel.
OperatorModel model_from_json(const nlohmann::json& doc, std::optional<Arch> expected = std::nullopt);

void save_model(const OperatorModel& model, const std::filesystem::path& path);
/// Throws IoError when the file cannot be read, otherwise as model_from_json.
OperatorModel load_model(const std::filesystem::path& path, std::optional<Arch> expected = std::nullopt);

}  // namespace pidon
