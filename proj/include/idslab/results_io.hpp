#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "idslab/harness.hpp"

namespace idslab {

// Shortest round-trip decimal form; identical bytes for identical doubles.
std::string format_double(double value);

nlohmann::json ids_config_to_json(const IDSConfig& config);
// Rejects unknown keys and wrong types with ConfigError. Missing keys keep
// their defaults.
IDSConfig ids_config_from_json(const nlohmann::json& j);

// Writes result.json, selected.csv, candidates.csv, accuracy.csv, usage.csv
// and the model checkpoints (init_model.pkwt, model.pkwt) into `dir`.
// `extra_metrics` is merged into result.json under "metrics".
void write_run(const RunResult& result, const std::filesystem::path& dir,
               const nlohmann::json& extra_metrics = nlohmann::json::object());

// Reads back what write_run produced.
RunResult read_run(const std::filesystem::path& dir);

}  // namespace idslab
