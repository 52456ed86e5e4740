#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idslab/harness.hpp"
#include "idslab/stream.hpp"

namespace idslab {

// Embeddings from disk. Without explicit validation/test files the pool file is
// split with `fractions`.
struct EmbeddingSourceConfig {
  std::filesystem::path path;
  std::optional<std::filesystem::path> validation_path;
  std::optional<std::filesystem::path> test_path;
  SplitFractions fractions;
  std::uint64_t split_seed = 0;
};

struct SourceConfig {
  std::optional<SyntheticSourceSpec> synthetic;
  std::optional<EmbeddingSourceConfig> embeddings;
};

struct SweepAxes {
  std::vector<Method> methods;
  std::vector<std::size_t> budgets;
  std::vector<double> rates;
  std::vector<std::uint64_t> seeds;
};

struct ExperimentConfig {
  SourceConfig source;
  IDSConfig ids;
  SweepAxes sweep;
};

// Relative embedding paths are resolved against `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

SyntheticSourceSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json synthetic_spec_to_json(const SyntheticSourceSpec& spec);

ExperimentData load_data(const SourceConfig& source);

}  // namespace idslab
