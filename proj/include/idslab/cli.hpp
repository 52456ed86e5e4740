#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "idslab/config.hpp"

namespace idslab::cli {

enum ExitCode : int {
  kOk = 0,
  kRunFailed = 1,  // partial results were written
  kUsage = 2,
  kWarning = 3,    // finished, but produced nothing useful (e.g. empty logs)
};

// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::size_t> budget;
  std::optional<double> rate;
  std::optional<std::string> tau;  // integer or "inf"
  std::optional<std::string> replay;
  std::optional<bool> normalize_class_count;
  std::optional<bool> deferred_merge;

  void apply(ExperimentConfig& config) const;
};

// Writes the pool to `out` and the validation/test splits next to it as
// <stem>.validation<ext> and <stem>.test<ext>.
int cmd_generate(const std::filesystem::path& spec_file, const std::filesystem::path& out,
                 std::optional<std::uint64_t> seed = std::nullopt);

int cmd_run(const std::filesystem::path& config_file, const std::filesystem::path& out_dir,
            const Overrides& overrides = {});

// Grid over methods x budgets x rates x seeds; one sub-directory per run plus
// summary.csv with per-cell mean and standard deviation across seeds.
int cmd_sweep(const std::filesystem::path& config_file, const std::filesystem::path& out_dir, std::size_t jobs,
              const Overrides& overrides = {});

struct AnalyzeOptions {
  std::string which;  // overlap | traces | rankcorr | usage | noise
  std::filesystem::path results_dir;
  std::optional<std::filesystem::path> out_dir;  // defaults to <results>/analysis
  std::size_t window = 500;
  std::size_t probe_size = 1000;
};

int cmd_analyze(const AnalyzeOptions& options);

// Full command-line entry point.
int main_entry(int argc, char** argv);

}  // namespace idslab::cli
