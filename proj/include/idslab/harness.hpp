#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "idslab/model.hpp"
#include "idslab/scoring.hpp"
#include "idslab/selection.hpp"
#include "idslab/stream.hpp"

namespace idslab {

enum class ReplaySampling { Uniform, CountInverse };

std::string_view to_string(ReplaySampling mode);
ReplaySampling parse_replay_sampling(std::string_view name);

struct IDSConfig {
  std::size_t budget = 1000;        // k
  std::size_t initial_size = 100;   // m
  std::size_t batch_size = 32;      // b
  std::optional<std::size_t> delta; // per-update acceptance quota; auto_delta when empty
  std::size_t total_updates = 200;  // u, across all three phases
  // Updates on T_0 before selection; defaults to half of what selection leaves.
  std::optional<std::size_t> init_updates;
  double lr = 0.05;
  double final_lr_decay = 1.0;
  double rate = 20.0;                          // p, percent
  std::size_t refresh_period = 20;             // tau in model updates; kNeverRefresh disables
  Method method = Method::Peaks;
  // Divide scores by the selected count of their class. Defaults to on for
  // the kernel-anchored scores (peaks, peaks_v, exact_delta), off otherwise.
  std::optional<bool> normalize_class_count;
  PrototypeSource prototype_source = PrototypeSource::ReadoutWeights;
  ReplaySampling replay = ReplaySampling::Uniform;
  bool deferred_merge = false;
  std::size_t candidate_batch_size = 1;
  std::optional<std::size_t> eval_every;  // defaults to tau (20 when refresh is off)
  InitKind init = InitKind::Zero;
  // Consecutive rejections tolerated before the run is declared stalled;
  // 0 means 10x the pool size.
  std::size_t stall_limit = 0;
  std::uint64_t seed = 0;

  std::size_t resolved_delta() const;
  std::size_t selection_updates() const;
  std::size_t resolved_init_updates() const;
  std::size_t finetune_updates() const;
  bool resolved_normalize() const;
  std::size_t resolved_eval_every() const;
  // Throws ConfigError.
  void validate() const;
};

// ceil((k - m) / (u / 2)), so selecting k - m examples takes about half of u.
std::size_t auto_delta(std::size_t budget, std::size_t initial_size, std::size_t total_updates);

struct CandidateRecord {
  std::size_t step = 0;  // selection-phase updates done when the candidate was seen
  ExampleId id = 0;
  double score = 0.0;     // after class-count normalization, as ranked
  double percentile = 0.0;
  bool accepted = false;
};

struct AccuracyPoint {
  std::size_t update = 0;
  std::string split;
  double accuracy = 0.0;
};

struct SelectedRecord {
  ExampleId id = 0;
  std::size_t step = 0;
  bool initial = false;
};

struct RunResult {
  IDSConfig config;
  bool completed = false;
  std::string error;
  std::size_t delta = 0;
  std::size_t init_updates = 0;
  std::size_t selection_updates = 0;
  std::size_t finetune_updates = 0;
  std::size_t refresh_count = 0;
  double final_test_accuracy = 0.0;
  std::optional<double> final_validation_accuracy;
  std::vector<AccuracyPoint> accuracy_curve;
  std::vector<SelectedRecord> selected;  // T_end in selection order
  std::vector<CandidateRecord> candidates;
  std::vector<std::pair<ExampleId, std::size_t>> usage;  // selection-phase usage, sorted by id
  std::vector<std::size_t> class_counts;
  std::optional<LinearSoftmaxModel> initial_model;  // after phase 1
  std::optional<LinearSoftmaxModel> final_model;

  IdSet initial_ids() const;
  IdSet selected_ids() const;
  // T_end \ T_0
  IdSet new_ids() const;
  // Distinct candidate ids from the log.
  IdSet seen_ids() const;
  std::vector<double> usage_values() const;
};

// Thrown when the pool runs out (or stops yielding acceptances) before the
// budget is reached. Carries everything logged up to that point.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& message, RunResult partial)
      : std::runtime_error(message), partial_(std::move(partial)) {}
  const RunResult& partial() const { return partial_; }

 private:
  RunResult partial_;
};

// Sampling weights (1/c_i) / sum_j (1/c_j); zero counts are treated as 1.
std::vector<double> replay_probabilities(std::span<const std::size_t> usage_counts);

// New examples plus b - |fresh| replay draws from `replay_pool` (pool
// indices). Bumps the usage count of every example in the batch.
std::vector<std::size_t> form_batch(std::span<const std::size_t> fresh, std::span<const std::size_t> replay_pool,
                                    ReplaySampling mode, std::size_t batch_size, std::mt19937_64& rng,
                                    const Dataset& pool, SelectionCounts& counts);

struct RunState {
  LinearSoftmaxModel model;
  ExclusionSampler sampler;
  std::vector<std::size_t> selected;  // T_t as pool indices
  std::vector<std::size_t> deferred;  // accepted, waiting for the next refresh
  SelectionCounts counts;
  ScoreCache cache;
  std::optional<ClassPrototypes> prototypes;
  std::size_t step = 0;          // selection-phase updates
  std::size_t updates_done = 0;  // all phases
  std::size_t next_eval = 0;
  std::mt19937_64 init_batch_rng;
  std::mt19937_64 candidate_rng;
  std::mt19937_64 replay_rng;
  std::mt19937_64 score_rng;
  std::mt19937_64 finetune_rng;
  RunResult result;

  std::size_t selected_count() const { return selected.size() + deferred.size(); }
};

// Draws T_0 and trains on it for the initial updates.
RunState phase_initialize(const IDSConfig& config, const ExperimentData& data);
// Grows T to the budget, one model update per delta acceptances.
void phase_select(RunState& state, const ExperimentData& data, const IDSConfig& config);
// Spends the remaining updates on uniform batches from T_end.
void phase_finetune(RunState& state, const ExperimentData& data, const IDSConfig& config);

// All three phases. Deterministic for a fixed (config, data).
RunResult run(const IDSConfig& config, const ExperimentData& data);

}  // namespace idslab
