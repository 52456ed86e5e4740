#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idslab/harness.hpp"
#include "idslab/model.hpp"
#include "idslab/scoring.hpp"
#include "idslab/stream.hpp"

namespace idslab {

using SquareMatrix = std::vector<std::vector<double>>;

struct OverlapReport {
  std::vector<std::string> names;
  SquareMatrix selected;  // Jaccard over T_end \ T_0
  SquareMatrix seen;      // Jaccard over distinct candidate ids
  std::vector<double> final_accuracy;
};

// `names` labels the runs; empty means "run0", "run1", ...
OverlapReport overlap_matrix(const std::vector<const RunResult*>& results, std::vector<std::string> names = {});

// Rolling mean of the logged scores divided by its maximum. Empty log gives an
// empty trace. Throws std::domain_error when the maximum rolling mean is not
// positive, since the scaling is then meaningless.
std::vector<double> score_trace(const std::vector<CandidateRecord>& log, std::size_t window = 500);

// Rolling fraction of accepted candidates.
std::vector<double> acceptance_rate_series(const std::vector<CandidateRecord>& log, std::size_t window);

// Acceptance fraction over the last `fraction` of the candidate log.
double tail_acceptance_rate(const std::vector<CandidateRecord>& log, double fraction = 0.25);

inline constexpr std::size_t kRankMethods = 3;  // exact_delta, peaks_v, peaks

struct RankCorrelationReport {
  std::vector<std::string> methods{"exact_delta", "peaks_v", "peaks"};
  std::vector<std::vector<double>> scores;                   // per method, per pool example
  std::vector<std::vector<std::optional<double>>> spearman;  // nullopt where undefined
};

// `size` uniformly drawn pool examples outside `exclude` (fewer if the pool is
// smaller), in draw order.
Dataset sample_probe_pool(const Dataset& pool, const IdSet& exclude, std::size_t size, std::uint64_t seed);

// Scores every pool example under the exact kernel score, PEAKS-V and PEAKS
// and reports pairwise Spearman correlations.
RankCorrelationReport rank_correlation_experiment(const LinearSoftmaxModel& model, const Dataset& pool,
                                                  const ClassPrototypes& prototypes);

struct UsageSummary {
  std::map<std::size_t, std::size_t> histogram;  // usage count -> number of examples
  double mean = 0.0;
  double variance = 0.0;  // population variance
  double stddev = 0.0;
};

UsageSummary usage_histogram(const std::vector<double>& counts);

// Fraction of selected ids whose label differs from the clean label, over ids
// with a known clean label; nullopt when none is known.
std::optional<double> noise_audit(const IdSet& selected, const Dataset& dataset);

}  // namespace idslab
