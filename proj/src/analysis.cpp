#include "idslab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "idslab/errors.hpp"
#include "idslab/random.hpp"

namespace idslab {

OverlapReport overlap_matrix(const std::vector<const RunResult*>& results, std::vector<std::string> names) {
  const std::size_t n = results.size();
  if (names.empty()) {
    for (std::size_t i = 0; i < n; ++i) names.push_back("run" + std::to_string(i));
  }
  if (names.size() != n) throw std::invalid_argument("overlap_matrix: one name per run required");

  std::vector<IdSet> chosen(n), seen(n);
  OverlapReport report;
  report.names = std::move(names);
  for (std::size_t i = 0; i < n; ++i) {
    chosen[i] = results[i]->new_ids();
    seen[i] = results[i]->seen_ids();
    report.final_accuracy.push_back(results[i]->final_test_accuracy);
  }
  report.selected.assign(n, std::vector<double>(n, 1.0));
  report.seen.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      report.selected[i][j] = report.selected[j][i] = jaccard(chosen[i], chosen[j]);
      report.seen[i][j] = report.seen[j][i] = jaccard(seen[i], seen[j]);
    }
  }
  return report;
}

std::vector<double> score_trace(const std::vector<CandidateRecord>& log, std::size_t window) {
  if (log.empty()) return {};
  std::vector<double> scores;
  scores.reserve(log.size());
  for (const auto& c : log) scores.push_back(c.score);
  auto trace = rolling_mean(scores, window);
  const double peak = *std::max_element(trace.begin(), trace.end());
  if (!(peak > 0.0)) throw std::domain_error("score_trace: maximum rolling mean is not positive");
  for (auto& v : trace) v /= peak;
  return trace;
}

std::vector<double> acceptance_rate_series(const std::vector<CandidateRecord>& log, std::size_t window) {
  std::vector<double> accepted;
  accepted.reserve(log.size());
  for (const auto& c : log) accepted.push_back(c.accepted ? 1.0 : 0.0);
  return rolling_mean(accepted, window);
}

double tail_acceptance_rate(const std::vector<CandidateRecord>& log, double fraction) {
  if (log.empty()) throw std::invalid_argument("tail_acceptance_rate: empty log");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("tail_acceptance_rate: fraction in (0,1]");
  const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(log.size()))));
  const auto begin = log.end() - static_cast<std::ptrdiff_t>(tail);
  const auto hits = std::count_if(begin, log.end(), [](const CandidateRecord& c) { return c.accepted; });
  return static_cast<double>(hits) / static_cast<double>(tail);
}

Dataset sample_probe_pool(const Dataset& pool, const IdSet& exclude, std::size_t size, std::uint64_t seed) {
  ExclusionSampler sampler(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (exclude.contains(pool.examples[i].id)) sampler.exclude(i);
  }
  auto rng = make_rng(seed, Stream::Probe);
  Dataset out{pool.num_classes, pool.feature_dim, {}};
  for (std::size_t index : sampler.draw_distinct(size, rng)) out.examples.push_back(pool.examples[index]);
  return out;
}

RankCorrelationReport rank_correlation_experiment(const LinearSoftmaxModel& model, const Dataset& pool,
                                                  const ClassPrototypes& prototypes) {
  RankCorrelationReport report;
  report.scores.assign(kRankMethods, {});
  for (const auto& e : pool.examples) {
    report.scores[0].push_back(score_exact_delta(model, e.features, e.label, prototypes));
    report.scores[1].push_back(score_peaks_v(model, e.features, e.label, prototypes));
    report.scores[2].push_back(score_peaks(model, e.features, e.label));
  }
  report.spearman.assign(kRankMethods, std::vector<std::optional<double>>(kRankMethods));
  for (std::size_t i = 0; i < kRankMethods; ++i) {
    for (std::size_t j = 0; j < kRankMethods; ++j) {
      try {
        report.spearman[i][j] = spearman(report.scores[i], report.scores[j]);
      } catch (const UndefinedCorrelation&) {
        report.spearman[i][j] = std::nullopt;
      }
    }
  }
  return report;
}

UsageSummary usage_histogram(const std::vector<double>& counts) {
  UsageSummary out;
  if (counts.empty()) return out;
  for (double c : counts) {
    if (c < 0.0 || c != std::floor(c)) throw std::invalid_argument("usage_histogram: counts must be whole numbers");
    ++out.histogram[static_cast<std::size_t>(c)];
  }
  const double n = static_cast<double>(counts.size());
  out.mean = std::accumulate(counts.begin(), counts.end(), 0.0) / n;
  double ss = 0.0;
  for (double c : counts) ss += (c - out.mean) * (c - out.mean);
  out.variance = ss / n;
  out.stddev = std::sqrt(out.variance);
  return out;
}

std::optional<double> noise_audit(const IdSet& selected, const Dataset& dataset) {
  std::size_t known = 0, noisy = 0;
  for (const auto& e : dataset.examples) {
    if (!selected.contains(e.id) || !e.clean_label) continue;
    ++known;
    if (e.label != *e.clean_label) ++noisy;
  }
  if (known == 0) return std::nullopt;
  return static_cast<double>(noisy) / static_cast<double>(known);
}

}  // namespace idslab
