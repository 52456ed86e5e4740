#pragma once

#include <cstddef>
#include <limits>
#include <unordered_map>
#include <vector>

#include "idslab/model.hpp"
#include "idslab/numerics.hpp"
#include "idslab/scoring.hpp"

namespace idslab {

inline constexpr std::size_t kNeverRefresh = std::numeric_limits<std::size_t>::max();

// Scores of candidates seen since the last refresh, accepted or not. Cleared
// every `refresh_period` model updates.
class ScoreCache {
 public:
  explicit ScoreCache(std::size_t refresh_period = kNeverRefresh);

  std::span<const double> scores() const { return scores_; }
  std::size_t refresh_period() const { return refresh_period_; }
  std::size_t updates_since_refresh() const { return updates_since_refresh_; }
  std::size_t refresh_count() const { return refresh_count_; }

  void append(double score) { scores_.push_back(score); }

  // Count one model update; returns true when this update triggered a refresh.
  bool on_model_update();

 private:
  std::vector<double> scores_;
  std::size_t refresh_period_;
  std::size_t updates_since_refresh_ = 0;
  std::size_t refresh_count_ = 0;
};

// Which part of the percentile range a method accepts.
enum class Band { Top, Bottom, Middle };

Band band_for(Method method);

struct SelectionPolicy {
  Method method = Method::Peaks;
  double rate = 20.0;  // percent in (0, 100]

  void validate() const;
};

struct Decision {
  bool accepted = false;
  double percentile = 0.0;
};

// Acceptance test on a percentile already computed.
bool accepts(double percentile, Band band, double rate);

// Ranks `score` against the cache as it stands, then appends it.
Decision decide(double score, ScoreCache& cache, const SelectionPolicy& policy);

// c_y(t) per class and c_i(t) per example.
class SelectionCounts {
 public:
  explicit SelectionCounts(std::size_t num_classes = 0) : class_counts_(num_classes, 0) {}

  void class_count_increment(ClassIndex label);
  void usage_count_increment(ExampleId id);
  // Makes `id` known with a zero usage count if it is not tracked yet.
  void track(ExampleId id) { usage_.try_emplace(id, 0); }

  std::size_t class_count(ClassIndex label) const { return class_counts_.at(label); }
  std::size_t usage_count(ExampleId id) const;
  const std::vector<std::size_t>& class_counts() const { return class_counts_; }
  const std::unordered_map<ExampleId, std::size_t>& usage_counts() const { return usage_; }
  std::size_t total_selected() const;

 private:
  std::vector<std::size_t> class_counts_;
  std::unordered_map<ExampleId, std::size_t> usage_;
};

}  // namespace idslab
