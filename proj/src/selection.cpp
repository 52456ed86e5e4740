#include "idslab/selection.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "idslab/errors.hpp"

namespace idslab {

ScoreCache::ScoreCache(std::size_t refresh_period) : refresh_period_(refresh_period) {
  if (refresh_period_ == 0) throw std::invalid_argument("refresh period must be >= 1");
}

bool ScoreCache::on_model_update() {
  ++updates_since_refresh_;
  if (updates_since_refresh_ < refresh_period_) return false;
  scores_.clear();
  updates_since_refresh_ = 0;
  ++refresh_count_;
  return true;
}

Band band_for(Method method) {
  switch (method) {
    case Method::HardEmb: return Band::Bottom;
    case Method::ModerateEmb: return Band::Middle;
    default: return Band::Top;
  }
}

void SelectionPolicy::validate() const {
  if (!(rate > 0.0 && rate <= 100.0)) throw ConfigError("selection rate must be in (0, 100]");
}

bool accepts(double percentile, Band band, double rate) {
  switch (band) {
    case Band::Top: return percentile >= 100.0 - rate;
    case Band::Bottom: return percentile <= rate;
    case Band::Middle: return percentile >= 50.0 - rate / 2.0 && percentile <= 50.0 + rate / 2.0;
  }
  return false;
}

Decision decide(double score, ScoreCache& cache, const SelectionPolicy& policy) {
  if (!std::isfinite(score)) throw std::invalid_argument("decide: non-finite score");
  Decision d;
  d.percentile = percentile_rank(score, cache.scores());
  d.accepted = accepts(d.percentile, band_for(policy.method), policy.rate);
  cache.append(score);
  return d;
}

void SelectionCounts::class_count_increment(ClassIndex label) { ++class_counts_.at(label); }

void SelectionCounts::usage_count_increment(ExampleId id) { ++usage_[id]; }

std::size_t SelectionCounts::usage_count(ExampleId id) const {
  const auto it = usage_.find(id);
  return it == usage_.end() ? 0 : it->second;
}

std::size_t SelectionCounts::total_selected() const {
  return std::accumulate(class_counts_.begin(), class_counts_.end(), std::size_t{0});
}

}  // namespace idslab
