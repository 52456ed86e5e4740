#include "idslab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "idslab/errors.hpp"
#include "idslab/random.hpp"

namespace idslab {

std::string_view to_string(ReplaySampling mode) {
  return mode == ReplaySampling::Uniform ? "uniform" : "count_inverse";
}

ReplaySampling parse_replay_sampling(std::string_view name) {
  if (name == "uniform") return ReplaySampling::Uniform;
  if (name == "count_inverse" || name == "count-inverse") return ReplaySampling::CountInverse;
  throw ConfigError("unknown replay sampling '" + std::string(name) + "'");
}

std::size_t auto_delta(std::size_t budget, std::size_t initial_size, std::size_t total_updates) {
  if (budget <= initial_size) throw ConfigError("auto_delta: budget must exceed the initial size");
  const std::size_t half = total_updates / 2;
  if (half == 0) throw ConfigError("auto_delta: need at least two total updates");
  const std::size_t to_select = budget - initial_size;
  return (to_select + half - 1) / half;
}

std::size_t IDSConfig::resolved_delta() const {
  return delta ? *delta : auto_delta(budget, initial_size, total_updates);
}

std::size_t IDSConfig::selection_updates() const {
  const std::size_t d = resolved_delta();
  return (budget - initial_size + d - 1) / d;
}

std::size_t IDSConfig::resolved_init_updates() const {
  if (init_updates) return *init_updates;
  const std::size_t sel = selection_updates();
  return sel >= total_updates ? 0 : (total_updates - sel) / 2;
}

std::size_t IDSConfig::finetune_updates() const {
  return total_updates - resolved_init_updates() - selection_updates();
}

bool IDSConfig::resolved_normalize() const {
  if (normalize_class_count) return *normalize_class_count;
  return method == Method::Peaks || method == Method::PeaksV || method == Method::ExactDelta;
}

std::size_t IDSConfig::resolved_eval_every() const {
  if (eval_every) return *eval_every;
  return refresh_period == kNeverRefresh ? 20 : refresh_period;
}

void IDSConfig::validate() const {
  if (initial_size == 0) throw ConfigError("initial_size must be >= 1");
  if (budget <= initial_size) throw ConfigError("budget must exceed initial_size");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (delta && *delta == 0) throw ConfigError("delta must be >= 1");
  const std::size_t d = delta ? *delta : auto_delta(budget, initial_size, total_updates);
  if (d > batch_size) throw ConfigError("delta must not exceed batch_size");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(final_lr_decay > 0.0) || !std::isfinite(final_lr_decay)) throw ConfigError("final_lr_decay must be positive");
  if (!(rate > 0.0 && rate <= 100.0)) throw ConfigError("rate must be in (0, 100]");
  if (refresh_period == 0) throw ConfigError("refresh_period must be >= 1");
  if (candidate_batch_size == 0) throw ConfigError("candidate_batch_size must be >= 1");
  if (eval_every && *eval_every == 0) throw ConfigError("eval_every must be >= 1");
  const std::size_t sel = (budget - initial_size + d - 1) / d;
  const std::size_t init = init_updates ? *init_updates : (sel >= total_updates ? 0 : (total_updates - sel) / 2);
  if (init + sel > total_updates)
    throw ConfigError("total_updates (" + std::to_string(total_updates) + ") is below init_updates + selection updates (" +
                      std::to_string(init + sel) + ")");
}

IdSet RunResult::initial_ids() const {
  IdSet out;
  for (const auto& s : selected)
    if (s.initial) out.insert(s.id);
  return out;
}

IdSet RunResult::selected_ids() const {
  IdSet out;
  for (const auto& s : selected) out.insert(s.id);
  return out;
}

IdSet RunResult::new_ids() const {
  IdSet out;
  for (const auto& s : selected)
    if (!s.initial) out.insert(s.id);
  return out;
}

IdSet RunResult::seen_ids() const {
  IdSet out;
  for (const auto& c : candidates) out.insert(c.id);
  return out;
}

std::vector<double> RunResult::usage_values() const {
  std::vector<double> out;
  out.reserve(usage.size());
  for (const auto& [id, count] : usage) out.push_back(static_cast<double>(count));
  return out;
}

std::vector<double> replay_probabilities(std::span<const std::size_t> usage_counts) {
  std::vector<double> weights(usage_counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < usage_counts.size(); ++i) {
    weights[i] = 1.0 / static_cast<double>(std::max<std::size_t>(usage_counts[i], 1));
    total += weights[i];
  }
  for (auto& w : weights) w /= total;
  return weights;
}

namespace {

// Uniform batch of `count` pool indices from `source`; distinct when possible.
void append_uniform(std::span<const std::size_t> source, std::size_t count, std::mt19937_64& rng,
                    std::vector<std::size_t>& out) {
  if (count == 0 || source.empty()) return;
  if (source.size() >= count) {
    std::vector<std::size_t> scratch(source.begin(), source.end());
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, scratch.size() - 1);
      std::swap(scratch[i], scratch[pick(rng)]);
      out.push_back(scratch[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, source.size() - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(source[pick(rng)]);
  }
}

std::size_t draw_weighted(std::span<const double> weights, double total, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, total);
  const double target = unit(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

void append_count_inverse(std::span<const std::size_t> source, std::size_t count, std::mt19937_64& rng,
                          const Dataset& pool, const SelectionCounts& counts, std::vector<std::size_t>& out) {
  if (count == 0 || source.empty()) return;
  std::vector<std::size_t> usage(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) usage[i] = counts.usage_count(pool.examples[source[i]].id);
  std::vector<double> weights = replay_probabilities(usage);
  const bool without_replacement = source.size() >= count;
  double total = 1.0;
  for (std::size_t drawn = 0; drawn < count; ++drawn) {
    const std::size_t i = draw_weighted(weights, total, rng);
    out.push_back(source[i]);
    if (without_replacement) {
      total -= weights[i];
      weights[i] = 0.0;
      if (total <= 0.0) {
        total = 0.0;
        for (double w : weights) total += w;
      }
    }
  }
}

}  // namespace

std::vector<std::size_t> form_batch(std::span<const std::size_t> fresh, std::span<const std::size_t> replay_pool,
                                    ReplaySampling mode, std::size_t batch_size, std::mt19937_64& rng,
                                    const Dataset& pool, SelectionCounts& counts) {
  std::vector<std::size_t> batch(fresh.begin(), fresh.end());
  const std::size_t replay = batch_size > fresh.size() ? batch_size - fresh.size() : 0;
  if (mode == ReplaySampling::Uniform) {
    append_uniform(replay_pool, replay, rng, batch);
  } else {
    append_count_inverse(replay_pool, replay, rng, pool, counts, batch);
  }
  for (std::size_t index : batch) counts.usage_count_increment(pool.examples[index].id);
  return batch;
}

namespace {

void sgd_on(LinearSoftmaxModel& model, const Dataset& pool, std::span<const std::size_t> batch, double lr) {
  std::vector<LabeledView> views;
  views.reserve(batch.size());
  for (std::size_t index : batch) views.push_back(pool.examples[index].view());
  model.sgd_batch_update(views, lr);
}

void evaluate(RunState& state, const ExperimentData& data) {
  if (!data.test.empty()) {
    const auto views = data.test.views();
    state.result.accuracy_curve.push_back({state.updates_done, "test", evaluate_accuracy(state.model, views)});
  }
  if (!data.validation.empty()) {
    const auto views = data.validation.views();
    state.result.accuracy_curve.push_back({state.updates_done, "validation", evaluate_accuracy(state.model, views)});
  }
}

void maybe_evaluate(RunState& state, const ExperimentData& data, const IDSConfig& config) {
  if (state.updates_done >= state.next_eval) {
    evaluate(state, data);
    state.next_eval = state.updates_done + config.resolved_eval_every();
  }
}

void record_selection(RunState& state, const Dataset& pool, std::size_t index, bool initial) {
  const Example& e = pool.examples[index];
  state.sampler.exclude(index);
  state.counts.class_count_increment(e.label);
  state.counts.track(e.id);
  state.result.selected.push_back({e.id, state.step, initial});
}

void merge_deferred(RunState& state) {
  state.selected.insert(state.selected.end(), state.deferred.begin(), state.deferred.end());
  state.deferred.clear();
}

void finalize_counts(RunState& state, const Dataset& pool) {
  RunResult& r = state.result;
  r.class_counts = state.counts.class_counts();
  r.refresh_count = state.cache.refresh_count();
  r.usage.clear();
  for (std::size_t index : state.selected) {
    const ExampleId id = pool.examples[index].id;
    r.usage.emplace_back(id, state.counts.usage_count(id));
  }
  for (std::size_t index : state.deferred) {
    const ExampleId id = pool.examples[index].id;
    r.usage.emplace_back(id, state.counts.usage_count(id));
  }
  std::sort(r.usage.begin(), r.usage.end());
}

[[noreturn]] void fail_run(RunState& state, const ExperimentData& data, const std::string& message) {
  finalize_counts(state, data.pool);
  state.result.completed = false;
  state.result.error = message;
  state.result.final_model = state.model;
  throw RunError(message, state.result);
}

}  // namespace

RunState phase_initialize(const IDSConfig& config, const ExperimentData& data) {
  config.validate();
  const Dataset& pool = data.pool;
  if (pool.size() < config.initial_size)
    throw ConfigError("pool has " + std::to_string(pool.size()) + " examples, fewer than initial_size");
  if (needs_validation(config.method, config.prototype_source) && data.validation.empty())
    throw ConfigError(std::string(to_string(config.method)) + " needs a validation set");

  RunState state{
      .model = init_model(pool.num_classes, pool.feature_dim, make_rng(config.seed, Stream::ModelInit)(), config.init),
      .sampler = ExclusionSampler(pool.size()),
      .selected = {},
      .deferred = {},
      .counts = SelectionCounts(pool.num_classes),
      .cache = ScoreCache(config.refresh_period),
      .prototypes = std::nullopt,
      .step = 0,
      .updates_done = 0,
      .next_eval = 0,
      .init_batch_rng = make_rng(config.seed, Stream::InitialBatches),
      .candidate_rng = make_rng(config.seed, Stream::Candidates),
      .replay_rng = make_rng(config.seed, Stream::Replay),
      .score_rng = make_rng(config.seed, Stream::RandomScores),
      .finetune_rng = make_rng(config.seed, Stream::Finetune),
      .result = {},
  };
  state.result.config = config;
  state.result.delta = config.resolved_delta();
  state.result.init_updates = config.resolved_init_updates();

  auto draw_rng = make_rng(config.seed, Stream::InitialDraw);
  for (std::size_t i = 0; i < config.initial_size; ++i) {
    const auto index = state.sampler.draw(draw_rng);
    record_selection(state, pool, *index, true);
    state.selected.push_back(*index);
  }

  evaluate(state, data);
  state.next_eval = config.resolved_eval_every();
  for (std::size_t u = 0; u < state.result.init_updates; ++u) {
    std::vector<std::size_t> batch;
    append_uniform(state.selected, config.batch_size, state.init_batch_rng, batch);
    sgd_on(state.model, pool, batch, config.lr);
    ++state.updates_done;
    maybe_evaluate(state, data, config);
  }
  state.result.initial_model = state.model;
  return state;
}

void phase_select(RunState& state, const ExperimentData& data, const IDSConfig& config) {
  const Dataset& pool = data.pool;
  const std::size_t delta = config.resolved_delta();
  const bool normalize = config.resolved_normalize();
  const std::size_t stall_limit = config.stall_limit ? config.stall_limit : 10 * pool.size();
  const SelectionPolicy policy{config.method, config.rate};
  if (needs_validation(config.method, config.prototype_source)) state.prototypes = compute_prototypes(data.validation);

  std::size_t consecutive_rejections = 0;
  while (state.selected_count() < config.budget) {
    const std::size_t quota = std::min(delta, config.budget - state.selected_count());
    std::vector<std::size_t> fresh;
    fresh.reserve(quota);
    // The model is frozen for this round, so one context serves every candidate.
    const ScoringContext ctx{&state.model, state.prototypes ? &*state.prototypes : nullptr, config.prototype_source};
    while (fresh.size() < quota) {
      const auto candidates = state.sampler.draw_distinct(config.candidate_batch_size, state.candidate_rng);
      if (candidates.empty()) {
        fail_run(state, data,
                 "source exhausted with " + std::to_string(state.selected_count()) + " of " +
                     std::to_string(config.budget) + " examples selected");
      }
      std::vector<const Example*> batch;
      batch.reserve(candidates.size());
      for (std::size_t index : candidates) batch.push_back(&pool.examples[index]);
      const auto raw_scores = score_batch(config.method, ctx, batch, state.score_rng);

      for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Example& e = *batch[i];
        double score = raw_scores[i];
        if (normalize) score = normalize_by_class_count(score, state.counts.class_count(e.label));
        const Decision d = decide(score, state.cache, policy);
        state.result.candidates.push_back({state.step, e.id, score, d.percentile, d.accepted});
        if (!d.accepted) {
          if (++consecutive_rejections > stall_limit) {
            fail_run(state, data,
                     "selection stalled after " + std::to_string(consecutive_rejections) + " consecutive rejections");
          }
          continue;
        }
        consecutive_rejections = 0;
        record_selection(state, pool, candidates[i], false);
        fresh.push_back(candidates[i]);
        // The rest of the candidate batch is discarded unseen.
        if (fresh.size() == quota) break;
      }
    }

    const auto batch = form_batch(fresh, state.selected, config.replay, config.batch_size, state.replay_rng, pool,
                                  state.counts);
    sgd_on(state.model, pool, batch, config.lr);
    ++state.step;
    ++state.updates_done;

    if (config.deferred_merge) {
      state.deferred.insert(state.deferred.end(), fresh.begin(), fresh.end());
    } else {
      state.selected.insert(state.selected.end(), fresh.begin(), fresh.end());
    }
    if (state.cache.on_model_update()) {
      if (config.deferred_merge) merge_deferred(state);
      if (state.prototypes) state.prototypes = compute_prototypes(data.validation);
    }
    maybe_evaluate(state, data, config);
  }
  merge_deferred(state);
  state.result.selection_updates = state.step;
}

void phase_finetune(RunState& state, const ExperimentData& data, const IDSConfig& config) {
  const Dataset& pool = data.pool;
  const double lr = config.lr * config.final_lr_decay;
  const std::size_t used = state.result.init_updates + state.result.selection_updates;
  const std::size_t remaining = config.total_updates > used ? config.total_updates - used : 0;
  for (std::size_t u = 0; u < remaining; ++u) {
    std::vector<std::size_t> batch;
    append_uniform(state.selected, config.batch_size, state.finetune_rng, batch);
    sgd_on(state.model, pool, batch, lr);
    ++state.updates_done;
    maybe_evaluate(state, data, config);
  }
  state.result.finetune_updates = remaining;
}

RunResult run(const IDSConfig& config, const ExperimentData& data) {
  RunState state = phase_initialize(config, data);
  phase_select(state, data, config);
  phase_finetune(state, data, config);

  finalize_counts(state, data.pool);
  RunResult& r = state.result;
  if (r.accuracy_curve.empty() || r.accuracy_curve.back().update != state.updates_done) evaluate(state, data);
  r.final_test_accuracy = data.test.empty() ? 0.0 : evaluate_accuracy(state.model, data.test.views());
  if (!data.validation.empty()) r.final_validation_accuracy = evaluate_accuracy(state.model, data.validation.views());
  r.final_model = state.model;
  r.completed = true;
  return std::move(state.result);
}

}  // namespace idslab
