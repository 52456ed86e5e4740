#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "idslab/model.hpp"
#include "idslab/numerics.hpp"

namespace idslab {

struct Example {
  ExampleId id = 0;
  Vector features;
  ClassIndex label = 0;
  // Ground truth before label noise; only analysis code may look at it.
  std::optional<ClassIndex> clean_label;

  LabeledView view() const { return {&features, label}; }
};

struct Dataset {
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  std::vector<LabeledView> views() const;
  // Throws std::invalid_argument on duplicate ids, bad labels, wrong widths or
  // non-finite features.
  void validate() const;
};

// Materialized source pool plus the held-out splits.
struct ExperimentData {
  Dataset pool;
  Dataset validation;
  Dataset test;
};

// Gaussian class clusters. Class means are random unit directions scaled by
// `separation`; samples add isotropic noise of scale `cluster_spread`. Pool
// labels follow p_c ∝ (c+1)^-alpha and are flipped to a uniformly random other
// class with probability `label_noise`. Validation and test sets are balanced
// and clean.
struct SyntheticSourceSpec {
  std::size_t num_classes = 10;
  std::size_t feature_dim = 16;
  std::size_t pool_size = 10000;
  std::size_t validation_per_class = 32;
  std::size_t test_per_class = 100;
  double power_law_alpha = 0.0;
  double cluster_spread = 1.0;
  double separation = 3.0;
  double label_noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  ExperimentData data;
  std::vector<Vector> class_means;
};

// Pool ids are 0..n-1, validation and test ids follow. Bit-reproducible for a
// fixed spec on a given toolchain.
SyntheticData synth_build(const SyntheticSourceSpec& spec);

// Class prior for the pool, normalized.
std::vector<double> class_prior(std::size_t num_classes, double alpha);

// Uniform draws over the complement of an exclusion set in O(1) per draw.
// Indices refer to positions in the pool.
class ExclusionSampler {
 public:
  explicit ExclusionSampler(std::size_t pool_size);

  std::size_t pool_size() const { return slots_.size(); }
  std::size_t available() const { return available_; }
  bool is_excluded(std::size_t index) const { return position_.at(index) >= available_; }
  void exclude(std::size_t index);

  // nullopt once everything is excluded.
  std::optional<std::size_t> draw(std::mt19937_64& rng) const;
  // Up to `count` distinct available indices; does not exclude them.
  std::vector<std::size_t> draw_distinct(std::size_t count, std::mt19937_64& rng);

 private:
  void swap_slots(std::size_t a, std::size_t b);

  std::vector<std::size_t> slots_;
  std::vector<std::size_t> position_;
  std::size_t available_;
};

// One uniform draw from the pool minus `excluded`; nullptr means exhausted.
const Example* draw_excluding(const Dataset& pool, const IdSet& excluded, std::mt19937_64& rng);

enum class ParseErrorKind {
  Io,
  BadMagic,
  UnsupportedVersion,
  Truncated,
  TrailingData,
  LabelOutOfRange,
  NonFiniteFeature,
  DuplicateId,
  BadCsv,
};

const char* to_string(ParseErrorKind kind);

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}
  ParseErrorKind kind() const { return kind_; }

 private:
  ParseErrorKind kind_;
};

inline constexpr std::uint32_t kUnknownLabel = 0xFFFFFFFFu;

// PKEM binary (little-endian): "PKEM", u32 version=1, u32 n, u32 d, u32 C,
// then n records of u64 id, u32 label, u32 clean_label, d float32.
// Files ending in .csv use the header id,label,clean_label,f0..f{d-1}.
Dataset load_embeddings(const std::filesystem::path& path);
void save_embeddings(const Dataset& dataset, const std::filesystem::path& path);

Dataset load_pkem(const std::filesystem::path& path);
void save_pkem(const Dataset& dataset, const std::filesystem::path& path);
// The CSV header does not carry C; the caller supplies it, or 0 to infer max label + 1.
Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes = 0);
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

struct SplitFractions {
  double pool = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

// Seeded shuffle; validation and test get floor(fraction * n) and the pool
// takes the remainder.
ExperimentData split(const Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed);

}  // namespace idslab
