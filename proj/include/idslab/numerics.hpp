#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace idslab {

using Vector = Eigen::VectorXd;
// One row per class (C x d).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ExampleId = std::uint64_t;
using IdSet = std::set<ExampleId>;

// Numerically stable softmax (max-subtracted). Throws std::invalid_argument on
// empty input.
Vector softmax(const Vector& logits);

// 100 * |{c in cache : c < score}| / |cache|. An empty cache ranks every score
// at 100.
double percentile_rank(double score, std::span<const double> cache);

// Average ranks (1-based), ties share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

// Spearman rank correlation with average-rank tie handling.
// Throws std::invalid_argument on length mismatch or fewer than two items, and
// UndefinedCorrelation when either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

// Pearson correlation; same error contract as spearman.
double pearson(std::span<const double> a, std::span<const double> b);

// Throws std::invalid_argument on length mismatch or a zero-norm side.
double cosine_similarity(const Vector& a, const Vector& b);

// Trailing-window mean with an expanding warm-up over the first window-1 items.
std::vector<double> rolling_mean(std::span<const double> series, std::size_t window);

// |a ∩ b| / |a ∪ b|; two empty sets are identical, so 1.0.
double jaccard(const IdSet& a, const IdSet& b);

// Index of the largest entry, lowest index on ties.
std::size_t argmax(const Vector& values);

bool all_finite(const Vector& values);

}  // namespace idslab
