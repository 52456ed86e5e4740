#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>

#include "idslab/numerics.hpp"

namespace idslab {

using ClassIndex = std::uint32_t;

struct Prediction {
  Vector logits;
  Vector probs;
};

// Features plus label, borrowed from whatever owns the example.
struct LabeledView {
  const Vector* features;
  ClassIndex label;
};

// Last-layer classifier f(x) = W phi(x) with W stored C x d and no bias.
// Append a constant-1 feature if a bias is wanted.
class LinearSoftmaxModel {
 public:
  LinearSoftmaxModel(std::size_t num_classes, std::size_t feature_dim);
  explicit LinearSoftmaxModel(Matrix weights);

  std::size_t num_classes() const { return static_cast<std::size_t>(weights_.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(weights_.cols()); }

  const Matrix& weights() const { return weights_; }
  // Readout row for one class, i.e. its learned prototype.
  Vector readout(ClassIndex label) const;

  Vector logits(const Vector& features) const;
  Prediction forward(const Vector& features) const;

  // Mean cross-entropy SGD step over the batch, with every gradient taken at
  // the pre-update weights.
  void sgd_batch_update(std::span<const LabeledView> batch, double lr);

  // Gradient of the mean cross-entropy over the batch, same shape as W.
  Matrix mean_gradient(std::span<const LabeledView> batch) const;

 private:
  void check_features(const Vector& features) const;

  Matrix weights_;
};

enum class InitKind { Zero, Gaussian };

// Zero weights, or N(0, 0.01) entries drawn from `seed`.
LinearSoftmaxModel init_model(std::size_t num_classes, std::size_t feature_dim, std::uint64_t seed,
                              InitKind kind = InitKind::Zero);

// (1 - p[y]) + sum_{i != y} p[i], which equals 2 (1 - p[y]) for a normalized p.
double prediction_error(const Vector& probs, ClassIndex label);

double cross_entropy(const Vector& probs, ClassIndex label);

double mean_cross_entropy(const LinearSoftmaxModel& model, std::span<const LabeledView> batch);

// Fraction of argmax hits; throws std::invalid_argument on an empty dataset.
double evaluate_accuracy(const LinearSoftmaxModel& model, std::span<const LabeledView> dataset);

// PKWT checkpoint: "PKWT", u32 version, u32 C, u32 d, C*d float64, all little-endian.
void save_checkpoint(const LinearSoftmaxModel& model, const std::filesystem::path& path);
LinearSoftmaxModel load_checkpoint(const std::filesystem::path& path);

}  // namespace idslab
