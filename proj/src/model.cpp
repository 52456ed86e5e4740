#include "idslab/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include "idslab/binary_io.hpp"
#include "idslab/errors.hpp"

namespace idslab {

namespace {

constexpr char kCheckpointMagic[4] = {'P', 'K', 'W', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

LinearSoftmaxModel::LinearSoftmaxModel(std::size_t num_classes, std::size_t feature_dim)
    : weights_(Matrix::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(feature_dim))) {
  if (num_classes < 2) throw std::invalid_argument("model needs at least two classes");
  if (feature_dim == 0) throw std::invalid_argument("model needs a non-empty feature dimension");
}

LinearSoftmaxModel::LinearSoftmaxModel(Matrix weights) : weights_(std::move(weights)) {
  if (weights_.rows() < 2 || weights_.cols() == 0) throw std::invalid_argument("bad weight shape");
  if (!weights_.allFinite()) throw std::invalid_argument("non-finite weights");
}

void LinearSoftmaxModel::check_features(const Vector& features) const {
  if (features.size() != weights_.cols()) {
    throw DimensionError("feature length " + std::to_string(features.size()) + " != model dim " +
                         std::to_string(weights_.cols()));
  }
}

Vector LinearSoftmaxModel::readout(ClassIndex label) const {
  if (label >= num_classes()) throw std::out_of_range("readout: label out of range");
  return weights_.row(label).transpose();
}

Vector LinearSoftmaxModel::logits(const Vector& features) const {
  check_features(features);
  return weights_ * features;
}

Prediction LinearSoftmaxModel::forward(const Vector& features) const {
  Prediction p;
  p.logits = logits(features);
  p.probs = softmax(p.logits);
  return p;
}

Matrix LinearSoftmaxModel::mean_gradient(std::span<const LabeledView> batch) const {
  if (batch.empty()) throw std::invalid_argument("sgd: empty batch");
  Matrix grad = Matrix::Zero(weights_.rows(), weights_.cols());
  for (const auto& item : batch) {
    if (item.label >= num_classes()) throw std::out_of_range("sgd: label out of range");
    Vector err = forward(*item.features).probs;
    err[item.label] -= 1.0;
    grad.noalias() += err * item.features->transpose();
  }
  grad /= static_cast<double>(batch.size());
  return grad;
}

void LinearSoftmaxModel::sgd_batch_update(std::span<const LabeledView> batch, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd: learning rate must be positive");
  const Matrix grad = mean_gradient(batch);
  weights_.noalias() -= lr * grad;
  if (!weights_.allFinite()) throw std::runtime_error("sgd: weights diverged");
}

LinearSoftmaxModel init_model(std::size_t num_classes, std::size_t feature_dim, std::uint64_t seed, InitKind kind) {
  LinearSoftmaxModel model(num_classes, feature_dim);
  if (kind == InitKind::Zero) return model;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  Matrix w(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(feature_dim));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = normal(rng);
  return LinearSoftmaxModel(std::move(w));
}

double prediction_error(const Vector& probs, ClassIndex label) {
  if (label >= static_cast<std::size_t>(probs.size())) throw std::out_of_range("prediction_error: label out of range");
  double off_label = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (static_cast<ClassIndex>(i) != label) off_label += probs[i];
  }
  return (1.0 - probs[label]) + off_label;
}

double cross_entropy(const Vector& probs, ClassIndex label) {
  if (label >= static_cast<std::size_t>(probs.size())) throw std::out_of_range("cross_entropy: label out of range");
  return -std::log(std::max(probs[label], 1e-12));
}

double mean_cross_entropy(const LinearSoftmaxModel& model, std::span<const LabeledView> batch) {
  if (batch.empty()) throw std::invalid_argument("mean_cross_entropy: empty batch");
  double total = 0.0;
  for (const auto& item : batch) total += cross_entropy(model.forward(*item.features).probs, item.label);
  return total / static_cast<double>(batch.size());
}

double evaluate_accuracy(const LinearSoftmaxModel& model, std::span<const LabeledView> dataset) {
  if (dataset.empty()) throw std::invalid_argument("evaluate_accuracy: empty dataset");
  std::size_t hits = 0;
  for (const auto& item : dataset) {
    if (argmax(model.logits(*item.features)) == item.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

void save_checkpoint(const LinearSoftmaxModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kCheckpointMagic, 4);
  detail::write_le(out, kCheckpointVersion);
  detail::write_le(out, static_cast<std::uint32_t>(model.num_classes()));
  detail::write_le(out, static_cast<std::uint32_t>(model.feature_dim()));
  const Matrix& w = model.weights();
  for (Eigen::Index i = 0; i < w.size(); ++i) detail::write_le(out, w.data()[i]);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LinearSoftmaxModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kCheckpointMagic))
    throw std::runtime_error("not a PKWT checkpoint: " + path.string());
  std::uint32_t version = 0, rows = 0, cols = 0;
  if (!detail::read_le(in, version) || !detail::read_le(in, rows) || !detail::read_le(in, cols))
    throw std::runtime_error("truncated checkpoint header: " + path.string());
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!detail::read_le(in, w.data()[i])) throw std::runtime_error("truncated checkpoint payload: " + path.string());
  }
  return LinearSoftmaxModel(std::move(w));
}

}  // namespace idslab
