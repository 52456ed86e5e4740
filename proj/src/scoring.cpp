#include "idslab/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "idslab/errors.hpp"

namespace idslab {

namespace {

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr MethodName kMethodNames[] = {
    {Method::Random, "random"},
    {Method::ExactDelta, "exact_delta"},
    {Method::PeaksV, "peaks_v"},
    {Method::Peaks, "peaks"},
    {Method::EL2N, "el2n"},
    {Method::GraNd, "grand"},
    {Method::Uncertainty, "uncertainty"},
    {Method::WrongLowConf, "wrong_low_conf"},
    {Method::EasyEmb, "easy_emb"},
    {Method::ModerateEmb, "moderate_emb"},
    {Method::HardEmb, "hard_emb"},
};

std::string canonical(std::string_view name) {
  std::string out(name);
  for (auto& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '-') c = '_';
  }
  return out;
}

}  // namespace

std::string_view to_string(Method method) {
  for (const auto& entry : kMethodNames)
    if (entry.method == method) return entry.name;
  return "unknown";
}

Method parse_method(std::string_view name) {
  const auto key = canonical(name);
  for (const auto& entry : kMethodNames)
    if (entry.name == key) return entry.method;
  if (key == "peaksv") return Method::PeaksV;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(PrototypeSource source) {
  return source == PrototypeSource::ValidationMeans ? "validation_means" : "readout_weights";
}

PrototypeSource parse_prototype_source(std::string_view name) {
  const auto key = canonical(name);
  if (key == "validation_means" || key == "validation") return PrototypeSource::ValidationMeans;
  if (key == "readout_weights" || key == "readout") return PrototypeSource::ReadoutWeights;
  throw ConfigError("unknown prototype source '" + std::string(name) + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> out;
    for (const auto& entry : kMethodNames) out.push_back(entry.method);
    return out;
  }();
  return methods;
}

bool needs_validation(Method method, PrototypeSource source) {
  switch (method) {
    case Method::ExactDelta:
    case Method::PeaksV:
      return true;
    case Method::EasyEmb:
    case Method::ModerateEmb:
    case Method::HardEmb:
      return source == PrototypeSource::ValidationMeans;
    default:
      return false;
  }
}

const Vector& ClassPrototypes::mean(ClassIndex label) const {
  if (!has_class(label)) throw std::invalid_argument("no validation prototype for class " + std::to_string(label));
  return *means[label];
}

ClassPrototypes compute_prototypes(const Dataset& validation) {
  ClassPrototypes out;
  out.means.resize(validation.num_classes);
  out.members.resize(validation.num_classes);
  for (const auto& e : validation.examples) {
    if (e.label >= validation.num_classes) throw std::invalid_argument("validation label out of range");
    out.members[e.label].push_back(e.features);
  }
  for (std::size_t c = 0; c < validation.num_classes; ++c) {
    const auto& members = out.members[c];
    if (members.empty()) continue;
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(validation.feature_dim));
    for (const auto& m : members) sum += m;
    out.means[c] = sum / static_cast<double>(members.size());
  }
  return out;
}

Vector exact_logit_delta(const LinearSoftmaxModel& model, const Vector& phi_p, ClassIndex y_p, const Vector& phi_v) {
  if (phi_v.size() != phi_p.size()) throw DimensionError("exact_logit_delta: phi_v and phi_p differ in length");
  if (y_p >= model.num_classes()) throw std::out_of_range("exact_logit_delta: label out of range");
  const Vector probs = model.forward(phi_p).probs;
  Vector target = Vector::Zero(probs.size());
  target[y_p] = 1.0;
  return phi_v.dot(phi_p) * (target - probs);
}

namespace {

// Net gain on the anchor class: raise its logit, lower every other logit.
double anchored_gain(const Vector& logit_delta, ClassIndex anchor) {
  double gain = logit_delta[anchor];
  for (Eigen::Index i = 0; i < logit_delta.size(); ++i) {
    if (static_cast<ClassIndex>(i) != anchor) gain -= logit_delta[i];
  }
  return gain;
}

}  // namespace

double score_exact_delta(const LinearSoftmaxModel& model, const Vector& phi_p, ClassIndex y_p,
                         const ClassPrototypes& prototypes) {
  if (y_p >= prototypes.members.size() || prototypes.members[y_p].empty())
    throw std::invalid_argument("score_exact_delta: no validation examples for class " + std::to_string(y_p));
  if (y_p >= model.num_classes()) throw std::out_of_range("score_exact_delta: label out of range");
  const auto& members = prototypes.members[y_p];
  // Same per-member expansion as exact_logit_delta, with the candidate's
  // forward pass hoisted out of the loop.
  const Vector probs = model.forward(phi_p).probs;
  Vector error = -probs;
  error[y_p] += 1.0;
  double total = 0.0;
  for (const auto& phi_v : members) {
    if (phi_v.size() != phi_p.size()) throw DimensionError("score_exact_delta: validation width mismatch");
    total += anchored_gain(phi_v.dot(phi_p) * error, y_p);
  }
  return total / static_cast<double>(members.size());
}

double score_peaks_v(const LinearSoftmaxModel& model, const Vector& phi_p, ClassIndex y_p,
                     const ClassPrototypes& prototypes) {
  const Vector& mean = prototypes.mean(y_p);
  if (mean.size() != phi_p.size()) throw DimensionError("score_peaks_v: prototype width mismatch");
  const Prediction pred = model.forward(phi_p);
  return prediction_error(pred.probs, y_p) * phi_p.dot(mean);
}

double score_peaks(const LinearSoftmaxModel& model, const Vector& phi_p, ClassIndex y_p) {
  const Prediction pred = model.forward(phi_p);
  if (y_p >= model.num_classes()) throw std::out_of_range("score_peaks: label out of range");
  return prediction_error(pred.probs, y_p) * pred.logits[y_p];
}

namespace {

Vector output_error(const Vector& probs, ClassIndex y_p) {
  if (y_p >= static_cast<std::size_t>(probs.size())) throw std::out_of_range("label out of range");
  Vector err = probs;
  err[y_p] -= 1.0;
  return err;
}

}  // namespace

double score_el2n(const Vector& probs, ClassIndex y_p) { return output_error(probs, y_p).norm(); }

double score_grand(const Vector& probs, ClassIndex y_p, const Vector& phi_p) {
  return output_error(probs, y_p).norm() * phi_p.norm();
}

double score_uncertainty(const Vector& probs) {
  if (probs.size() == 0) throw std::invalid_argument("score_uncertainty: empty probabilities");
  return 1.0 - probs.maxCoeff();
}

double score_wrong_low_conf(const Vector& probs, ClassIndex y_p) {
  if (y_p >= static_cast<std::size_t>(probs.size())) throw std::out_of_range("label out of range");
  if (argmax(probs) == y_p) return 0.0;
  return 1.0 - probs.maxCoeff();
}

double score_embedding(const Vector& phi_p, const Vector& prototype) { return cosine_similarity(phi_p, prototype); }

double normalize_by_class_count(double score, std::size_t class_count) {
  return score / static_cast<double>(std::max<std::size_t>(class_count, 1));
}

namespace {

double score_from_prediction(Method method, const ScoringContext& ctx, const Prediction& pred, const Vector& phi,
                             ClassIndex label, std::mt19937_64& rng) {
  switch (method) {
    case Method::Random: {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      return unit(rng);
    }
    case Method::ExactDelta:
      return score_exact_delta(*ctx.model, phi, label, *ctx.prototypes);
    case Method::PeaksV:
      return prediction_error(pred.probs, label) * phi.dot(ctx.prototypes->mean(label));
    case Method::Peaks:
      return prediction_error(pred.probs, label) * pred.logits[label];
    case Method::EL2N:
      return score_el2n(pred.probs, label);
    case Method::GraNd:
      return score_grand(pred.probs, label, phi);
    case Method::Uncertainty:
      return score_uncertainty(pred.probs);
    case Method::WrongLowConf:
      return score_wrong_low_conf(pred.probs, label);
    case Method::EasyEmb:
    case Method::ModerateEmb:
    case Method::HardEmb:
      if (ctx.prototype_source == PrototypeSource::ValidationMeans)
        return score_embedding(phi, ctx.prototypes->mean(label));
      return score_embedding(phi, ctx.model->readout(label));
  }
  throw std::logic_error("unhandled method");
}

void check_context(Method method, const ScoringContext& ctx) {
  if (ctx.model == nullptr) throw std::invalid_argument("scoring context has no model");
  if (needs_validation(method, ctx.prototype_source) && ctx.prototypes == nullptr)
    throw std::invalid_argument(std::string(to_string(method)) + " needs validation prototypes");
}

}  // namespace

double score_candidate(Method method, const ScoringContext& ctx, const Vector& phi, ClassIndex label,
                       std::mt19937_64& rng) {
  check_context(method, ctx);
  if (label >= ctx.model->num_classes()) throw std::out_of_range("candidate label out of range");
  const Prediction pred = ctx.model->forward(phi);
  return score_from_prediction(method, ctx, pred, phi, label, rng);
}

std::vector<double> score_batch(Method method, const ScoringContext& ctx, std::span<const Example* const> batch,
                                std::mt19937_64& rng) {
  check_context(method, ctx);
  std::vector<Prediction> preds;
  preds.reserve(batch.size());
  for (const Example* e : batch) {
    if (e->label >= ctx.model->num_classes()) throw std::out_of_range("candidate label out of range");
    preds.push_back(ctx.model->forward(e->features));
  }
  std::vector<double> scores;
  scores.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    scores.push_back(score_from_prediction(method, ctx, preds[i], batch[i]->features, batch[i]->label, rng));
  return scores;
}

}  // namespace idslab
