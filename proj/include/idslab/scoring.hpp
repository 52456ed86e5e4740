#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "idslab/model.hpp"
#include "idslab/numerics.hpp"
#include "idslab/stream.hpp"

namespace idslab {

enum class Method {
  Random,
  ExactDelta,
  PeaksV,
  Peaks,
  EL2N,
  GraNd,
  Uncertainty,
  WrongLowConf,
  EasyEmb,
  ModerateEmb,
  HardEmb,
};

// Where embedding-anchored scores take their class prototype from.
enum class PrototypeSource { ValidationMeans, ReadoutWeights };

std::string_view to_string(Method method);
// Accepts the canonical names ("peaks", "peaks_v", "exact_delta", "el2n",
// "grand", "uncertainty", "wrong_low_conf", "easy_emb", "moderate_emb",
// "hard_emb", "random"); case-insensitive, '-' and '_' interchangeable.
Method parse_method(std::string_view name);
std::string_view to_string(PrototypeSource source);
PrototypeSource parse_prototype_source(std::string_view name);

const std::vector<Method>& all_methods();

// Whether the method needs per-class validation data under `source`.
bool needs_validation(Method method, PrototypeSource source);

// Per-class mean validation embeddings. Members are kept for the exact score.
struct ClassPrototypes {
  std::vector<std::optional<Vector>> means;
  std::vector<std::vector<Vector>> members;

  bool has_class(ClassIndex label) const { return label < means.size() && means[label].has_value(); }
  const Vector& mean(ClassIndex label) const;
};

ClassPrototypes compute_prototypes(const Dataset& validation);

// Change in every logit of x_v induced by training on (phi_p, y_p) under the
// last-layer kernel, learning rate omitted:
// out[i] = (phi_v . phi_p) * (y_p[i] - softmax(W phi_p)[i]).
Vector exact_logit_delta(const LinearSoftmaxModel& model, const Vector& phi_p, ClassIndex y_p, const Vector& phi_v);

// Mean over class-y_p validation members of
// delta[y_p] - sum_{i != y_p} delta[i], computed from exact_logit_delta.
double score_exact_delta(const LinearSoftmaxModel& model, const Vector& phi_p, ClassIndex y_p,
                         const ClassPrototypes& prototypes);

// E(phi_p) * <phi_p, class mean(y_p)>.
double score_peaks_v(const LinearSoftmaxModel& model, const Vector& phi_p, ClassIndex y_p,
                     const ClassPrototypes& prototypes);

// E(phi_p) * f(phi_p)[y_p]; the readout row stands in for the class mean.
double score_peaks(const LinearSoftmaxModel& model, const Vector& phi_p, ClassIndex y_p);

double score_el2n(const Vector& probs, ClassIndex y_p);
// Frobenius norm of the last-layer gradient (p - y) phi^T.
double score_grand(const Vector& probs, ClassIndex y_p, const Vector& phi_p);
double score_uncertainty(const Vector& probs);
double score_wrong_low_conf(const Vector& probs, ClassIndex y_p);
double score_embedding(const Vector& phi_p, const Vector& prototype);

double normalize_by_class_count(double score, std::size_t class_count);

// Everything a score may depend on, frozen for one selection round.
struct ScoringContext {
  const LinearSoftmaxModel* model = nullptr;
  const ClassPrototypes* prototypes = nullptr;  // required when needs_validation()
  PrototypeSource prototype_source = PrototypeSource::ReadoutWeights;
};

// Raw score of one candidate (before class-count normalization). Random draws
// from `rng`; every other method ignores it.
double score_candidate(Method method, const ScoringContext& ctx, const Vector& phi, ClassIndex label,
                       std::mt19937_64& rng);

// Scores a batch of candidates, forward passes first, then the scores in order.
// Results are identical to calling score_candidate in order.
std::vector<double> score_batch(Method method, const ScoringContext& ctx, std::span<const Example* const> batch,
                                std::mt19937_64& rng);

}  // namespace idslab
