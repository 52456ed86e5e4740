#include "idslab/stream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "idslab/binary_io.hpp"
#include "idslab/random.hpp"

namespace idslab {

std::vector<LabeledView> Dataset::views() const {
  std::vector<LabeledView> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.view());
  return out;
}

void Dataset::validate() const {
  if (num_classes < 2) throw std::invalid_argument("dataset needs at least two classes");
  if (feature_dim == 0) throw std::invalid_argument("dataset needs a non-empty feature dimension");
  std::unordered_set<ExampleId> seen;
  seen.reserve(examples.size());
  for (const auto& e : examples) {
    if (!seen.insert(e.id).second) throw std::invalid_argument("duplicate example id " + std::to_string(e.id));
    if (e.label >= num_classes) throw std::invalid_argument("label out of range for id " + std::to_string(e.id));
    if (e.clean_label && *e.clean_label >= num_classes)
      throw std::invalid_argument("clean label out of range for id " + std::to_string(e.id));
    if (static_cast<std::size_t>(e.features.size()) != feature_dim)
      throw std::invalid_argument("feature width mismatch for id " + std::to_string(e.id));
    if (!e.features.allFinite()) throw std::invalid_argument("non-finite features for id " + std::to_string(e.id));
  }
}

void SyntheticSourceSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("synthetic: num_classes must be >= 2");
  if (feature_dim == 0) throw std::invalid_argument("synthetic: feature_dim must be >= 1");
  if (pool_size == 0) throw std::invalid_argument("synthetic: pool_size must be >= 1");
  if (!(label_noise >= 0.0 && label_noise < 1.0)) throw std::invalid_argument("synthetic: label_noise must be in [0,1)");
  if (!(power_law_alpha >= 0.0)) throw std::invalid_argument("synthetic: power_law_alpha must be >= 0");
  if (!(cluster_spread >= 0.0) || !(separation >= 0.0))
    throw std::invalid_argument("synthetic: spread and separation must be >= 0");
}

std::vector<double> class_prior(std::size_t num_classes, double alpha) {
  std::vector<double> prior(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) prior[c] = std::pow(static_cast<double>(c + 1), -alpha);
  const double total = std::accumulate(prior.begin(), prior.end(), 0.0);
  for (auto& p : prior) p /= total;
  return prior;
}

namespace {

// Features are kept at float32 precision so a PKEM round trip is lossless.
Vector sample_features(const Vector& mean, double spread, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    x[i] = static_cast<double>(static_cast<float>(mean[i] + spread * normal(rng)));
  }
  return x;
}

Dataset balanced_split(const SyntheticSourceSpec& spec, const std::vector<Vector>& means, std::size_t per_class,
                       ExampleId first_id, std::mt19937_64& rng) {
  Dataset out{spec.num_classes, spec.feature_dim, {}};
  out.examples.reserve(per_class * spec.num_classes);
  ExampleId id = first_id;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      const auto label = static_cast<ClassIndex>(c);
      out.examples.push_back({id++, sample_features(means[c], spec.cluster_spread, rng), label, label});
    }
  }
  return out;
}

}  // namespace

SyntheticData synth_build(const SyntheticSourceSpec& spec) {
  spec.validate();
  SyntheticData out;

  auto mean_rng = make_rng(spec.seed, Stream::SynthMeans);
  std::normal_distribution<double> normal(0.0, 1.0);
  out.class_means.reserve(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    Vector direction(static_cast<Eigen::Index>(spec.feature_dim));
    do {
      for (Eigen::Index i = 0; i < direction.size(); ++i) direction[i] = normal(mean_rng);
    } while (direction.norm() == 0.0);
    out.class_means.push_back(spec.separation * direction.normalized());
  }

  auto pool_rng = make_rng(spec.seed, Stream::SynthPool);
  const auto prior = class_prior(spec.num_classes, spec.power_law_alpha);
  std::discrete_distribution<std::size_t> pick_class(prior.begin(), prior.end());
  std::bernoulli_distribution flip(spec.label_noise);
  std::uniform_int_distribution<std::size_t> other_class(0, spec.num_classes - 2);

  Dataset& pool = out.data.pool;
  pool.num_classes = spec.num_classes;
  pool.feature_dim = spec.feature_dim;
  pool.examples.reserve(spec.pool_size);
  for (std::size_t i = 0; i < spec.pool_size; ++i) {
    const auto clean = static_cast<ClassIndex>(pick_class(pool_rng));
    Vector features = sample_features(out.class_means[clean], spec.cluster_spread, pool_rng);
    ClassIndex label = clean;
    if (flip(pool_rng)) {
      auto other = static_cast<ClassIndex>(other_class(pool_rng));
      label = other >= clean ? other + 1 : other;
    }
    pool.examples.push_back({static_cast<ExampleId>(i), std::move(features), label, clean});
  }

  auto val_rng = make_rng(spec.seed, Stream::SynthValidation);
  out.data.validation = balanced_split(spec, out.class_means, spec.validation_per_class, spec.pool_size, val_rng);
  auto test_rng = make_rng(spec.seed, Stream::SynthTest);
  out.data.test = balanced_split(spec, out.class_means, spec.test_per_class,
                                 spec.pool_size + out.data.validation.size(), test_rng);
  return out;
}

ExclusionSampler::ExclusionSampler(std::size_t pool_size)
    : slots_(pool_size), position_(pool_size), available_(pool_size) {
  std::iota(slots_.begin(), slots_.end(), std::size_t{0});
  std::iota(position_.begin(), position_.end(), std::size_t{0});
}

void ExclusionSampler::swap_slots(std::size_t a, std::size_t b) {
  std::swap(slots_[a], slots_[b]);
  position_[slots_[a]] = a;
  position_[slots_[b]] = b;
}

void ExclusionSampler::exclude(std::size_t index) {
  const std::size_t pos = position_.at(index);
  if (pos >= available_) return;
  swap_slots(pos, available_ - 1);
  --available_;
}

std::optional<std::size_t> ExclusionSampler::draw(std::mt19937_64& rng) const {
  if (available_ == 0) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, available_ - 1);
  return slots_[pick(rng)];
}

std::vector<std::size_t> ExclusionSampler::draw_distinct(std::size_t count, std::mt19937_64& rng) {
  count = std::min(count, available_);
  std::vector<std::size_t> out;
  out.reserve(count);
  // Partial Fisher-Yates inside the available prefix.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, available_ - 1);
    swap_slots(i, pick(rng));
    out.push_back(slots_[i]);
  }
  return out;
}

const Example* draw_excluding(const Dataset& pool, const IdSet& excluded, std::mt19937_64& rng) {
  std::vector<const Example*> remaining;
  remaining.reserve(pool.size());
  for (const auto& e : pool.examples) {
    if (!excluded.contains(e.id)) remaining.push_back(&e);
  }
  if (remaining.empty()) return nullptr;
  std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
  return remaining[pick(rng)];
}

const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::Io: return "io error";
    case ParseErrorKind::BadMagic: return "bad magic";
    case ParseErrorKind::UnsupportedVersion: return "unsupported version";
    case ParseErrorKind::Truncated: return "truncated payload";
    case ParseErrorKind::TrailingData: return "trailing data";
    case ParseErrorKind::LabelOutOfRange: return "label out of range";
    case ParseErrorKind::NonFiniteFeature: return "non-finite feature";
    case ParseErrorKind::DuplicateId: return "duplicate id";
    case ParseErrorKind::BadCsv: return "malformed csv";
  }
  return "parse error";
}

namespace {

constexpr char kPkemMagic[4] = {'P', 'K', 'E', 'M'};
constexpr std::uint32_t kPkemVersion = 1;

bool has_csv_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv";
}

void check_record(const Example& e, std::size_t num_classes, std::unordered_set<ExampleId>& seen) {
  if (e.label >= num_classes)
    throw ParseError(ParseErrorKind::LabelOutOfRange,
                     "id " + std::to_string(e.id) + " has label " + std::to_string(e.label) + " >= C=" +
                         std::to_string(num_classes));
  if (e.clean_label && *e.clean_label >= num_classes)
    throw ParseError(ParseErrorKind::LabelOutOfRange, "id " + std::to_string(e.id) + " has clean label out of range");
  if (!e.features.allFinite())
    throw ParseError(ParseErrorKind::NonFiniteFeature, "id " + std::to_string(e.id));
  if (!seen.insert(e.id).second) throw ParseError(ParseErrorKind::DuplicateId, "id " + std::to_string(e.id));
}

}  // namespace

Dataset load_pkem(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4)) throw ParseError(ParseErrorKind::Truncated, "missing header");
  if (!std::equal(magic, magic + 4, kPkemMagic)) throw ParseError(ParseErrorKind::BadMagic, path.string());
  std::uint32_t version = 0, n = 0, d = 0, c = 0;
  if (!detail::read_le(in, version)) throw ParseError(ParseErrorKind::Truncated, "missing version");
  if (version != kPkemVersion) throw ParseError(ParseErrorKind::UnsupportedVersion, std::to_string(version));
  if (!detail::read_le(in, n) || !detail::read_le(in, d) || !detail::read_le(in, c))
    throw ParseError(ParseErrorKind::Truncated, "incomplete header");

  Dataset out{c, d, {}};
  out.examples.reserve(n);
  std::unordered_set<ExampleId> seen;
  std::vector<float> buffer(d);
  for (std::uint32_t r = 0; r < n; ++r) {
    Example e;
    std::uint32_t label = 0, clean = 0;
    bool ok = detail::read_le(in, e.id) && detail::read_le(in, label) && detail::read_le(in, clean);
    ok = ok && in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(d * sizeof(float)));
    if (!ok) throw ParseError(ParseErrorKind::Truncated, "record " + std::to_string(r) + " of " + std::to_string(n));
    e.label = label;
    if (clean != kUnknownLabel) e.clean_label = clean;
    e.features.resize(d);
    for (std::uint32_t i = 0; i < d; ++i) e.features[i] = static_cast<double>(buffer[i]);
    check_record(e, c, seen);
    out.examples.push_back(std::move(e));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw ParseError(ParseErrorKind::TrailingData, "payload longer than header declares");
  return out;
}

void save_pkem(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kPkemMagic, 4);
  detail::write_le(out, kPkemVersion);
  detail::write_le(out, static_cast<std::uint32_t>(dataset.size()));
  detail::write_le(out, static_cast<std::uint32_t>(dataset.feature_dim));
  detail::write_le(out, static_cast<std::uint32_t>(dataset.num_classes));
  for (const auto& e : dataset.examples) {
    detail::write_le(out, e.id);
    detail::write_le(out, static_cast<std::uint32_t>(e.label));
    detail::write_le(out, e.clean_label ? static_cast<std::uint32_t>(*e.clean_label) : kUnknownLabel);
    for (Eigen::Index i = 0; i < e.features.size(); ++i) detail::write_le(out, static_cast<float>(e.features[i]));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <typename T>
T parse_number(const std::string& text, std::size_t line_no) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParseError(ParseErrorKind::BadCsv, "line " + std::to_string(line_no) + ": bad number '" + text + "'");
  return value;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(ParseErrorKind::Truncated, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "label" || header[2] != "clean_label")
    throw ParseError(ParseErrorKind::BadMagic, "csv header must start with id,label,clean_label,f0");
  const std::size_t d = header.size() - 3;
  for (std::size_t i = 0; i < d; ++i) {
    if (header[3 + i] != "f" + std::to_string(i))
      throw ParseError(ParseErrorKind::BadCsv, "unexpected feature column " + header[3 + i]);
  }

  Dataset out{num_classes, d, {}};
  std::size_t line_no = 1;
  ClassIndex max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(ParseErrorKind::Truncated, "line " + std::to_string(line_no) + " has " +
                                                      std::to_string(cells.size()) + " cells");
    Example e;
    e.id = parse_number<ExampleId>(cells[0], line_no);
    e.label = parse_number<ClassIndex>(cells[1], line_no);
    if (!cells[2].empty()) e.clean_label = parse_number<ClassIndex>(cells[2], line_no);
    e.features.resize(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
      const auto& text = cells[3 + i];
      // from_chars rejects "nan"/"inf" spellings inconsistently; catch them explicitly.
      double v = 0.0;
      try {
        v = parse_number<double>(text, line_no);
      } catch (const ParseError&) {
        std::string lower = text;
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        if (lower.find("nan") != std::string::npos || lower.find("inf") != std::string::npos)
          throw ParseError(ParseErrorKind::NonFiniteFeature, "line " + std::to_string(line_no));
        throw;
      }
      e.features[static_cast<Eigen::Index>(i)] = v;
    }
    max_label = std::max({max_label, e.label, e.clean_label.value_or(0)});
    out.examples.push_back(std::move(e));
  }
  if (out.num_classes == 0) out.num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
  std::unordered_set<ExampleId> seen;
  for (const auto& e : out.examples) check_record(e, out.num_classes, seen);
  return out;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "id,label,clean_label";
  for (std::size_t i = 0; i < dataset.feature_dim; ++i) out << ",f" << i;
  out << '\n';
  char buf[64];
  for (const auto& e : dataset.examples) {
    out << e.id << ',' << e.label << ',';
    if (e.clean_label) out << *e.clean_label;
    for (Eigen::Index i = 0; i < e.features.size(); ++i) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), e.features[i]);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

Dataset load_embeddings(const std::filesystem::path& path) {
  return has_csv_extension(path) ? load_csv(path) : load_pkem(path);
}

void save_embeddings(const Dataset& dataset, const std::filesystem::path& path) {
  if (has_csv_extension(path)) {
    save_csv(dataset, path);
  } else {
    save_pkem(dataset, path);
  }
}

ExperimentData split(const Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed) {
  if (fractions.validation < 0.0 || fractions.test < 0.0 || fractions.pool < 0.0)
    throw std::invalid_argument("split: negative fraction");
  if (fractions.pool + fractions.validation + fractions.test > 1.0 + 1e-9)
    throw std::invalid_argument("split: fractions sum above 1");
  const std::size_t n = dataset.size();
  const auto n_val = static_cast<std::size_t>(std::floor(fractions.validation * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions.test * static_cast<double>(n) + 1e-9));
  if (n_val + n_test > n) throw std::invalid_argument("split: held-out sets exceed dataset");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed, Stream::Split);
  std::shuffle(order.begin(), order.end(), rng);

  ExperimentData out;
  for (Dataset* part : {&out.pool, &out.validation, &out.test}) {
    part->num_classes = dataset.num_classes;
    part->feature_dim = dataset.feature_dim;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Example& e = dataset.examples[order[i]];
    if (i < n_val) {
      out.validation.examples.push_back(e);
    } else if (i < n_val + n_test) {
      out.test.examples.push_back(e);
    } else {
      out.pool.examples.push_back(e);
    }
  }
  return out;
}

}  // namespace idslab
