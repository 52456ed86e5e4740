#include "idslab/config.hpp"

#include <fstream>
#include <set>

#include "idslab/errors.hpp"
#include "idslab/results_io.hpp"

namespace idslab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_number(const json& j, const std::string& key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  } else {
    if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  }
  out = v.get<T>();
}

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() || base.empty() ? p : base / p; }

}  // namespace

SyntheticSourceSpec synthetic_spec_from_json(const json& j) {
  const std::string where = "source.synthetic";
  reject_unknown(j,
                 {"num_classes", "feature_dim", "pool_size", "validation_per_class", "test_per_class",
                  "power_law_alpha", "cluster_spread", "separation", "label_noise", "seed"},
                 where);
  SyntheticSourceSpec s;
  read_number(j, "num_classes", s.num_classes, where);
  read_number(j, "feature_dim", s.feature_dim, where);
  read_number(j, "pool_size", s.pool_size, where);
  read_number(j, "validation_per_class", s.validation_per_class, where);
  read_number(j, "test_per_class", s.test_per_class, where);
  read_number(j, "power_law_alpha", s.power_law_alpha, where);
  read_number(j, "cluster_spread", s.cluster_spread, where);
  read_number(j, "separation", s.separation, where);
  read_number(j, "label_noise", s.label_noise, where);
  read_number(j, "seed", s.seed, where);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

json synthetic_spec_to_json(const SyntheticSourceSpec& s) {
  return json{{"num_classes", s.num_classes},
              {"feature_dim", s.feature_dim},
              {"pool_size", s.pool_size},
              {"validation_per_class", s.validation_per_class},
              {"test_per_class", s.test_per_class},
              {"power_law_alpha", s.power_law_alpha},
              {"cluster_spread", s.cluster_spread},
              {"separation", s.separation},
              {"label_noise", s.label_noise},
              {"seed", s.seed}};
}

ExperimentConfig parse_experiment_config(const json& j, const fs::path& base_dir) {
  reject_unknown(j, {"source", "ids", "sweep"}, "config");
  ExperimentConfig cfg;

  if (!j.contains("source")) throw ConfigError("config.source is required");
  const json& src = j.at("source");
  reject_unknown(src, {"synthetic", "embeddings"}, "source");
  if (src.contains("synthetic") == src.contains("embeddings"))
    throw ConfigError("source needs exactly one of 'synthetic' or 'embeddings'");
  if (src.contains("synthetic")) {
    cfg.source.synthetic = synthetic_spec_from_json(src.at("synthetic"));
  } else {
    const json& e = src.at("embeddings");
    const std::string where = "source.embeddings";
    reject_unknown(e, {"path", "validation_path", "test_path", "split", "split_seed"}, where);
    EmbeddingSourceConfig emb;
    if (!e.contains("path") || !e.at("path").is_string()) throw ConfigError(where + ".path must be a string");
    emb.path = resolve(e.at("path").get<std::string>(), base_dir);
    if (e.contains("validation_path")) emb.validation_path = resolve(e.at("validation_path").get<std::string>(), base_dir);
    if (e.contains("test_path")) emb.test_path = resolve(e.at("test_path").get<std::string>(), base_dir);
    if (e.contains("split")) {
      const json& f = e.at("split");
      reject_unknown(f, {"pool", "validation", "test"}, where + ".split");
      read_number(f, "pool", emb.fractions.pool, where + ".split");
      read_number(f, "validation", emb.fractions.validation, where + ".split");
      read_number(f, "test", emb.fractions.test, where + ".split");
    }
    read_number(e, "split_seed", emb.split_seed, where);
    cfg.source.embeddings = emb;
  }

  if (j.contains("ids")) cfg.ids = ids_config_from_json(j.at("ids"));

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown(s, {"methods", "budgets", "rates", "seeds"}, "sweep");
    try {
      if (s.contains("methods"))
        for (const auto& m : s.at("methods")) cfg.sweep.methods.push_back(parse_method(m.get<std::string>()));
      if (s.contains("budgets")) cfg.sweep.budgets = s.at("budgets").get<std::vector<std::size_t>>();
      if (s.contains("rates")) cfg.sweep.rates = s.at("rates").get<std::vector<double>>();
      if (s.contains("seeds")) cfg.sweep.seeds = s.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("sweep: ") + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
  json src = json::object();
  if (cfg.source.synthetic) {
    src["synthetic"] = synthetic_spec_to_json(*cfg.source.synthetic);
  } else if (cfg.source.embeddings) {
    const auto& e = *cfg.source.embeddings;
    json emb{{"path", fs::absolute(e.path).lexically_normal().string()},
             {"split", {{"pool", e.fractions.pool}, {"validation", e.fractions.validation}, {"test", e.fractions.test}}},
             {"split_seed", e.split_seed}};
    if (e.validation_path) emb["validation_path"] = fs::absolute(*e.validation_path).lexically_normal().string();
    if (e.test_path) emb["test_path"] = fs::absolute(*e.test_path).lexically_normal().string();
    src["embeddings"] = emb;
  }
  json sweep = json::object();
  if (!cfg.sweep.methods.empty()) {
    json methods = json::array();
    for (Method m : cfg.sweep.methods) methods.push_back(std::string(to_string(m)));
    sweep["methods"] = methods;
  }
  if (!cfg.sweep.budgets.empty()) sweep["budgets"] = cfg.sweep.budgets;
  if (!cfg.sweep.rates.empty()) sweep["rates"] = cfg.sweep.rates;
  if (!cfg.sweep.seeds.empty()) sweep["seeds"] = cfg.sweep.seeds;
  return json{{"source", src}, {"ids", ids_config_to_json(cfg.ids)}, {"sweep", sweep}};
}

ExperimentData load_data(const SourceConfig& source) {
  if (source.synthetic) return synth_build(*source.synthetic).data;
  if (!source.embeddings) throw ConfigError("no data source configured");
  const auto& e = *source.embeddings;
  Dataset all = load_embeddings(e.path);
  if (e.validation_path || e.test_path) {
    ExperimentData data;
    data.pool = std::move(all);
    data.validation = e.validation_path ? load_embeddings(*e.validation_path)
                                        : Dataset{data.pool.num_classes, data.pool.feature_dim, {}};
    data.test = e.test_path ? load_embeddings(*e.test_path) : Dataset{data.pool.num_classes, data.pool.feature_dim, {}};
    for (const Dataset* part : {&data.validation, &data.test}) {
      if (!part->empty() && (part->feature_dim != data.pool.feature_dim || part->num_classes != data.pool.num_classes))
        throw ConfigError("held-out embeddings disagree with the pool on d or C");
    }
    return data;
  }
  return split(all, e.fractions, e.split_seed);
}

}  // namespace idslab
