#include "idslab/results_io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "idslab/errors.hpp"

namespace idslab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& where) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.at(key).is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
    } else {
      if (!j.at(key).is_string()) throw ConfigError(where + "." + key + " must be a string");
    }
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_if(const json& j, const std::string& key, T& out, const std::string& where) {
  if (j.contains(key) && !j.at(key).is_null()) out = get_as<T>(j, key, where);
}

template <typename T>
void read_optional(const json& j, const std::string& key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = get_as<T>(j, key, where);
  }
}

template <typename T>
json optional_json(const std::optional<T>& value) {
  return value ? json(*value) : json(nullptr);
}

}  // namespace

json ids_config_to_json(const IDSConfig& c) {
  return json{
      {"budget", c.budget},
      {"initial_size", c.initial_size},
      {"batch_size", c.batch_size},
      {"delta", optional_json(c.delta)},
      {"total_updates", c.total_updates},
      {"init_updates", optional_json(c.init_updates)},
      {"lr", c.lr},
      {"final_lr_decay", c.final_lr_decay},
      {"rate", c.rate},
      {"tau", c.refresh_period == kNeverRefresh ? json("inf") : json(c.refresh_period)},
      {"method", std::string(to_string(c.method))},
      {"normalize_class_count", optional_json(c.normalize_class_count)},
      {"prototype_source", std::string(to_string(c.prototype_source))},
      {"replay", std::string(to_string(c.replay))},
      {"deferred_merge", c.deferred_merge},
      {"candidate_batch_size", c.candidate_batch_size},
      {"eval_every", optional_json(c.eval_every)},
      {"init", c.init == InitKind::Zero ? "zero" : "gaussian"},
      {"stall_limit", c.stall_limit},
      {"seed", c.seed},
  };
}

IDSConfig ids_config_from_json(const json& j) {
  const std::string where = "ids";
  reject_unknown(j,
                 {"budget", "initial_size", "batch_size", "delta", "total_updates", "init_updates", "lr",
                  "final_lr_decay", "rate", "tau", "method", "normalize_class_count", "prototype_source", "replay",
                  "deferred_merge", "candidate_batch_size", "eval_every", "init", "stall_limit", "seed"},
                 where);
  IDSConfig c;
  read_if(j, "budget", c.budget, where);
  read_if(j, "initial_size", c.initial_size, where);
  read_if(j, "batch_size", c.batch_size, where);
  read_optional(j, "delta", c.delta, where);
  read_if(j, "total_updates", c.total_updates, where);
  read_optional(j, "init_updates", c.init_updates, where);
  read_if(j, "lr", c.lr, where);
  read_if(j, "final_lr_decay", c.final_lr_decay, where);
  read_if(j, "rate", c.rate, where);
  if (j.contains("tau")) {
    const auto& tau = j.at("tau");
    if (tau.is_null() || (tau.is_string() && (tau == "inf" || tau == "never"))) {
      c.refresh_period = kNeverRefresh;
    } else {
      c.refresh_period = get_as<std::size_t>(j, "tau", where);
    }
  }
  if (j.contains("method")) c.method = parse_method(get_as<std::string>(j, "method", where));
  read_optional(j, "normalize_class_count", c.normalize_class_count, where);
  if (j.contains("prototype_source"))
    c.prototype_source = parse_prototype_source(get_as<std::string>(j, "prototype_source", where));
  if (j.contains("replay")) c.replay = parse_replay_sampling(get_as<std::string>(j, "replay", where));
  read_if(j, "deferred_merge", c.deferred_merge, where);
  read_if(j, "candidate_batch_size", c.candidate_batch_size, where);
  read_optional(j, "eval_every", c.eval_every, where);
  if (j.contains("init")) {
    const auto init = get_as<std::string>(j, "init", where);
    if (init == "zero") {
      c.init = InitKind::Zero;
    } else if (init == "gaussian") {
      c.init = InitKind::Gaussian;
    } else {
      throw ConfigError("ids.init must be 'zero' or 'gaussian'");
    }
  }
  read_if(j, "stall_limit", c.stall_limit, where);
  read_if(j, "seed", c.seed, where);
  return c;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path, const std::string& expected_header) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != expected_header)
    throw std::runtime_error(path.string() + ": expected header '" + expected_header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

template <typename T>
T parse_cell(const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw std::runtime_error("bad csv value '" + text + "'");
  return value;
}

}  // namespace

void write_run(const RunResult& r, const fs::path& dir, const json& extra_metrics) {
  fs::create_directories(dir);

  json result{
      {"completed", r.completed},
      {"error", r.error},
      {"method", std::string(to_string(r.config.method))},
      {"final_test_accuracy", r.final_test_accuracy},
      {"final_validation_accuracy", optional_json(r.final_validation_accuracy)},
      {"delta", r.delta},
      {"init_updates", r.init_updates},
      {"selection_updates", r.selection_updates},
      {"finetune_updates", r.finetune_updates},
      {"refresh_count", r.refresh_count},
      {"class_counts", r.class_counts},
      {"num_candidates", r.candidates.size()},
      {"config", ids_config_to_json(r.config)},
      {"metrics", extra_metrics},
  };
  json initial = json::array();
  json all = json::array();
  for (const auto& s : r.selected) {
    all.push_back(s.id);
    if (s.initial) initial.push_back(s.id);
  }
  result["initial_ids"] = std::move(initial);
  result["selected_ids"] = std::move(all);
  open_out(dir / "result.json") << result.dump(2) << '\n';

  {
    auto out = open_out(dir / "selected.csv");
    out << "id,step,initial\n";
    for (const auto& s : r.selected) out << s.id << ',' << s.step << ',' << (s.initial ? 1 : 0) << '\n';
  }
  {
    auto out = open_out(dir / "candidates.csv");
    out << "step,id,score,percentile,accepted\n";
    for (const auto& c : r.candidates) {
      out << c.step << ',' << c.id << ',' << format_double(c.score) << ',' << format_double(c.percentile) << ','
          << (c.accepted ? 1 : 0) << '\n';
    }
  }
  {
    auto out = open_out(dir / "accuracy.csv");
    out << "update,split,accuracy\n";
    for (const auto& a : r.accuracy_curve) out << a.update << ',' << a.split << ',' << format_double(a.accuracy) << '\n';
  }
  {
    auto out = open_out(dir / "usage.csv");
    out << "id,count\n";
    for (const auto& [id, count] : r.usage) out << id << ',' << count << '\n';
  }
  if (r.initial_model) save_checkpoint(*r.initial_model, dir / "init_model.pkwt");
  if (r.final_model) save_checkpoint(*r.final_model, dir / "model.pkwt");
}

RunResult read_run(const fs::path& dir) {
  RunResult r;
  json result;
  try {
    open_in(dir / "result.json") >> result;
  } catch (const json::exception& e) {
    throw std::runtime_error((dir / "result.json").string() + ": " + e.what());
  }
  r.completed = result.at("completed").get<bool>();
  r.error = result.at("error").get<std::string>();
  r.final_test_accuracy = result.at("final_test_accuracy").get<double>();
  if (!result.at("final_validation_accuracy").is_null())
    r.final_validation_accuracy = result.at("final_validation_accuracy").get<double>();
  r.delta = result.at("delta").get<std::size_t>();
  r.init_updates = result.at("init_updates").get<std::size_t>();
  r.selection_updates = result.at("selection_updates").get<std::size_t>();
  r.finetune_updates = result.at("finetune_updates").get<std::size_t>();
  r.refresh_count = result.at("refresh_count").get<std::size_t>();
  r.class_counts = result.at("class_counts").get<std::vector<std::size_t>>();
  r.config = ids_config_from_json(result.at("config"));

  for (const auto& row : read_csv_rows(dir / "selected.csv", "id,step,initial")) {
    if (row.size() != 3) throw std::runtime_error("selected.csv: bad row");
    r.selected.push_back({parse_cell<ExampleId>(row[0]), parse_cell<std::size_t>(row[1]), row[2] == "1"});
  }
  for (const auto& row : read_csv_rows(dir / "candidates.csv", "step,id,score,percentile,accepted")) {
    if (row.size() != 5) throw std::runtime_error("candidates.csv: bad row");
    r.candidates.push_back({parse_cell<std::size_t>(row[0]), parse_cell<ExampleId>(row[1]),
                            parse_cell<double>(row[2]), parse_cell<double>(row[3]), row[4] == "1"});
  }
  for (const auto& row : read_csv_rows(dir / "accuracy.csv", "update,split,accuracy")) {
    if (row.size() != 3) throw std::runtime_error("accuracy.csv: bad row");
    r.accuracy_curve.push_back({parse_cell<std::size_t>(row[0]), row[1], parse_cell<double>(row[2])});
  }
  for (const auto& row : read_csv_rows(dir / "usage.csv", "id,count")) {
    if (row.size() != 2) throw std::runtime_error("usage.csv: bad row");
    r.usage.emplace_back(parse_cell<ExampleId>(row[0]), parse_cell<std::size_t>(row[1]));
  }
  if (fs::exists(dir / "init_model.pkwt")) r.initial_model = load_checkpoint(dir / "init_model.pkwt");
  if (fs::exists(dir / "model.pkwt")) r.final_model = load_checkpoint(dir / "model.pkwt");
  return r;
}

}  // namespace idslab
