#include "idslab/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "idslab/analysis.hpp"
#include "idslab/errors.hpp"
#include "idslab/results_io.hpp"

namespace idslab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_color_mt("idslab");
    l->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::info;
    if (const char* env = std::getenv("IDSLAB_LOG"); env != nullptr && *env != '\0') {
      level = spdlog::level::from_str(env);
    }
    l->set_level(level);
    return l;
  }();
  return log;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("expected true|false, got '" + text + "'");
}

std::size_t parse_tau(const std::string& text) {
  if (text == "inf" || text == "never") return kNeverRefresh;
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value == 0)
    throw ConfigError("--tau expects a positive integer or 'inf'");
  return value;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Timestamps live here so every other output stays byte-reproducible.
void write_metadata(const fs::path& dir, const std::string& command) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  write_json(dir / "metadata.json", json{{"command", command}, {"created_at", stamp.str()}, {"version", kVersion}});
}

std::optional<double> class_count_ratio(const std::vector<std::size_t>& counts) {
  if (counts.empty()) return std::nullopt;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo == 0) return std::nullopt;
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

json run_metrics(const RunResult& r, const ExperimentData& data) {
  auto to_json = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"noise_fraction_selected", to_json(noise_audit(r.selected_ids(), data.pool))},
              {"noise_fraction_new", to_json(noise_audit(r.new_ids(), data.pool))},
              {"class_count_ratio", to_json(class_count_ratio(r.class_counts))},
              {"usage_stddev", usage_histogram(r.usage_values()).stddev}};
}

struct RunOutcome {
  bool completed = false;
  double accuracy = 0.0;
  std::optional<double> noise;
};

RunOutcome execute_run(const ExperimentConfig& config, const ExperimentData& data, const fs::path& dir,
                       const std::string& command) {
  fs::create_directories(dir);
  write_json(dir / "config.json", experiment_config_to_json(config));
  write_metadata(dir, command);
  RunResult result;
  try {
    result = run(config.ids, data);
  } catch (const RunError& e) {
    logger()->error("{}: {}", dir.string(), e.what());
    write_run(e.partial(), dir, run_metrics(e.partial(), data));
    return {false, e.partial().final_test_accuracy, noise_audit(e.partial().selected_ids(), data.pool)};
  }
  write_run(result, dir, run_metrics(result, data));
  logger()->info("{}: {} test accuracy {:.4f}", dir.string(), to_string(config.ids.method), result.final_test_accuracy);
  return {true, result.final_test_accuracy, noise_audit(result.selected_ids(), data.pool)};
}

}  // namespace

void Overrides::apply(ExperimentConfig& config) const {
  if (seed) config.ids.seed = *seed;
  if (method) config.ids.method = parse_method(*method);
  if (budget) config.ids.budget = *budget;
  if (rate) config.ids.rate = *rate;
  if (tau) config.ids.refresh_period = parse_tau(*tau);
  if (replay) config.ids.replay = parse_replay_sampling(*replay);
  if (normalize_class_count) config.ids.normalize_class_count = *normalize_class_count;
  if (deferred_merge) config.ids.deferred_merge = *deferred_merge;
}

int cmd_generate(const fs::path& spec_file, const fs::path& out, std::optional<std::uint64_t> seed) {
  std::ifstream in(spec_file);
  if (!in) throw ConfigError("cannot read " + spec_file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(spec_file.string() + ": " + e.what());
  }
  SyntheticSourceSpec spec;
  if (j.contains("source")) {
    const auto cfg = parse_experiment_config(j, spec_file.parent_path());
    if (!cfg.source.synthetic) throw ConfigError("generate needs a synthetic source");
    spec = *cfg.source.synthetic;
  } else {
    spec = synthetic_spec_from_json(j);
  }
  if (seed) spec.seed = *seed;

  const auto data = synth_build(spec).data;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto sibling = [&](const std::string& tag) {
    return out.parent_path() / (out.stem().string() + "." + tag + out.extension().string());
  };
  save_embeddings(data.pool, out);
  save_embeddings(data.validation, sibling("validation"));
  save_embeddings(data.test, sibling("test"));
  logger()->info("wrote {} pool examples to {}", data.pool.size(), out.string());
  return kOk;
}

int cmd_run(const fs::path& config_file, const fs::path& out_dir, const Overrides& overrides) {
  auto config = load_experiment_config(config_file);
  overrides.apply(config);
  config.ids.validate();
  const auto data = load_data(config.source);
  const auto outcome = execute_run(config, data, out_dir, "run");
  return outcome.completed ? kOk : kRunFailed;
}

int cmd_sweep(const fs::path& config_file, const fs::path& out_dir, std::size_t jobs, const Overrides& overrides) {
  auto base = load_experiment_config(config_file);
  overrides.apply(base);
  const auto data = load_data(base.source);

  const auto methods = base.sweep.methods.empty() ? std::vector<Method>{base.ids.method} : base.sweep.methods;
  const auto budgets = base.sweep.budgets.empty() ? std::vector<std::size_t>{base.ids.budget} : base.sweep.budgets;
  const auto rates = base.sweep.rates.empty() ? std::vector<double>{base.ids.rate} : base.sweep.rates;
  const auto seeds = base.sweep.seeds.empty() ? std::vector<std::uint64_t>{base.ids.seed} : base.sweep.seeds;

  struct Cell {
    std::string key;
    std::string dir_name;
    ExperimentConfig config;
  };
  std::vector<Cell> cells;
  for (Method m : methods)
    for (std::size_t k : budgets)
      for (double p : rates)
        for (std::uint64_t s : seeds) {
          ExperimentConfig c = base;
          c.ids.method = m;
          c.ids.budget = k;
          c.ids.rate = p;
          c.ids.seed = s;
          c.ids.validate();
          const std::string key =
              std::string(to_string(m)) + "_k" + std::to_string(k) + "_p" + format_double(p);
          cells.push_back({key, key + "_s" + std::to_string(s), std::move(c)});
        }

  fs::create_directories(out_dir);
  write_json(out_dir / "config.json", experiment_config_to_json(base));
  write_metadata(out_dir, "sweep");

  std::vector<RunOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        outcomes[i] = execute_run(cells[i].config, data, out_dir / cells[i].dir_name, "sweep");
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);

  // Per-cell aggregation in grid order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunOutcome*>> groups;
  std::map<std::string, const Cell*> representative;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!groups.contains(cells[i].key)) {
      order.push_back(cells[i].key);
      representative[cells[i].key] = &cells[i];
    }
    groups[cells[i].key].push_back(&outcomes[i]);
  }
  std::ofstream summary(out_dir / "summary.csv", std::ios::trunc);
  summary << "method,budget,rate,runs,completed,mean_accuracy,std_accuracy,mean_noise_fraction\n";
  bool all_completed = true;
  for (const auto& key : order) {
    const auto& group = groups[key];
    const auto& cfg = representative[key]->config.ids;
    std::vector<double> acc;
    double noise_sum = 0.0;
    std::size_t noise_n = 0, completed = 0;
    for (const RunOutcome* o : group) {
      acc.push_back(o->accuracy);
      if (o->completed) ++completed;
      if (o->noise) {
        noise_sum += *o->noise;
        ++noise_n;
      }
    }
    all_completed = all_completed && completed == group.size();
    const double n = static_cast<double>(acc.size());
    double mean = 0.0;
    for (double a : acc) mean += a;
    mean /= n;
    double ss = 0.0;
    for (double a : acc) ss += (a - mean) * (a - mean);
    const double stddev = acc.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    summary << to_string(cfg.method) << ',' << cfg.budget << ',' << format_double(cfg.rate) << ',' << group.size()
            << ',' << completed << ',' << format_double(mean) << ',' << format_double(stddev) << ','
            << (noise_n ? format_double(noise_sum / static_cast<double>(noise_n)) : "NA") << '\n';
  }
  return all_completed ? kOk : kRunFailed;
}

namespace {

struct NamedRun {
  std::string name;
  fs::path dir;
  RunResult result;
};

std::vector<NamedRun> collect_runs(const fs::path& results_dir) {
  std::vector<NamedRun> runs;
  if (fs::exists(results_dir / "result.json")) {
    auto name = fs::absolute(results_dir).lexically_normal().filename().string();
    if (name.empty()) name = fs::absolute(results_dir).lexically_normal().parent_path().filename().string();
    runs.push_back({name, results_dir, read_run(results_dir)});
    return runs;
  }
  if (!fs::is_directory(results_dir)) throw ConfigError(results_dir.string() + " is not a results directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(results_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "result.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) runs.push_back({d.filename().string(), d, read_run(d)});
  if (runs.empty()) throw ConfigError("no runs found under " + results_dir.string());
  return runs;
}

void write_matrix(const fs::path& path, const std::vector<std::string>& names, const SquareMatrix& m) {
  std::ofstream out(path, std::ios::trunc);
  out << "run";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i];
    for (double v : m[i]) out << ',' << format_double(v);
    out << '\n';
  }
}

ExperimentData data_for_run(const NamedRun& run) {
  const auto cfg_path = run.dir / "config.json";
  if (!fs::exists(cfg_path)) throw ConfigError(run.dir.string() + " has no config.json echo");
  return load_data(load_experiment_config(cfg_path).source);
}

}  // namespace

int cmd_analyze(const AnalyzeOptions& options) {
  const auto runs = collect_runs(options.results_dir);
  const fs::path out = options.out_dir ? *options.out_dir : options.results_dir / "analysis";
  fs::create_directories(out);
  int status = kOk;

  if (options.which == "overlap") {
    std::vector<const RunResult*> ptrs;
    std::vector<std::string> names;
    for (const auto& r : runs) {
      ptrs.push_back(&r.result);
      names.push_back(r.name);
    }
    const auto report = overlap_matrix(ptrs, names);
    write_matrix(out / "overlap_selected.csv", report.names, report.selected);
    write_matrix(out / "overlap_seen.csv", report.names, report.seen);
    std::ofstream acc(out / "overlap_accuracy.csv", std::ios::trunc);
    acc << "run,final_test_accuracy\n";
    for (std::size_t i = 0; i < names.size(); ++i) acc << names[i] << ',' << format_double(report.final_accuracy[i]) << '\n';
  } else if (options.which == "traces") {
    for (const auto& r : runs) {
      std::ofstream f(out / ("trace_" + r.name + ".csv"), std::ios::trunc);
      f << "index,step,score_trace,acceptance_rate\n";
      const auto& log = r.result.candidates;
      if (log.empty()) {
        logger()->warn("{}: empty candidate log, trace left empty", r.name);
        status = kWarning;
        continue;
      }
      std::vector<double> trace;
      try {
        trace = score_trace(log, options.window);
      } catch (const std::domain_error& e) {
        logger()->warn("{}: {}", r.name, e.what());
        status = kWarning;
        continue;
      }
      const auto rate = acceptance_rate_series(log, options.window);
      for (std::size_t i = 0; i < log.size(); ++i) {
        f << i << ',' << log[i].step << ',' << format_double(trace[i]) << ',' << format_double(rate[i]) << '\n';
      }
    }
  } else if (options.which == "rankcorr") {
    for (const auto& r : runs) {
      if (!r.result.initial_model) throw ConfigError(r.name + ": missing init_model.pkwt");
      const auto data = data_for_run(r);
      const auto prototypes = compute_prototypes(data.validation);
      const auto probe = sample_probe_pool(data.pool, r.result.initial_ids(), options.probe_size, r.result.config.seed);
      const auto report = rank_correlation_experiment(*r.result.initial_model, probe, prototypes);
      std::ofstream f(out / ("rankcorr_" + r.name + ".csv"), std::ios::trunc);
      f << "method";
      for (const auto& m : report.methods) f << ',' << m;
      f << '\n';
      for (std::size_t i = 0; i < report.methods.size(); ++i) {
        f << report.methods[i];
        for (const auto& v : report.spearman[i]) f << ',' << (v ? format_double(*v) : "NA");
        f << '\n';
      }
    }
  } else if (options.which == "usage") {
    std::ofstream summary(out / "usage_summary.csv", std::ios::trunc);
    summary << "run,examples,mean,variance,stddev\n";
    for (const auto& r : runs) {
      const auto values = r.result.usage_values();
      const auto s = usage_histogram(values);
      summary << r.name << ',' << values.size() << ',' << format_double(s.mean) << ',' << format_double(s.variance)
              << ',' << format_double(s.stddev) << '\n';
      std::ofstream hist(out / ("usage_hist_" + r.name + ".csv"), std::ios::trunc);
      hist << "count,examples\n";
      for (const auto& [count, n] : s.histogram) hist << count << ',' << n << '\n';
    }
  } else if (options.which == "noise") {
    std::ofstream f(out / "noise.csv", std::ios::trunc);
    f << "run,selected_noise_fraction,new_noise_fraction\n";
    for (const auto& r : runs) {
      const auto data = data_for_run(r);
      const auto all = noise_audit(r.result.selected_ids(), data.pool);
      const auto fresh = noise_audit(r.result.new_ids(), data.pool);
      f << r.name << ',' << (all ? format_double(*all) : "NA") << ',' << (fresh ? format_double(*fresh) : "NA") << '\n';
    }
  } else {
    throw ConfigError("unknown analysis '" + options.which + "' (overlap|traces|rankcorr|usage|noise)");
  }
  return status;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Streaming data selection engine and experiment harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto add_overrides = [](CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seed", o.seed, "Run seed");
    cmd->add_option("--method", o.method, "Acquisition method");
    cmd->add_option("--budget", o.budget, "Data budget k");
    cmd->add_option("--rate", o.rate, "Selection rate p in percent");
    cmd->add_option("--tau", o.tau, "Refresh period in model updates, or 'inf'");
    cmd->add_option("--replay", o.replay, "uniform|count_inverse")->check(CLI::IsMember({"uniform", "count_inverse"}));
    cmd->add_option_function<std::string>(
        "--normalize-class-count", [&o](const std::string& v) { o.normalize_class_count = parse_bool(v); },
        "true|false");
    cmd->add_option_function<std::string>(
        "--deferred-merge", [&o](const std::string& v) { o.deferred_merge = parse_bool(v); }, "true|false");
  };

  fs::path gen_config, gen_out;
  std::optional<std::uint64_t> gen_seed;
  auto* gen = app.add_subcommand("generate", "Write a synthetic source as embedding files");
  gen->add_option("--config", gen_config, "Synthetic spec or experiment config (JSON)")->required();
  gen->add_option("--out", gen_out, "Output pool file (.pkem or .csv)")->required();
  gen->add_option("--seed", gen_seed, "Source seed");

  fs::path run_config, run_out;
  Overrides run_overrides;
  auto* run_cmd = app.add_subcommand("run", "Run one incremental selection experiment");
  run_cmd->add_option("--config", run_config, "Experiment config (JSON)")->required();
  run_cmd->add_option("--out", run_out, "Output directory")->required();
  add_overrides(run_cmd, run_overrides);

  fs::path sweep_config, sweep_out;
  std::size_t jobs = 1;
  Overrides sweep_overrides;
  auto* sweep = app.add_subcommand("sweep", "Run a methods x budgets x rates x seeds grid");
  sweep->add_option("--config", sweep_config, "Experiment config (JSON)")->required();
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  add_overrides(sweep, sweep_overrides);

  AnalyzeOptions analyze_opts;
  fs::path analyze_out;
  auto* analyze = app.add_subcommand("analyze", "Emit CSV reports from run outputs");
  analyze->add_option("which", analyze_opts.which, "overlap|traces|rankcorr|usage|noise")
      ->required()
      ->check(CLI::IsMember({"overlap", "traces", "rankcorr", "usage", "noise"}));
  analyze->add_option("--results", analyze_opts.results_dir, "Run or sweep directory")->required();
  analyze->add_option("--out", analyze_out, "Report directory (default <results>/analysis)");
  analyze->add_option("--window", analyze_opts.window, "Rolling window for traces")->check(CLI::PositiveNumber);
  analyze->add_option("--probe-size", analyze_opts.probe_size, "Unseen examples scored by rankcorr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_generate(gen_config, gen_out, gen_seed);
    if (*run_cmd) return cmd_run(run_config, run_out, run_overrides);
    if (*sweep) return cmd_sweep(sweep_config, sweep_out, jobs, sweep_overrides);
    if (*analyze) {
      if (!analyze_out.empty()) analyze_opts.out_dir = analyze_out;
      return cmd_analyze(analyze_opts);
    }
  } catch (const ConfigError& e) {
    logger()->error("{}", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return kRunFailed;
  }
  return kUsage;
}

}  // namespace idslab::cli
