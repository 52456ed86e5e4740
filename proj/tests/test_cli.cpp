#include <doctest.h>

#include <fstream>
#include <string>

#include "idslab/analysis.hpp"
#include "idslab/cli.hpp"
#include "idslab/config.hpp"
#include "idslab/errors.hpp"
#include "idslab/results_io.hpp"
#include "support.hpp"

using namespace idslab;
using namespace idslab::testing;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json small_experiment() {
  return json::parse(R"({
    "source": {"synthetic": {"num_classes": 4, "feature_dim": 6, "pool_size": 400,
                             "validation_per_class": 5, "test_per_class": 20,
                             "separation": 4, "label_noise": 0.2, "seed": 2}},
    "ids": {"budget": 80, "initial_size": 20, "batch_size": 8, "total_updates": 40,
            "tau": 5, "method": "peaks", "seed": 3}
  })");
}

fs::path write_config(const TempDir& dir, const json& j, const std::string& name = "config.json") {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

int invoke(std::vector<std::string> args) {
  std::vector<char*> argv;
  static char name[] = "idslab";
  argv.push_back(name);
  for (auto& a : args) argv.push_back(a.data());
  return cli::main_entry(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config parsing rejects unknown keys and bad types") {
  CHECK_NOTHROW(parse_experiment_config(small_experiment()));
  auto j = small_experiment();
  j["extra"] = 1;
  CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
  j = small_experiment();
  j["ids"]["budgt"] = 5;
  CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
  j = small_experiment();
  j["ids"]["budget"] = "many";
  CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
  j = small_experiment();
  j["source"]["synthetic"]["colour"] = 1;
  CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
  j = small_experiment();
  j["source"]["embeddings"] = json{{"path", "x.pkem"}};
  CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(json{{"ids", json::object()}}), ConfigError);
}

TEST_CASE("config JSON round trip") {
  auto j = small_experiment();
  j["ids"]["tau"] = "inf";
  j["ids"]["replay"] = "count_inverse";
  j["ids"]["normalize_class_count"] = false;
  j["sweep"] = json{{"methods", {"random", "peaks"}}, {"seeds", {1, 2}}};
  auto cfg = parse_experiment_config(j);
  CHECK(cfg.ids.refresh_period == kNeverRefresh);
  CHECK(cfg.ids.replay == ReplaySampling::CountInverse);
  CHECK(cfg.ids.normalize_class_count == false);
  CHECK(cfg.sweep.methods.size() == 2);
  auto again = parse_experiment_config(experiment_config_to_json(cfg));
  CHECK(experiment_config_to_json(again) == experiment_config_to_json(cfg));
  CHECK(ids_config_from_json(ids_config_to_json(cfg.ids)).refresh_period == kNeverRefresh);
}

TEST_CASE("format_double is shortest round trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("write_run and read_run round trip") {
  TempDir dir("runio");
  auto cfg = parse_experiment_config(small_experiment());
  const auto data = load_data(cfg.source);
  RunResult r = run(cfg.ids, data);
  write_run(r, dir.path());
  for (const char* f : {"result.json", "selected.csv", "candidates.csv", "accuracy.csv", "usage.csv", "model.pkwt",
                        "init_model.pkwt"})
    CHECK(fs::exists(dir / f));
  CHECK(read_file(dir / "candidates.csv").rfind("step,id,score,percentile,accepted\n", 0) == 0);
  CHECK(read_file(dir / "accuracy.csv").rfind("update,split,accuracy\n", 0) == 0);
  CHECK(read_file(dir / "usage.csv").rfind("id,count\n", 0) == 0);

  RunResult back = read_run(dir.path());
  CHECK(back.selected_ids() == r.selected_ids());
  CHECK(back.initial_ids() == r.initial_ids());
  CHECK(back.candidates.size() == r.candidates.size());
  CHECK(back.candidates.back().score == r.candidates.back().score);
  CHECK(back.usage == r.usage);
  CHECK(back.final_test_accuracy == r.final_test_accuracy);
  CHECK(back.initial_model->weights() == r.initial_model->weights());
  CHECK(back.config.method == r.config.method);
}

TEST_CASE("cmd_run writes self-describing, reproducible outputs") {
  TempDir dir("cmdrun");
  const auto cfg = write_config(dir, small_experiment());
  CHECK(cli::cmd_run(cfg, dir / "a") == cli::kOk);
  CHECK(cli::cmd_run(cfg, dir / "b") == cli::kOk);
  for (const char* f : {"result.json", "selected.csv", "candidates.csv", "accuracy.csv", "usage.csv", "config.json",
                        "model.pkwt"})
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  CHECK(fs::exists(dir / "a" / "metadata.json"));
  // The echoed config reproduces the run.
  CHECK(cli::cmd_run(dir / "a" / "config.json", dir / "c") == cli::kOk);
  CHECK(read_file(dir / "a" / "selected.csv") == read_file(dir / "c" / "selected.csv"));

  cli::Overrides o;
  o.seed = 9;
  o.method = "el2n";
  CHECK(cli::cmd_run(cfg, dir / "d", o) == cli::kOk);
  auto j = json::parse(read_file(dir / "d" / "result.json"));
  CHECK(j["config"]["method"] == "el2n");
  CHECK(j["config"]["seed"] == 9);
  CHECK(j["metrics"].contains("noise_fraction_selected"));
}

TEST_CASE("cmd_run reports exhaustion with partial logs") {
  TempDir dir("exhaust");
  auto j = small_experiment();
  j["ids"]["budget"] = 500;
  j["ids"]["total_updates"] = 400;
  j["ids"]["method"] = "random";
  j["ids"]["rate"] = 100;
  CHECK(cli::cmd_run(write_config(dir, j), dir / "out") == cli::kRunFailed);
  auto result = json::parse(read_file(dir / "out" / "result.json"));
  CHECK(result["completed"] == false);
  CHECK(count_lines(dir / "out" / "selected.csv") == 401);
}

TEST_CASE("cmd_sweep grid, summary and parallel determinism") {
  TempDir dir("sweep");
  auto j = small_experiment();
  j["sweep"] = json{{"methods", {"random", "peaks"}}, {"budgets", {60, 80}}, {"seeds", {1, 2}}};
  const auto cfg = write_config(dir, j);
  CHECK(cli::cmd_sweep(cfg, dir / "serial", 1) == cli::kOk);
  CHECK(cli::cmd_sweep(cfg, dir / "parallel", 3) == cli::kOk);
  std::size_t runs = 0;
  for (const auto& e : fs::directory_iterator(dir / "serial"))
    if (fs::exists(e.path() / "result.json")) {
      ++runs;
      const auto name = e.path().filename();
      CHECK(read_file(e.path() / "selected.csv") == read_file(dir / "parallel" / name / "selected.csv"));
      CHECK(read_file(e.path() / "accuracy.csv") == read_file(dir / "parallel" / name / "accuracy.csv"));
    }
  CHECK(runs == 8);
  CHECK(fs::exists(dir / "serial" / "peaks_k80_p20_s2" / "result.json"));
  CHECK(count_lines(dir / "serial" / "summary.csv") == 5);
  CHECK(read_file(dir / "serial" / "summary.csv") == read_file(dir / "parallel" / "summary.csv"));
}

TEST_CASE("cmd_generate round trips through the loader") {
  TempDir dir("gen");
  auto j = small_experiment();
  const auto cfg = write_config(dir, j);
  CHECK(cli::cmd_generate(cfg, dir / "data" / "pool.pkem") == cli::kOk);
  CHECK(cli::cmd_generate(cfg, dir / "data2" / "pool.pkem") == cli::kOk);
  CHECK(read_file(dir / "data" / "pool.pkem") == read_file(dir / "data2" / "pool.pkem"));
  Dataset pool = load_embeddings(dir / "data" / "pool.pkem");
  CHECK(pool.size() == 400);
  CHECK(pool.num_classes == 4);
  CHECK(load_embeddings(dir / "data" / "pool.validation.pkem").size() == 20);
  CHECK(load_embeddings(dir / "data" / "pool.test.pkem").size() == 80);

  // A run on the written files matches a run on the in-memory source.
  json emb = small_experiment();
  emb["source"] = json{{"embeddings",
                        {{"path", "data/pool.pkem"},
                         {"validation_path", "data/pool.validation.pkem"},
                         {"test_path", "data/pool.test.pkem"}}}};
  CHECK(cli::cmd_run(write_config(dir, emb, "emb.json"), dir / "file_run") == cli::kOk);
  CHECK(cli::cmd_run(cfg, dir / "mem_run") == cli::kOk);
  CHECK(read_file(dir / "file_run" / "selected.csv") == read_file(dir / "mem_run" / "selected.csv"));

  CHECK(cli::cmd_generate(cfg, dir / "csv" / "pool.csv", 5) == cli::kOk);
  CHECK(load_embeddings(dir / "csv" / "pool.csv").size() == 400);
}

TEST_CASE("cmd_analyze reports") {
  TempDir dir("analyze");
  auto j = small_experiment();
  j["sweep"] = json{{"methods", {"random", "peaks"}}};
  CHECK(cli::cmd_sweep(write_config(dir, j), dir / "sw", 1) == cli::kOk);

  cli::AnalyzeOptions o;
  o.results_dir = dir / "sw";
  for (const char* which : {"overlap", "traces", "rankcorr", "usage", "noise"}) {
    o.which = which;
    CAPTURE(which);
    CHECK(cli::cmd_analyze(o) == cli::kOk);
  }
  const auto out = dir / "sw" / "analysis";
  CHECK(count_lines(out / "overlap_selected.csv") == 3);
  CHECK(fs::exists(out / "trace_peaks_k80_p20_s3.csv"));
  CHECK(fs::exists(out / "usage_summary.csv"));
  CHECK(fs::exists(out / "noise.csv"));

  // rankcorr agrees with a direct library call.
  const auto run_dir = dir / "sw" / "peaks_k80_p20_s3";
  auto r = read_run(run_dir);
  auto cfg = load_experiment_config(run_dir / "config.json");
  auto data = load_data(cfg.source);
  auto probe = sample_probe_pool(data.pool, r.initial_ids(), 1000, r.config.seed);
  auto rep = rank_correlation_experiment(*r.initial_model, probe, compute_prototypes(data.validation));
  const std::string csv = read_file(out / "rankcorr_peaks_k80_p20_s3.csv");
  CHECK(csv.find(format_double(*rep.spearman[0][2])) != std::string::npos);

  o.which = "overlap";
  o.results_dir = run_dir;
  o.out_dir = dir / "single";
  CHECK(cli::cmd_analyze(o) == cli::kOk);
  CHECK(count_lines(dir / "single" / "overlap_selected.csv") == 2);

  o.which = "bogus";
  CHECK_THROWS_AS(cli::cmd_analyze(o), ConfigError);
}

TEST_CASE("traces on an empty log warn") {
  TempDir dir("empty");
  RunResult r;
  r.completed = true;
  write_run(r, dir / "run");
  cli::AnalyzeOptions o;
  o.which = "traces";
  o.results_dir = dir / "run";
  CHECK(cli::cmd_analyze(o) == cli::kWarning);
  CHECK(count_lines(dir / "run" / "analysis" / "trace_run.csv") == 1);
}

TEST_CASE("command-line entry point") {
  TempDir dir("main");
  const auto cfg = write_config(dir, small_experiment()).string();
  CHECK(invoke({"run", "--config", cfg, "--out", (dir / "r").string(), "--tau", "inf", "--replay", "count_inverse",
                "--normalize-class-count", "false"}) == cli::kOk);
  auto j = json::parse(read_file(dir / "r" / "result.json"));
  CHECK(j["config"]["tau"] == "inf");
  CHECK(j["config"]["replay"] == "count_inverse");
  CHECK(invoke({"run", "--config", cfg}) == cli::kUsage);
  CHECK(invoke({"run", "--config", (dir / "missing.json").string(), "--out", (dir / "x").string()}) == cli::kUsage);
  CHECK(invoke({"run", "--config", cfg, "--out", (dir / "y").string(), "--tau", "0"}) == cli::kUsage);
  CHECK(invoke({"analyze", "usage", "--results", (dir / "r").string()}) == cli::kOk);
  CHECK(invoke({"frobnicate"}) == cli::kUsage);
}
