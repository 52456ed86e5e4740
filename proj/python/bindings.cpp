#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <random>

#include "idslab/analysis.hpp"
#include "idslab/cli.hpp"
#include "idslab/errors.hpp"
#include "idslab/harness.hpp"
#include "idslab/random.hpp"
#include "idslab/results_io.hpp"

namespace py = pybind11;
using namespace idslab;

namespace {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

FeatureMatrix dataset_features(const Dataset& d) {
  FeatureMatrix out(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.feature_dim));
  for (std::size_t i = 0; i < d.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = d.examples[i].features.transpose();
  return out;
}

Dataset dataset_from_arrays(const FeatureMatrix& features, const std::vector<ClassIndex>& labels,
                            std::size_t num_classes, std::optional<std::vector<ExampleId>> ids,
                            std::optional<std::vector<std::int64_t>> clean_labels) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) throw DimensionError("labels and features disagree on n");
  if (ids && ids->size() != n) throw DimensionError("ids and features disagree on n");
  if (clean_labels && clean_labels->size() != n) throw DimensionError("clean_labels and features disagree on n");
  Dataset d;
  d.num_classes = num_classes;
  d.feature_dim = static_cast<std::size_t>(features.cols());
  d.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.id = ids ? (*ids)[i] : i;
    e.label = labels[i];
    e.features = features.row(static_cast<Eigen::Index>(i)).transpose();
    if (clean_labels && (*clean_labels)[i] >= 0) e.clean_label = static_cast<ClassIndex>((*clean_labels)[i]);
    d.examples.push_back(std::move(e));
  }
  d.validate();
  return d;
}

template <class T>
std::vector<T> column(const Dataset& d, T (*get)(const Example&)) {
  std::vector<T> out;
  out.reserve(d.size());
  for (const auto& e : d.examples) out.push_back(get(e));
  return out;
}

py::dict candidates_dict(const RunResult& r) {
  std::vector<std::size_t> step;
  std::vector<ExampleId> id;
  std::vector<double> score, percentile;
  std::vector<bool> accepted;
  for (const auto& c : r.candidates) {
    step.push_back(c.step);
    id.push_back(c.id);
    score.push_back(c.score);
    percentile.push_back(c.percentile);
    accepted.push_back(c.accepted);
  }
  py::dict out;
  out["step"] = step;
  out["id"] = id;
  out["score"] = score;
  out["percentile"] = percentile;
  out["accepted"] = accepted;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the idslab package";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<RunError>(m, "RunError", PyExc_RuntimeError);

  py::enum_<Method>(m, "Method")
      .value("RANDOM", Method::Random)
      .value("EXACT_DELTA", Method::ExactDelta)
      .value("PEAKS_V", Method::PeaksV)
      .value("PEAKS", Method::Peaks)
      .value("EL2N", Method::EL2N)
      .value("GRAND", Method::GraNd)
      .value("UNCERTAINTY", Method::Uncertainty)
      .value("WRONG_LOW_CONF", Method::WrongLowConf)
      .value("EASY_EMB", Method::EasyEmb)
      .value("MODERATE_EMB", Method::ModerateEmb)
      .value("HARD_EMB", Method::HardEmb)
      .def_static("parse", [](const std::string& s) { return parse_method(s); })
      .def_property_readonly("canonical_name", [](Method x) { return std::string(to_string(x)); });

  py::enum_<PrototypeSource>(m, "PrototypeSource")
      .value("VALIDATION_MEANS", PrototypeSource::ValidationMeans)
      .value("READOUT_WEIGHTS", PrototypeSource::ReadoutWeights);

  py::enum_<ReplaySampling>(m, "ReplaySampling")
      .value("UNIFORM", ReplaySampling::Uniform)
      .value("COUNT_INVERSE", ReplaySampling::CountInverse);

  // numerics
  m.def("softmax", &softmax, py::arg("logits"));
  m.def("percentile_rank", [](double s, const std::vector<double>& c) { return percentile_rank(s, c); },
        py::arg("score"), py::arg("cache"));
  m.def("spearman", [](const std::vector<double>& a, const std::vector<double>& b) { return spearman(a, b); });
  m.def("cosine_similarity", &cosine_similarity);
  m.def("jaccard", &jaccard);
  m.def("prediction_error", &prediction_error, py::arg("probs"), py::arg("label"));

  // data
  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&dataset_from_arrays), py::arg("features"), py::arg("labels"), py::arg("num_classes"),
           py::arg("ids") = py::none(), py::arg("clean_labels") = py::none())
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_readonly("feature_dim", &Dataset::feature_dim)
      .def("__len__", &Dataset::size)
      .def_property_readonly("features", &dataset_features)
      .def_property_readonly("labels", [](const Dataset& d) { return column<ClassIndex>(d, [](const Example& e) { return e.label; }); })
      .def_property_readonly("ids", [](const Dataset& d) { return column<ExampleId>(d, [](const Example& e) { return e.id; }); })
      .def_property_readonly("clean_labels", [](const Dataset& d) {
        return column<std::int64_t>(d, [](const Example& e) {
          return e.clean_label ? static_cast<std::int64_t>(*e.clean_label) : std::int64_t{-1};
        });
      });

  py::class_<ExperimentData>(m, "ExperimentData")
      .def(py::init([](Dataset pool, Dataset validation, Dataset test) {
             return ExperimentData{std::move(pool), std::move(validation), std::move(test)};
           }),
           py::arg("pool"), py::arg("validation"), py::arg("test"))
      .def_readonly("pool", &ExperimentData::pool)
      .def_readonly("validation", &ExperimentData::validation)
      .def_readonly("test", &ExperimentData::test);

  py::class_<SyntheticSourceSpec>(m, "SyntheticSourceSpec")
      .def(py::init<>())
      .def_readwrite("num_classes", &SyntheticSourceSpec::num_classes)
      .def_readwrite("feature_dim", &SyntheticSourceSpec::feature_dim)
      .def_readwrite("pool_size", &SyntheticSourceSpec::pool_size)
      .def_readwrite("validation_per_class", &SyntheticSourceSpec::validation_per_class)
      .def_readwrite("test_per_class", &SyntheticSourceSpec::test_per_class)
      .def_readwrite("power_law_alpha", &SyntheticSourceSpec::power_law_alpha)
      .def_readwrite("cluster_spread", &SyntheticSourceSpec::cluster_spread)
      .def_readwrite("separation", &SyntheticSourceSpec::separation)
      .def_readwrite("label_noise", &SyntheticSourceSpec::label_noise)
      .def_readwrite("seed", &SyntheticSourceSpec::seed);

  m.def("synth_build", [](const SyntheticSourceSpec& s) { return synth_build(s).data; }, py::arg("spec"));
  m.def("load_embeddings", &load_embeddings, py::arg("path"));
  m.def("save_embeddings", &save_embeddings, py::arg("dataset"), py::arg("path"));

  // model
  py::class_<LinearSoftmaxModel>(m, "LinearSoftmaxModel")
      .def(py::init<std::size_t, std::size_t>(), py::arg("num_classes"), py::arg("feature_dim"))
      .def(py::init<Matrix>(), py::arg("weights"))
      .def_property_readonly("num_classes", &LinearSoftmaxModel::num_classes)
      .def_property_readonly("feature_dim", &LinearSoftmaxModel::feature_dim)
      .def_property_readonly("weights", &LinearSoftmaxModel::weights)
      .def("logits", &LinearSoftmaxModel::logits)
      .def("probs", [](const LinearSoftmaxModel& self, const Vector& x) { return self.forward(x).probs; })
      .def(
          "sgd_step",
          [](LinearSoftmaxModel& self, const FeatureMatrix& features, const std::vector<ClassIndex>& labels, double lr) {
            if (labels.size() != static_cast<std::size_t>(features.rows()))
              throw DimensionError("labels and features disagree on batch size");
            std::vector<Vector> rows;
            for (Eigen::Index i = 0; i < features.rows(); ++i) rows.push_back(features.row(i).transpose());
            std::vector<LabeledView> batch;
            for (std::size_t i = 0; i < rows.size(); ++i) batch.push_back({&rows[i], labels[i]});
            self.sgd_batch_update(batch, lr);
          },
          py::arg("features"), py::arg("labels"), py::arg("lr"))
      .def("accuracy", [](const LinearSoftmaxModel& self, const Dataset& d) { return evaluate_accuracy(self, d.views()); });

  // scoring
  py::class_<ClassPrototypes>(m, "ClassPrototypes")
      .def("has_class", &ClassPrototypes::has_class)
      .def("mean", &ClassPrototypes::mean);
  m.def("compute_prototypes", &compute_prototypes, py::arg("validation"));
  m.def("exact_logit_delta", &exact_logit_delta, py::arg("model"), py::arg("phi_p"), py::arg("label"), py::arg("phi_v"));
  m.def("score_exact_delta", &score_exact_delta, py::arg("model"), py::arg("phi"), py::arg("label"), py::arg("prototypes"));
  m.def("score_peaks_v", &score_peaks_v, py::arg("model"), py::arg("phi"), py::arg("label"), py::arg("prototypes"));
  m.def("score_peaks", &score_peaks, py::arg("model"), py::arg("phi"), py::arg("label"));
  m.def(
      "score",
      [](Method method, const LinearSoftmaxModel& model, const Vector& phi, ClassIndex label,
         const ClassPrototypes* prototypes, PrototypeSource source, std::uint64_t seed) {
        auto rng = make_rng(seed, Stream::RandomScores);
        return score_candidate(method, ScoringContext{&model, prototypes, source}, phi, label, rng);
      },
      py::arg("method"), py::arg("model"), py::arg("phi"), py::arg("label"), py::arg("prototypes") = nullptr,
      py::arg("prototype_source") = PrototypeSource::ReadoutWeights, py::arg("seed") = 0);

  // harness
  py::class_<IDSConfig>(m, "IDSConfig")
      .def(py::init<>())
      .def_readwrite("budget", &IDSConfig::budget)
      .def_readwrite("initial_size", &IDSConfig::initial_size)
      .def_readwrite("batch_size", &IDSConfig::batch_size)
      .def_readwrite("delta", &IDSConfig::delta)
      .def_readwrite("total_updates", &IDSConfig::total_updates)
      .def_readwrite("init_updates", &IDSConfig::init_updates)
      .def_readwrite("lr", &IDSConfig::lr)
      .def_readwrite("final_lr_decay", &IDSConfig::final_lr_decay)
      .def_readwrite("rate", &IDSConfig::rate)
      .def_property(
          "tau",
          [](const IDSConfig& c) -> std::optional<std::size_t> {
            if (c.refresh_period == kNeverRefresh) return std::nullopt;
            return c.refresh_period;
          },
          [](IDSConfig& c, std::optional<std::size_t> t) { c.refresh_period = t ? *t : kNeverRefresh; },
          "Refresh period in model updates; None disables refresh.")
      .def_readwrite("method", &IDSConfig::method)
      .def_readwrite("normalize_class_count", &IDSConfig::normalize_class_count)
      .def_readwrite("prototype_source", &IDSConfig::prototype_source)
      .def_readwrite("replay", &IDSConfig::replay)
      .def_readwrite("deferred_merge", &IDSConfig::deferred_merge)
      .def_readwrite("candidate_batch_size", &IDSConfig::candidate_batch_size)
      .def_readwrite("eval_every", &IDSConfig::eval_every)
      .def_readwrite("stall_limit", &IDSConfig::stall_limit)
      .def_readwrite("seed", &IDSConfig::seed)
      .def_property_readonly("resolved_delta", &IDSConfig::resolved_delta)
      .def("validate", &IDSConfig::validate);

  m.def("auto_delta", &auto_delta, py::arg("budget"), py::arg("initial_size"), py::arg("total_updates"));

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("completed", &RunResult::completed)
      .def_readonly("error", &RunResult::error)
      .def_readonly("delta", &RunResult::delta)
      .def_readonly("init_updates", &RunResult::init_updates)
      .def_readonly("selection_updates", &RunResult::selection_updates)
      .def_readonly("finetune_updates", &RunResult::finetune_updates)
      .def_readonly("refresh_count", &RunResult::refresh_count)
      .def_readonly("final_test_accuracy", &RunResult::final_test_accuracy)
      .def_readonly("final_validation_accuracy", &RunResult::final_validation_accuracy)
      .def_readonly("class_counts", &RunResult::class_counts)
      .def_readonly("initial_model", &RunResult::initial_model)
      .def_readonly("final_model", &RunResult::final_model)
      .def_property_readonly("selected_ids", [](const RunResult& r) {
        std::vector<ExampleId> out;
        for (const auto& s : r.selected) out.push_back(s.id);
        return out;
      })
      .def_property_readonly("initial_ids", &RunResult::initial_ids)
      .def_property_readonly("new_ids", &RunResult::new_ids)
      .def_property_readonly("usage", [](const RunResult& r) {
        std::map<ExampleId, std::size_t> out(r.usage.begin(), r.usage.end());
        return out;
      })
      .def_property_readonly("accuracy_curve", [](const RunResult& r) {
        std::vector<std::tuple<std::size_t, std::string, double>> out;
        for (const auto& a : r.accuracy_curve) out.emplace_back(a.update, a.split, a.accuracy);
        return out;
      })
      .def_property_readonly("candidates", &candidates_dict)
      .def("tail_acceptance_rate",
           [](const RunResult& r, double fraction) { return tail_acceptance_rate(r.candidates, fraction); },
           py::arg("fraction") = 0.25);

  m.def(
      "run",
      [](const IDSConfig& config, const ExperimentData& data, bool raise_on_error) {
        py::gil_scoped_release release;
        try {
          return run(config, data);
        } catch (const RunError& e) {
          if (raise_on_error) throw;
          return e.partial();
        }
      },
      py::arg("config"), py::arg("data"), py::arg("raise_on_error") = true,
      "Runs all three phases. With raise_on_error=False a failed run returns its partial result.");

  m.def("write_run", [](const RunResult& r, const std::filesystem::path& dir) { write_run(r, dir); });
  m.def("read_run", &read_run, py::arg("dir"));

  // analysis
  m.def("sample_probe_pool", &sample_probe_pool, py::arg("pool"), py::arg("exclude"), py::arg("size"), py::arg("seed"));
  m.def(
      "rank_correlation_experiment",
      [](const LinearSoftmaxModel& model, const Dataset& pool, const ClassPrototypes& protos) {
        auto rep = rank_correlation_experiment(model, pool, protos);
        py::dict out;
        out["methods"] = rep.methods;
        out["scores"] = rep.scores;
        out["spearman"] = rep.spearman;
        return out;
      },
      py::arg("model"), py::arg("pool"), py::arg("prototypes"));
  m.def("usage_histogram", [](const std::vector<double>& counts) {
    auto s = usage_histogram(counts);
    py::dict out;
    out["histogram"] = s.histogram;
    out["mean"] = s.mean;
    out["variance"] = s.variance;
    out["stddev"] = s.stddev;
    return out;
  });
  m.def("tail_acceptance_rate", [](const std::vector<bool>& accepted, double fraction) {
    std::vector<CandidateRecord> log;
    for (bool a : accepted) log.push_back({0, 0, 0.0, 0.0, a});
    return tail_acceptance_rate(log, fraction);
  }, py::arg("accepted"), py::arg("fraction") = 0.25);
  m.def("noise_audit", &noise_audit, py::arg("selected"), py::arg("dataset"));

  m.def(
      "cli_main",
      [](std::vector<std::string> args) {
        std::vector<char*> argv;
        static char name[] = "idslab";
        argv.push_back(name);
        for (auto& a : args) argv.push_back(a.data());
        return cli::main_entry(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line tool in-process and returns its exit code.");
}
