#include "cafv/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "cafv/errors.hpp"
#include "cafv/log.hpp"
#include "json.hpp"

namespace cafv {

std::vector<Prediction> predict_dataset(const ClassifierResult& classifier,
                                        const Dataset& data) {
  std::vector<Prediction> out;
  out.reserve(data.size());
  for (const FeatureRecord& r : data.records) {
    out.push_back({classifier_predict(classifier.params, classifier.spec,
                                      Tensor::vec(r.f)),
                   r.label});
  }
  return out;
}

std::map<int, Tensor> prototype_map(const SyntheticBenchmark& bench) {
  std::map<int, Tensor> out;
  for (std::size_t k = 0; k < bench.labels.size(); ++k) {
    out.emplace(bench.labels[k], bench.prototypes[k]);
  }
  return out;
}

namespace {

double distance(const std::vector<double>& f, const Tensor& proto) {
  double sq = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double d = f[j] - proto.data[j];
    sq += d * d;
  }
  return std::sqrt(sq);
}

}  // namespace

SynthesisQuality synthesis_quality(const ModelBundle& bundle, const Dataset& dataset,
                                   const std::map<int, Tensor>& prototypes,
                                   int target_label, std::size_t count,
                                   const ClassifierResult& classifier, RngStream& rng) {
  if (prototypes.count(target_label) == 0) {
    throw ValidationError("no oracle prototype for label " + std::to_string(target_label));
  }
  const auto records = synthesize_features(bundle, dataset, target_label, count, rng);

  SynthesisQuality q;
  q.target_label = target_label;
  q.count = records.size();
  const Tensor& mu_target = prototypes.at(target_label);
  const std::size_t target_idx = classifier.spec.index_of_label(target_label);
  std::size_t closer = 0, ranked = 0;
  for (const FeatureRecord& r : records) {
    const int source = target_label - r.prov.delta;
    const auto mu_source = prototypes.find(source);
    if (mu_source == prototypes.end()) {
      throw ValidationError("no oracle prototype for source label " +
                            std::to_string(source));
    }
    if (distance(r.f, mu_target) < distance(r.f, mu_source->second)) ++closer;

    const Tensor probs = classifier_probs(classifier.params, classifier.spec,
                                          Tensor({1, r.f.size()}, r.f));
    const std::size_t source_idx = classifier.spec.index_of_label(source);
    if (probs.data[target_idx] > probs.data[source_idx]) ++ranked;
  }
  q.prototype_fraction = static_cast<double>(closer) / static_cast<double>(q.count);
  q.classifier_fraction = static_cast<double>(ranked) / static_cast<double>(q.count);
  return q;
}

ExperimentResult augmentation_experiment(const Dataset& train, const Dataset& test,
                                         const std::vector<int>& rare_labels,
                                         const TrainConfig& cfg,
                                         std::size_t synth_per_class) {
  cfg.validate();
  if (test.size() == 0) throw ValidationError("experiment needs a non-empty test set");
  const std::vector<int> train_labels = train.label_set();
  for (int label : rare_labels) {
    if (!std::binary_search(train_labels.begin(), train_labels.end(), label)) {
      throw ValidationError("rare label " + std::to_string(label) +
                            " has no training samples");
    }
  }

  ExperimentResult result;
  result.rare_labels = rare_labels;
  std::sort(result.rare_labels.begin(), result.rare_labels.end());
  result.seed = cfg.seed;
  result.synth_per_class = synth_per_class;
  result.config_hash = config_hash(cfg);

  log_info("experiment: training baseline classifier");
  const ClassifierResult baseline_cls = pretrain_classifier(train, cfg);
  result.baseline = compute_metrics(predict_dataset(baseline_cls, test));

  if (synth_per_class == 0) {
    result.augmented = result.baseline;
  } else {
    log_info("experiment: training the translation networks");
    const GanResult gan = train_gan(train, baseline_cls, cfg);
    RngStream synth_rng(cfg.seed, "synth");
    std::vector<FeatureRecord> synth;
    for (int label : result.rare_labels) {
      auto batch =
          synthesize_features(gan.bundle, train, label, synth_per_class, synth_rng);
      // Each synthesis call numbers its records from the same base; keep the
      // union collision-free by renumbering across classes.
      const std::size_t offset = synth.size();
      for (FeatureRecord& r : batch) {
        r.id += offset;
        synth.push_back(std::move(r));
      }
    }
    log_info("experiment: retraining on " + std::to_string(synth.size()) +
             " synthetic records");
    const ClassifierResult augmented_cls = train_final_classifier(train, synth, cfg);
    result.augmented = compute_metrics(predict_dataset(augmented_cls, test));
  }

  for (int label : result.rare_labels) {
    RareClassDelta d;
    d.label = label;
    const auto f1_of = [label](const MetricsReport& rep) {
      const auto it = rep.per_class_f1.find(label);
      return it == rep.per_class_f1.end() ? 0.0 : it->second;
    };
    d.f1_baseline = f1_of(result.baseline);
    d.f1_augmented = f1_of(result.augmented);
    d.in_test = result.baseline.support.count(label) > 0;
    if (d.in_test) {
      d.mae_baseline = result.baseline.per_class_mae.at(label);
      d.mae_augmented = result.augmented.per_class_mae.at(label);
      d.rmse_baseline = result.baseline.per_class_rmse.at(label);
      d.rmse_augmented = result.augmented.per_class_rmse.at(label);
    }
    result.rare.push_back(d);
  }
  return result;
}

double rare_macro_f1(const MetricsReport& report, const std::vector<int>& rare_labels) {
  if (rare_labels.empty()) throw ValidationError("rare label list is empty");
  double sum = 0.0;
  for (int label : rare_labels) {
    const auto it = report.per_class_f1.find(label);
    if (it != report.per_class_f1.end()) sum += it->second;
  }
  return sum / static_cast<double>(rare_labels.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string experiment_to_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["seed"] = result.seed;
  j["config_hash"] = result.config_hash;
  j["synth_per_class"] = result.synth_per_class;
  j["rare_labels"] = result.rare_labels;
  j["baseline"] = nlohmann::json::parse(metrics_to_json(result.baseline));
  j["augmented"] = nlohmann::json::parse(metrics_to_json(result.augmented));
  j["rare_macro_f1_baseline"] = rare_macro_f1(result.baseline, result.rare_labels);
  j["rare_macro_f1_augmented"] = rare_macro_f1(result.augmented, result.rare_labels);
  nlohmann::json rare = nlohmann::json::array();
  for (const RareClassDelta& d : result.rare) {
    nlohmann::json entry;
    entry["label"] = d.label;
    entry["f1_baseline"] = d.f1_baseline;
    entry["f1_augmented"] = d.f1_augmented;
    if (d.in_test) {
      entry["mae_baseline"] = d.mae_baseline;
      entry["mae_augmented"] = d.mae_augmented;
      entry["rmse_baseline"] = d.rmse_baseline;
      entry["rmse_augmented"] = d.rmse_augmented;
    }
    rare.push_back(entry);
  }
  j["rare_classes"] = rare;
  return j.dump(2) + "\n";
}

namespace {

std::string dtos(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string experiment_table_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "method,metric";
  for (const RareClassDelta& d : result.rare) out << ',' << d.label;
  out << "\n";
  const auto row = [&](const char* method, const char* metric, auto value_of) {
    out << method << ',' << metric;
    for (const RareClassDelta& d : result.rare) {
      out << ',';
      const auto [value, present] = value_of(d);
      if (present) out << dtos(value);
    }
    out << "\n";
  };
  using VP = std::pair<double, bool>;
  row("baseline", "f1", [](const RareClassDelta& d) { return VP{d.f1_baseline, true}; });
  row("augmented", "f1", [](const RareClassDelta& d) { return VP{d.f1_augmented, true}; });
  row("baseline", "mae",
      [](const RareClassDelta& d) { return VP{d.mae_baseline, d.in_test}; });
  row("augmented", "mae",
      [](const RareClassDelta& d) { return VP{d.mae_augmented, d.in_test}; });
  row("baseline", "rmse",
      [](const RareClassDelta& d) { return VP{d.rmse_baseline, d.in_test}; });
  row("augmented", "rmse",
      [](const RareClassDelta& d) { return VP{d.rmse_augmented, d.in_test}; });
  return out.str();
}

}  // namespace cafv
