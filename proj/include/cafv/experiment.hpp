#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cafv/config.hpp"
#include "cafv/data.hpp"
#include "cafv/metrics.hpp"
#include "cafv/models.hpp"
#include "cafv/train.hpp"

namespace cafv {

// Predicted/true label pairs for every record, in dataset order.
std::vector<Prediction> predict_dataset(const ClassifierResult& classifier,
                                        const Dataset& data);

// Oracle prototype per label for the synthetic benchmark.
std::map<int, Tensor> prototype_map(const SyntheticBenchmark& bench);

struct SynthesisQuality {
  int target_label = 0;
  std::size_t count = 0;
  // Fraction of synthesized vectors lying closer to the target prototype
  // than to their source's prototype.
  double prototype_fraction = 0.0;
  // Fraction where the pretrained classifier puts more probability on the
  // target label than on the source label.
  double classifier_fraction = 0.0;
};

// Synthesizes `count` features for the target and scores them against the
// geometric oracle and the classifier ranking. Diagnostic only: no
// thresholds are applied here.
SynthesisQuality synthesis_quality(const ModelBundle& bundle, const Dataset& dataset,
                                   const std::map<int, Tensor>& prototypes,
                                   int target_label, std::size_t count,
                                   const ClassifierResult& classifier, RngStream& rng);

struct RareClassDelta {
  int label = 0;
  bool in_test = false;  // error stats exist only for labels present in truth
  double f1_baseline = 0.0;
  double f1_augmented = 0.0;
  double mae_baseline = 0.0;
  double mae_augmented = 0.0;
  double rmse_baseline = 0.0;
  double rmse_augmented = 0.0;
};

struct ExperimentResult {
  MetricsReport baseline;
  MetricsReport augmented;
  std::vector<RareClassDelta> rare;  // ascending label order
  std::vector<int> rare_labels;
  std::uint64_t seed = 0;
  std::size_t synth_per_class = 0;
  std::string config_hash;
};

// Runs the pipeline twice on a shared train/test split and seed: a baseline
// classifier on real features only, and an augmented classifier retrained
// on real features plus synth_per_class generated records per rare label
// (GAN trained once, synthesis stream "synth"). A zero count skips the GAN
// and reproduces the baseline bit-exactly.
ExperimentResult augmentation_experiment(const Dataset& train, const Dataset& test,
                                         const std::vector<int>& rare_labels,
                                         const TrainConfig& cfg,
                                         std::size_t synth_per_class = 200);

// Unweighted mean f1 over the given labels; labels never predicted and
// absent from truth count as 0.
double rare_macro_f1(const MetricsReport& report, const std::vector<int>& rare_labels);

double median(std::vector<double> values);

std::string experiment_to_json(const ExperimentResult& result);
// method x {f1, mae, rmse} x rare class, two rows per metric.
std::string experiment_table_csv(const ExperimentResult& result);

}  // namespace cafv
