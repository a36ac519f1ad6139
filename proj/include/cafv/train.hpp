#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cafv/checkpoint.hpp"
#include "cafv/config.hpp"
#include "cafv/data.hpp"
#include "cafv/losses.hpp"
#include "cafv/models.hpp"
#include "cafv/rng.hpp"

namespace cafv {

// Step-decayed learning rate: base * decay^(epoch / every).
double lr_for_epoch(double base, double decay, std::size_t every, std::size_t epoch);

struct ClassifierResult {
  ClassifierSpec spec;
  ParamStore params;  // holds spec.w() / spec.b(), trainable
  double train_accuracy = 0.0;
  std::vector<double> epoch_losses;        // mean cross-entropy per epoch
  std::map<int, std::size_t> class_counts; // training counts per label
};

// Softmax classifier trained with Adam on cross-entropy; the learning rate
// starts at cfg.lr_classifier and decays by cfg.classifier_lr_decay every
// cfg.classifier_decay_every epochs. Streams "cls-init" and "cls-data"
// derive from cfg.seed, so a fixed seed fixes the weights.
ClassifierResult pretrain_classifier(const Dataset& real, const TrainConfig& cfg);

// Same recipe on the union of real records and synthetic ones; with an empty
// synthetic list this is exactly pretrain_classifier.
ClassifierResult train_final_classifier(const Dataset& real,
                                        const std::vector<FeatureRecord>& synthetic,
                                        const TrainConfig& cfg);

// Copies trained classifier weights into the bundle's frozen slot.
void install_classifier(ModelBundle& bundle, const ClassifierResult& classifier);

// One unpaired two-class batch: X holds class s_x, Y holds class s_y, and
// c.delta = s_y - s_x is drawn from the realizable intervals.
struct PairBatch {
  Tensor f_x;  // [batch, d_f]
  Tensor f_y;
  int s_x = 0;
  int s_y = 0;
  ContextInterval c{0};
  std::vector<std::size_t> rows_x;  // record indices backing each row
  std::vector<std::size_t> rows_y;
};

// Draws a delta uniformly from the deltas realized by some class pair, then
// a class pair uniformly among those realizing it, then instances uniformly
// (without replacement, falling back to replacement when the class is
// smaller than the batch). Throws when no class pair realizes any interval.
PairBatch sample_pair_batch(const Dataset& dataset, const std::vector<int>& interval_set,
                            std::size_t batch_size, RngStream& rng);

// Keeps gradients whose name starts with one of the prefixes.
GradMap filter_grads(const GradMap& grads, const std::vector<std::string>& prefixes);

struct GanResult {
  ModelBundle bundle;
  std::vector<LossBreakdown> history;  // one row per generator step
  TrainState state;                    // counters + RNG engine states at exit
};

// Alternating WGAN loop: per generator step, n_critic critic updates (each
// on a fresh pair batch, generators detached) followed by one update of the
// generator-side parameters (both generators plus a learned embedding
// table). Plain SGD on both sides. Streams "data", "noise" and "alpha"
// derive from cfg.seed. With halt_after_generator_steps > 0 the loop stops
// early at that absolute step count and the result can be checkpointed and
// resumed bit-exactly.
GanResult train_gan(const Dataset& train, const ClassifierResult& classifier,
                    const TrainConfig& cfg, std::uint64_t halt_after_generator_steps = 0);

// Picks the loop up from a checkpoint written with the state of a previous
// train_gan/continue_gan call, on the same dataset.
GanResult continue_gan(const Checkpoint& ckpt, const Dataset& train,
                       std::uint64_t halt_after_generator_steps = 0);

// Translates uniformly drawn source samples one interval step into the
// target class: f = G(f_source, z, c) with c.delta = target - source.
// Records carry the target label and (source id, delta) provenance; ids
// continue after the dataset's largest id.
std::vector<FeatureRecord> synthesize_features(const ModelBundle& bundle,
                                               const Dataset& dataset, int target_label,
                                               std::size_t count, RngStream& rng);

}  // namespace cafv
