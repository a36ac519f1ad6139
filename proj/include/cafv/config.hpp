#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cafv/context.hpp"

namespace cafv {

// Hyperparameters for the whole pipeline. Serialized as a flat JSON object
// with exactly these keys; unknown keys are rejected on load.
struct TrainConfig {
  std::size_t feature_dim = 512;
  std::size_t noise_dim = 128;
  std::vector<int> interval_set = {-1, 1};
  std::size_t batch_size = 32;
  std::size_t hidden_generator = 4096;
  std::size_t hidden_critic = 4096;
  std::string embedding_mode = "one_hot";
  std::size_t embedding_dim = 16;  // learned_table mode only
  double lr_generator = 1e-4;
  double lr_critic = 1e-4;
  double lr_classifier = 1e-4;
  double classifier_lr_decay = 0.9;
  std::size_t classifier_decay_every = 10;
  std::size_t classifier_epochs = 100;
  std::size_t n_critic = 5;
  std::size_t gan_epochs = 10;
  std::uint64_t seed = 1;
  double lambda1 = 10.0;
  double lambda2 = 10.0;
  double beta = 0.001;

  void validate() const;
  ContextEmbedding make_embedding() const;
};

// JSON round-trip. to_json emits keys in a canonical (alphabetical) order so
// equal configs serialize to byte-identical text.
std::string config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& text);
TrainConfig load_config_file(const std::string& path);

// sha256 of the canonical JSON form.
std::string config_hash(const TrainConfig& cfg);

}  // namespace cafv
