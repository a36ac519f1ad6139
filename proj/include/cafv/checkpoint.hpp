#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cafv/config.hpp"
#include "cafv/models.hpp"

namespace cafv {

// Checkpoint directory layout:
//   manifest.json  format version, full config, label set, and the parameter
//                  table (name, shape, trainable) in store order
//   weights.bin    every parameter as 64-bit little-endian floats,
//                  concatenated in manifest order, no framing
//   state.json     optional: loop counters and RNG engine states, written
//                  only for resumable training checkpoints
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kWeightsFile = "weights.bin";
inline constexpr const char* kStateFile = "state.json";
inline constexpr int kCheckpointFormatVersion = 1;

// Progress of the GAN loop. Parameter updates use plain SGD, so weights plus
// engine states plus counters are the complete resume state.
struct TrainState {
  std::uint64_t epochs_done = 0;
  std::uint64_t generator_steps = 0;
  std::uint64_t critic_steps = 0;
  std::map<std::string, std::string> rng_streams;  // stream label -> engine state
};

struct ManifestInfo {
  int format_version = 0;
  TrainConfig config;
  std::vector<int> labels;
  std::vector<std::string> param_names;   // manifest order == weights.bin order
  std::vector<std::vector<std::size_t>> param_shapes;
  std::vector<bool> param_trainable;
  std::size_t total_values = 0;
};

struct Checkpoint {
  TrainConfig config;
  ModelBundle bundle;
  bool has_state = false;
  TrainState state;
};

void save_checkpoint(const std::string& dir, const TrainConfig& cfg,
                     const ModelBundle& bundle, const TrainState* state = nullptr);

// Parses manifest.json only; weights.bin stays untouched.
ManifestInfo read_manifest(const std::string& dir);

// Rebuilds the bundle from the manifest config, validates the parameter
// table against it, and loads the weights bit-exactly.
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace cafv
