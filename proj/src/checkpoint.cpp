#include "cafv/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cafv/errors.hpp"
#include "json.hpp"

namespace cafv {

namespace {

std::filesystem::path join(const std::string& dir, const char* file) {
  return std::filesystem::path(dir) / file;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json parse_json_file(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::string& dir, const TrainConfig& cfg,
                     const ModelBundle& bundle, const TrainState* state) {
  cfg.validate();
  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["config"] = nlohmann::json::parse(config_to_json(cfg));
  manifest["labels"] = bundle.classifier.labels;
  nlohmann::json params = nlohmann::json::array();
  std::string weights;
  for (const std::string& name : bundle.params.names()) {
    const Tensor& value = bundle.params.value(name);
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = value.shape;
    entry["trainable"] = bundle.params.trainable(name);
    params.push_back(entry);
    const std::size_t offset = weights.size();
    weights.resize(offset + 8 * value.data.size());
    std::memcpy(weights.data() + offset, value.data.data(), 8 * value.data.size());
  }
  manifest["parameters"] = params;

  write_file(join(dir, kManifestFile), manifest.dump(2) + "\n");
  write_file(join(dir, kWeightsFile), weights);

  if (state != nullptr) {
    nlohmann::json s;
    s["format_version"] = kCheckpointFormatVersion;
    s["epochs_done"] = state->epochs_done;
    s["generator_steps"] = state->generator_steps;
    s["critic_steps"] = state->critic_steps;
    s["rng_streams"] = state->rng_streams;
    write_file(join(dir, kStateFile), s.dump(2) + "\n");
  }
}

ManifestInfo read_manifest(const std::string& dir) {
  const auto path = join(dir, kManifestFile);
  const nlohmann::json j = parse_json_file(path);
  ManifestInfo info;
  try {
    info.format_version = j.at("format_version").get<int>();
    if (info.format_version != kCheckpointFormatVersion) {
      throw ValidationError(path.string() + ": unsupported format version " +
                            std::to_string(info.format_version));
    }
    info.config = config_from_json(j.at("config").dump());
    info.labels = j.at("labels").get<std::vector<int>>();
    for (const nlohmann::json& entry : j.at("parameters")) {
      info.param_names.push_back(entry.at("name").get<std::string>());
      info.param_shapes.push_back(entry.at("shape").get<std::vector<std::size_t>>());
      info.param_trainable.push_back(entry.at("trainable").get<bool>());
      std::size_t numel = 1;
      for (std::size_t d : info.param_shapes.back()) numel *= d;
      info.total_values += numel;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return info;
}

Checkpoint load_checkpoint(const std::string& dir) {
  const ManifestInfo info = read_manifest(dir);

  Checkpoint ckpt;
  ckpt.config = info.config;
  RngStream scratch(0, "init");  // weights are overwritten below
  ckpt.bundle = make_bundle(info.config, info.labels, scratch);

  const std::vector<std::string> store_names = ckpt.bundle.params.names();
  if (store_names != info.param_names) {
    throw ValidationError(dir + ": manifest parameter table does not match the models " +
                          "built from its config (" + std::to_string(info.param_names.size()) +
                          " listed, " + std::to_string(store_names.size()) + " expected)");
  }

  const std::string weights = read_file(join(dir, kWeightsFile));
  if (weights.size() != 8 * info.total_values) {
    throw ValidationError(dir + "/weights.bin: has " + std::to_string(weights.size()) +
                          " bytes, manifest expects " +
                          std::to_string(8 * info.total_values));
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < info.param_names.size(); ++i) {
    Tensor& value = ckpt.bundle.params.value(info.param_names[i]);
    if (value.shape != info.param_shapes[i]) {
      throw ValidationError(dir + ": parameter '" + info.param_names[i] +
                            "' shape differs between manifest and config-built models");
    }
    ckpt.bundle.params.set_trainable(info.param_names[i], info.param_trainable[i]);
    std::memcpy(value.data.data(), weights.data() + offset, 8 * value.data.size());
    offset += 8 * value.data.size();
  }

  const auto state_path = join(dir, kStateFile);
  if (std::filesystem::exists(state_path)) {
    const nlohmann::json s = parse_json_file(state_path);
    try {
      const int version = s.at("format_version").get<int>();
      if (version != kCheckpointFormatVersion) {
        throw ValidationError(state_path.string() + ": unsupported format version " +
                              std::to_string(version));
      }
      ckpt.state.epochs_done = s.at("epochs_done").get<std::uint64_t>();
      ckpt.state.generator_steps = s.at("generator_steps").get<std::uint64_t>();
      ckpt.state.critic_steps = s.at("critic_steps").get<std::uint64_t>();
      ckpt.state.rng_streams =
          s.at("rng_streams").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(state_path.string() + ": " + e.what());
    }
    ckpt.has_state = true;
  }
  return ckpt;
}

}  // namespace cafv
