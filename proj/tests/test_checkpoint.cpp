#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cafv/checkpoint.hpp"
#include "cafv/errors.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using namespace cafv;

namespace {

// Unique checkpoint directory, removed recursively on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& stem) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("cafv_ckpt_" + stem + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }

  std::string str() const { return path.string(); }
  std::string bytes(const char* file) const {
    std::ifstream in(path / file, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  void write(const char* file, const std::string& content) const {
    std::ofstream out(path / file, std::ios::binary);
    out << content;
  }
};

ModelBundle small_bundle(const TrainConfig& cfg, std::uint64_t seed = 5) {
  RngStream rng(seed, "init");
  return make_bundle(cfg, {10, 11, 12}, rng);
}

TrainState sample_state() {
  TrainState state;
  state.epochs_done = 3;
  state.generator_steps = 17;
  state.critic_steps = 85;
  RngStream data(9, "data"), noise(9, "noise");
  for (int i = 0; i < 100; ++i) data.next_u64();
  noise.gaussian();
  state.rng_streams["data"] = data.serialize_state();
  state.rng_streams["noise"] = noise.serialize_state();
  return state;
}

}  // namespace

TEST_CASE("checkpoint roundtrip restores every value bit-exactly") {
  const TrainConfig cfg = testsupport::tiny_config();
  const ModelBundle bundle = small_bundle(cfg);
  TempDir dir("roundtrip");
  const TrainState state = sample_state();
  save_checkpoint(dir.str(), cfg, bundle, &state);

  const Checkpoint loaded = load_checkpoint(dir.str());
  CHECK(config_to_json(loaded.config) == config_to_json(cfg));
  CHECK(loaded.bundle.classifier.labels == std::vector<int>{10, 11, 12});
  REQUIRE(loaded.bundle.params.names() == bundle.params.names());
  for (const std::string& name : bundle.params.names()) {
    CHECK(loaded.bundle.params.value(name).shape == bundle.params.value(name).shape);
    CHECK(loaded.bundle.params.value(name).data == bundle.params.value(name).data);
    CHECK(loaded.bundle.params.trainable(name) == bundle.params.trainable(name));
  }
  CHECK(loaded.bundle.params.trainable("cls.w") == false);

  REQUIRE(loaded.has_state);
  CHECK(loaded.state.epochs_done == 3);
  CHECK(loaded.state.generator_steps == 17);
  CHECK(loaded.state.critic_steps == 85);
  CHECK(loaded.state.rng_streams == state.rng_streams);

  // A restored stream must continue exactly where the saved one stopped.
  RngStream reference(9, "data");
  for (int i = 0; i < 100; ++i) reference.next_u64();
  RngStream resumed(9, "data");
  resumed.restore_state(loaded.state.rng_streams.at("data"));
  for (int i = 0; i < 5; ++i) CHECK(resumed.next_u64() == reference.next_u64());
}

TEST_CASE("saving a loaded checkpoint reproduces the files byte-for-byte") {
  const TrainConfig cfg = testsupport::tiny_config();
  TempDir first("rewrite1"), second("rewrite2");
  const TrainState state = sample_state();
  save_checkpoint(first.str(), cfg, small_bundle(cfg), &state);

  const Checkpoint loaded = load_checkpoint(first.str());
  save_checkpoint(second.str(), loaded.config, loaded.bundle, &loaded.state);
  CHECK(first.bytes(kManifestFile) == second.bytes(kManifestFile));
  CHECK(first.bytes(kWeightsFile) == second.bytes(kWeightsFile));
  CHECK(first.bytes(kStateFile) == second.bytes(kStateFile));
}

TEST_CASE("checkpoint without train state") {
  const TrainConfig cfg = testsupport::tiny_config();
  TempDir dir("nostate");
  save_checkpoint(dir.str(), cfg, small_bundle(cfg));
  CHECK(!std::filesystem::exists(dir.path / kStateFile));
  const Checkpoint loaded = load_checkpoint(dir.str());
  CHECK(loaded.has_state == false);
}

TEST_CASE("manifest carries the parameter table in weight order") {
  const TrainConfig cfg = testsupport::tiny_config();
  const ModelBundle bundle = small_bundle(cfg);
  TempDir dir("manifest");
  save_checkpoint(dir.str(), cfg, bundle, nullptr);

  const ManifestInfo info = read_manifest(dir.str());
  CHECK(info.format_version == 1);
  CHECK(info.labels == std::vector<int>{10, 11, 12});
  CHECK(info.param_names == bundle.params.names());
  CHECK(info.total_values == bundle.params.total_values());
  CHECK(dir.bytes(kWeightsFile).size() == 8 * info.total_values);
  CHECK(config_to_json(info.config) == config_to_json(cfg));

  // The classifier block is the frozen part of the table.
  for (std::size_t i = 0; i < info.param_names.size(); ++i) {
    const bool is_classifier = info.param_names[i].rfind("cls.", 0) == 0;
    CHECK(info.param_trainable[i] == !is_classifier);
  }
}

TEST_CASE("checkpoint corruption is rejected") {
  const TrainConfig cfg = testsupport::tiny_config();
  TempDir dir("corrupt");
  save_checkpoint(dir.str(), cfg, small_bundle(cfg));

  SUBCASE("missing directory") {
    CHECK_THROWS_AS(load_checkpoint(dir.str() + "_nowhere"), IoError);
  }
  SUBCASE("truncated weights") {
    const std::string weights = dir.bytes(kWeightsFile);
    dir.write(kWeightsFile, weights.substr(0, weights.size() - 8));
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.str()), doctest::Contains("manifest expects"),
                         ValidationError);
  }
  SUBCASE("unsupported format version") {
    nlohmann::json j = nlohmann::json::parse(dir.bytes(kManifestFile));
    j["format_version"] = 2;
    dir.write(kManifestFile, j.dump(2));
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.str()),
                         doctest::Contains("unsupported format version 2"),
                         ValidationError);
  }
  SUBCASE("parameter table drift") {
    nlohmann::json j = nlohmann::json::parse(dir.bytes(kManifestFile));
    j["parameters"].erase(0);
    dir.write(kManifestFile, j.dump(2));
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.str()),
                         doctest::Contains("does not match the models"), ValidationError);
  }
  SUBCASE("config key smuggling") {
    nlohmann::json j = nlohmann::json::parse(dir.bytes(kManifestFile));
    j["config"]["momentum"] = 0.9;
    dir.write(kManifestFile, j.dump(2));
    CHECK_THROWS_AS(load_checkpoint(dir.str()), ValidationError);
  }
  SUBCASE("malformed json") {
    dir.write(kManifestFile, "{nope");
    CHECK_THROWS_AS(load_checkpoint(dir.str()), ValidationError);
  }
}

TEST_CASE("learned-table embeddings persist their table") {
  TrainConfig cfg = testsupport::tiny_config();
  cfg.embedding_mode = "learned_table";
  cfg.embedding_dim = 3;
  const ModelBundle bundle = small_bundle(cfg);
  REQUIRE(bundle.params.contains("ctx.table"));
  TempDir dir("learned");
  save_checkpoint(dir.str(), cfg, bundle);
  const Checkpoint loaded = load_checkpoint(dir.str());
  CHECK(loaded.bundle.params.value("ctx.table").data ==
        bundle.params.value("ctx.table").data);
  CHECK(loaded.bundle.params.trainable("ctx.table") == true);
}
