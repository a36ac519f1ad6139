#include "cafv/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cafv/errors.hpp"
#include "cafv/sha256.hpp"
#include "json.hpp"

namespace cafv {

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string("config: ") + name + " must be positive");
  };
  positive(feature_dim, "feature_dim");
  positive(noise_dim, "noise_dim");
  positive(batch_size, "batch_size");
  positive(hidden_generator, "hidden_generator");
  positive(hidden_critic, "hidden_critic");
  positive(embedding_dim, "embedding_dim");
  positive(classifier_decay_every, "classifier_decay_every");
  if (n_critic < 1) throw ValidationError("config: n_critic must be >= 1");

  auto positive_rate = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("config: ") + name + " must be a positive finite rate");
    }
  };
  positive_rate(lr_generator, "lr_generator");
  positive_rate(lr_critic, "lr_critic");
  positive_rate(lr_classifier, "lr_classifier");
  positive_rate(classifier_lr_decay, "classifier_lr_decay");
  if (lambda1 < 0 || lambda2 < 0 || beta < 0) {
    throw ValidationError("config: loss weights must be >= 0");
  }

  if (interval_set.empty()) throw ValidationError("config: interval_set must not be empty");
  std::set<int> deltas(interval_set.begin(), interval_set.end());
  if (deltas.size() != interval_set.size()) {
    throw ValidationError("config: interval_set contains duplicates");
  }
  for (int d : deltas) {
    if (d == 0) throw ValidationError("config: interval_set must not contain 0");
    if (deltas.count(-d) == 0) {
      throw ValidationError("config: interval_set must be symmetric (missing " +
                            std::to_string(-d) + ")");
    }
  }
  embedding_mode_from_name(embedding_mode);
}

ContextEmbedding TrainConfig::make_embedding() const {
  if (embedding_mode_from_name(embedding_mode) == EmbeddingMode::OneHot) {
    return ContextEmbedding::one_hot(interval_set);
  }
  return ContextEmbedding::learned_table(interval_set, embedding_dim);
}

namespace {

using nlohmann::json;

json to_json_object(const TrainConfig& c) {
  json j;
  j["batch_size"] = c.batch_size;
  j["beta"] = c.beta;
  j["classifier_decay_every"] = c.classifier_decay_every;
  j["classifier_epochs"] = c.classifier_epochs;
  j["classifier_lr_decay"] = c.classifier_lr_decay;
  j["embedding_dim"] = c.embedding_dim;
  j["embedding_mode"] = c.embedding_mode;
  j["feature_dim"] = c.feature_dim;
  j["gan_epochs"] = c.gan_epochs;
  j["hidden_critic"] = c.hidden_critic;
  j["hidden_generator"] = c.hidden_generator;
  j["interval_set"] = c.interval_set;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["lr_classifier"] = c.lr_classifier;
  j["lr_critic"] = c.lr_critic;
  j["lr_generator"] = c.lr_generator;
  j["n_critic"] = c.n_critic;
  j["noise_dim"] = c.noise_dim;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

std::string config_to_json(const TrainConfig& cfg) {
  return to_json_object(cfg).dump(2) + "\n";
}

TrainConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: top level must be a JSON object");

  const TrainConfig defaults;
  const json known = to_json_object(defaults);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.contains(key)) {
      throw ValidationError("config: unknown key '" + key + "'");
    }
  }

  TrainConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
    };
    get("batch_size", c.batch_size);
    get("beta", c.beta);
    get("classifier_decay_every", c.classifier_decay_every);
    get("classifier_epochs", c.classifier_epochs);
    get("classifier_lr_decay", c.classifier_lr_decay);
    get("embedding_dim", c.embedding_dim);
    get("embedding_mode", c.embedding_mode);
    get("feature_dim", c.feature_dim);
    get("gan_epochs", c.gan_epochs);
    get("hidden_critic", c.hidden_critic);
    get("hidden_generator", c.hidden_generator);
    get("interval_set", c.interval_set);
    get("lambda1", c.lambda1);
    get("lambda2", c.lambda2);
    get("lr_classifier", c.lr_classifier);
    get("lr_critic", c.lr_critic);
    get("lr_generator", c.lr_generator);
    get("n_critic", c.n_critic);
    get("noise_dim", c.noise_dim);
    get("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: bad field type: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::string config_hash(const TrainConfig& cfg) {
  return sha256_hex(config_to_json(cfg));
}

}  // namespace cafv
