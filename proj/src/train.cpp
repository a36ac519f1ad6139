#include "cafv/train.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cafv/errors.hpp"
#include "cafv/log.hpp"
#include "cafv/optimizer.hpp"

namespace cafv {

double lr_for_epoch(double base, double decay, std::size_t every, std::size_t epoch) {
  if (every == 0) return base;
  double lr = base;
  for (std::size_t i = 0; i < epoch / every; ++i) lr *= decay;
  return lr;
}

namespace {

Tensor gather_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Tensor out = Tensor::zeros({rows.size(), ds.d_f});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const FeatureRecord& r = ds.records[rows[i]];
    for (std::size_t j = 0; j < ds.d_f; ++j) out.at(i, j) = r.f[j];
  }
  return out;
}

void fisher_yates(std::vector<std::size_t>& v, RngStream& rng, std::size_t prefix) {
  for (std::size_t i = 0; i < prefix && i + 1 < v.size(); ++i) {
    const std::size_t j = i + rng.index(v.size() - i);
    std::swap(v[i], v[j]);
  }
}

ClassifierResult train_classifier_on(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw ValidationError("classifier training set is empty");
  const std::vector<int> labels = data.label_set();
  if (labels.size() < 2) {
    throw ValidationError("classifier training needs at least 2 classes, got " +
                          std::to_string(labels.size()));
  }

  ClassifierResult result;
  result.spec = ClassifierSpec{"cls.", data.d_f, labels};
  result.class_counts = class_histogram(data);
  RngStream init(cfg.seed, "cls-init");
  register_classifier_params(result.params, result.spec, init, /*trainable=*/true);

  RngStream order(cfg.seed, "cls-data");
  std::vector<std::size_t> indices(data.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.classifier_epochs; ++epoch) {
    const double lr = lr_for_epoch(cfg.lr_classifier, cfg.classifier_lr_decay,
                                   cfg.classifier_decay_every, epoch);
    fisher_yates(indices, order, indices.size());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < indices.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, indices.size() - start);
      const std::vector<std::size_t> rows(indices.begin() + start,
                                          indices.begin() + start + n);
      std::vector<std::size_t> targets(n);
      for (std::size_t i = 0; i < n; ++i) {
        targets[i] = result.spec.index_of_label(data.records[rows[i]].label);
      }
      Graph g(&result.params);
      const NodeId f = g.constant(gather_rows(data, rows));
      const NodeId loss =
          g.mean(g.softmax_xent(classifier_logits_node(g, result.spec, f), targets));
      const double value = g.forward(loss).data[0];
      if (!std::isfinite(value)) {
        throw NumericError("classifier epoch " + std::to_string(epoch) +
                           ": non-finite loss");
      }
      loss_sum += value * static_cast<double>(n);
      optimizer_step(result.params, g.backward(loss), OptimRule::Adam, lr);
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(data.size()));
  }

  std::size_t correct = 0;
  for (const FeatureRecord& r : data.records) {
    if (classifier_predict(result.params, result.spec, Tensor::vec(r.f)) == r.label) {
      ++correct;
    }
  }
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return result;
}

}  // namespace

ClassifierResult pretrain_classifier(const Dataset& real, const TrainConfig& cfg) {
  return train_final_classifier(real, {}, cfg);
}

ClassifierResult train_final_classifier(const Dataset& real,
                                        const std::vector<FeatureRecord>& synthetic,
                                        const TrainConfig& cfg) {
  std::vector<FeatureRecord> records = real.records;
  records.insert(records.end(), synthetic.begin(), synthetic.end());
  return train_classifier_on(make_dataset(std::move(records), real.d_f), cfg);
}

void install_classifier(ModelBundle& bundle, const ClassifierResult& classifier) {
  if (bundle.classifier.labels != classifier.spec.labels ||
      bundle.classifier.d_f != classifier.spec.d_f) {
    throw ValidationError("classifier does not match the bundle's label set or width");
  }
  bundle.params.value(bundle.classifier.w()) = classifier.params.value(classifier.spec.w());
  bundle.params.value(bundle.classifier.b()) = classifier.params.value(classifier.spec.b());
}

namespace {

struct PairSampler {
  const Dataset* ds = nullptr;
  std::map<int, std::vector<std::size_t>> by_label;
  std::vector<int> deltas;  // realizable intervals, ascending
  std::map<int, std::vector<std::pair<int, int>>> pairs_by_delta;

  PairSampler(const Dataset& dataset, const std::vector<int>& interval_set)
      : ds(&dataset), by_label(dataset.indices_by_label()) {
    std::vector<int> set = interval_set;
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    for (int delta : set) {
      std::vector<std::pair<int, int>> pairs;
      for (const auto& [s, rows] : by_label) {
        if (by_label.count(s + delta) > 0) pairs.push_back({s, s + delta});
      }
      if (!pairs.empty()) {
        deltas.push_back(delta);
        pairs_by_delta[delta] = std::move(pairs);
      }
    }
    if (deltas.empty()) {
      throw ValidationError("no class pair in the dataset realizes any allowed interval");
    }
  }

  std::vector<std::size_t> draw_rows(const std::vector<std::size_t>& pool,
                                     std::size_t batch, RngStream& rng) const {
    std::vector<std::size_t> rows;
    rows.reserve(batch);
    if (pool.size() < batch) {  // small class: sample with replacement
      for (std::size_t i = 0; i < batch; ++i) rows.push_back(pool[rng.index(pool.size())]);
    } else {
      std::vector<std::size_t> shuffled = pool;
      fisher_yates(shuffled, rng, batch);
      rows.assign(shuffled.begin(), shuffled.begin() + batch);
    }
    return rows;
  }

  PairBatch sample(std::size_t batch, RngStream& rng) const {
    PairBatch out;
    const int delta = deltas[rng.index(deltas.size())];
    const auto& pairs = pairs_by_delta.at(delta);
    const auto [s_x, s_y] = pairs[rng.index(pairs.size())];
    out.s_x = s_x;
    out.s_y = s_y;
    out.c = ContextInterval{delta};
    out.rows_x = draw_rows(by_label.at(s_x), batch, rng);
    out.rows_y = draw_rows(by_label.at(s_y), batch, rng);
    out.f_x = gather_rows(*ds, out.rows_x);
    out.f_y = gather_rows(*ds, out.rows_y);
    return out;
  }
};

}  // namespace

PairBatch sample_pair_batch(const Dataset& dataset, const std::vector<int>& interval_set,
                            std::size_t batch_size, RngStream& rng) {
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  return PairSampler(dataset, interval_set).sample(batch_size, rng);
}

GradMap filter_grads(const GradMap& grads, const std::vector<std::string>& prefixes) {
  GradMap out;
  for (const auto& [name, grad] : grads) {
    for (const std::string& prefix : prefixes) {
      if (name.rfind(prefix, 0) == 0) {
        out.emplace(name, grad);
        break;
      }
    }
  }
  return out;
}

namespace {

std::string breakdown_text(const LossBreakdown& b) {
  std::ostringstream ss;
  ss << "gan_xy=" << b.gan_xy << " gan_yx=" << b.gan_yx << " cycle=" << b.cycle
     << " cls_x=" << b.cls_x << " cls_y=" << b.cls_y << " penalty_x=" << b.penalty_x
     << " penalty_y=" << b.penalty_y << " total=" << b.total;
  return ss.str();
}

GanResult run_gan_loop(ModelBundle bundle, const TrainConfig& cfg, const Dataset& train,
                       TrainState state, std::uint64_t halt_after_generator_steps) {
  const LossWeights weights{cfg.lambda1, cfg.lambda2, cfg.beta};
  const PairSampler sampler(train, cfg.interval_set);

  RngStream data(cfg.seed, "data");
  RngStream noise(cfg.seed, "noise");
  RngStream alpha(cfg.seed, "alpha");
  if (!state.rng_streams.empty()) {
    data.restore_state(state.rng_streams.at("data"));
    noise.restore_state(state.rng_streams.at("noise"));
    alpha.restore_state(state.rng_streams.at("alpha"));
  }

  const std::size_t steps_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::uint64_t total_steps =
      static_cast<std::uint64_t>(cfg.gan_epochs) * steps_per_epoch;
  const std::uint64_t target_steps =
      halt_after_generator_steps == 0
          ? total_steps
          : std::min<std::uint64_t>(halt_after_generator_steps, total_steps);

  GanResult result;
  const auto critic_update = [&](const CriticSpec& critic, ContextInterval c,
                                 const Tensor& real, const Tensor& fake,
                                 const Tensor& f_hat, double lr) {
    Graph g(&bundle.params);
    const CriticObjectiveNodes nodes =
        critic_objective_nodes(g, critic, bundle.embedding, c, real, fake, f_hat, weights);
    const double objective = g.forward(nodes.neg_objective).data[0];
    if (!std::isfinite(objective)) {
      throw NumericError("critic update at generator step " +
                         std::to_string(state.generator_steps + 1) +
                         ": non-finite objective for " + critic.prefix + '*');
    }
    const GradMap grads = filter_grads(g.backward(nodes.neg_objective), {critic.prefix});
    optimizer_step(bundle.params, grads, OptimRule::Sgd, lr);
    return g.payload(nodes.penalty).data[0];
  };

  double penalty_x = 0.0, penalty_y = 0.0;
  while (state.generator_steps < target_steps) {
    for (std::size_t i = 0; i < cfg.n_critic; ++i) {
      const PairBatch pb = sampler.sample(cfg.batch_size, data);
      const Tensor z_y = noise.gaussian_tensor({cfg.batch_size, cfg.noise_dim});
      const Tensor z_x = noise.gaussian_tensor({cfg.batch_size, cfg.noise_dim});
      // Detached fakes: the critics must not differentiate the generators.
      const Tensor fake_y = generator_forward(bundle.params, bundle.gen_xy,
                                              bundle.embedding, pb.c, pb.f_x, z_y);
      const Tensor fake_x =
          generator_forward(bundle.params, bundle.gen_yx, bundle.embedding,
                            reverse(pb.c), pb.f_y, z_x);
      const Tensor f_hat_y = interpolate_batch(pb.f_y, fake_y, alpha);
      const Tensor f_hat_x = interpolate_batch(pb.f_x, fake_x, alpha);
      penalty_y = critic_update(bundle.critic_y, pb.c, pb.f_y, fake_y, f_hat_y,
                                cfg.lr_critic);
      penalty_x = critic_update(bundle.critic_x, reverse(pb.c), pb.f_x, fake_x, f_hat_x,
                                cfg.lr_critic);
      ++state.critic_steps;
    }

    const PairBatch pb = sampler.sample(cfg.batch_size, data);
    const Tensor z_xy = noise.gaussian_tensor({cfg.batch_size, cfg.noise_dim});
    const Tensor z_back_x = noise.gaussian_tensor({cfg.batch_size, cfg.noise_dim});
    const Tensor z_yx = noise.gaussian_tensor({cfg.batch_size, cfg.noise_dim});
    const Tensor z_back_y = noise.gaussian_tensor({cfg.batch_size, cfg.noise_dim});
    Graph g(&bundle.params);
    const GeneratorObjectiveNodes nodes =
        generator_objective_nodes(g, bundle, pb.c, pb.f_x, pb.f_y, z_xy, z_back_x, z_yx,
                                  z_back_y, pb.s_x, pb.s_y, weights);
    g.forward(nodes.total);

    LossBreakdown row;
    row.step = static_cast<long long>(state.generator_steps) + 1;
    row.gan_xy = g.payload(nodes.gan_xy).data[0];
    row.gan_yx = g.payload(nodes.gan_yx).data[0];
    row.cycle = g.payload(nodes.cycle).data[0];
    row.cls_x = g.payload(nodes.cls_x).data[0];
    row.cls_y = g.payload(nodes.cls_y).data[0];
    row.penalty_x = penalty_x;
    row.penalty_y = penalty_y;
    row.total = g.payload(nodes.total).data[0];
    const bool finite = std::isfinite(row.gan_xy) && std::isfinite(row.gan_yx) &&
                        std::isfinite(row.cycle) && std::isfinite(row.cls_x) &&
                        std::isfinite(row.cls_y) && std::isfinite(row.penalty_x) &&
                        std::isfinite(row.penalty_y) && std::isfinite(row.total);
    if (!finite) {
      throw NumericError("generator step " + std::to_string(row.step) +
                         ": non-finite loss (" + breakdown_text(row) + ")");
    }

    const GradMap grads =
        filter_grads(g.backward(nodes.total),
                     {bundle.gen_xy.prefix, bundle.gen_yx.prefix, "ctx."});
    optimizer_step(bundle.params, grads, OptimRule::Sgd, cfg.lr_generator);

    result.history.push_back(row);
    ++state.generator_steps;
    if (state.generator_steps % steps_per_epoch == 0) {
      state.epochs_done = state.generator_steps / steps_per_epoch;
      log_debug("gan epoch " + std::to_string(state.epochs_done) + "/" +
                std::to_string(cfg.gan_epochs) + " total=" + std::to_string(row.total));
    }
  }

  state.rng_streams["data"] = data.serialize_state();
  state.rng_streams["noise"] = noise.serialize_state();
  state.rng_streams["alpha"] = alpha.serialize_state();
  result.state = state;
  result.bundle = std::move(bundle);
  return result;
}

}  // namespace

GanResult train_gan(const Dataset& train, const ClassifierResult& classifier,
                    const TrainConfig& cfg, std::uint64_t halt_after_generator_steps) {
  cfg.validate();
  if (train.d_f != cfg.feature_dim) {
    throw ValidationError("dataset width " + std::to_string(train.d_f) +
                          " does not match config feature_dim " +
                          std::to_string(cfg.feature_dim));
  }
  RngStream init(cfg.seed, "init");
  ModelBundle bundle = make_bundle(cfg, classifier.spec.labels, init);
  install_classifier(bundle, classifier);
  return run_gan_loop(std::move(bundle), cfg, train, TrainState{},
                      halt_after_generator_steps);
}

GanResult continue_gan(const Checkpoint& ckpt, const Dataset& train,
                       std::uint64_t halt_after_generator_steps) {
  if (!ckpt.has_state) {
    throw ValidationError("checkpoint has no training state to resume from");
  }
  if (train.d_f != ckpt.config.feature_dim) {
    throw ValidationError("dataset width does not match the checkpoint config");
  }
  return run_gan_loop(ckpt.bundle, ckpt.config, train, ckpt.state,
                      halt_after_generator_steps);
}

std::vector<FeatureRecord> synthesize_features(const ModelBundle& bundle,
                                               const Dataset& dataset, int target_label,
                                               std::size_t count, RngStream& rng) {
  if (count == 0) throw ValidationError("synthesis count must be positive");
  if (dataset.d_f != bundle.gen_xy.d_f) {
    throw ValidationError("dataset width does not match the generator");
  }
  const auto by_label = dataset.indices_by_label();
  std::vector<int> sources;
  for (int delta : bundle.embedding.interval_set()) {
    const int s = target_label - delta;
    if (s != target_label && by_label.count(s) > 0) sources.push_back(s);
  }
  std::sort(sources.begin(), sources.end());
  if (sources.empty()) {
    throw ValidationError("no source class within one interval of label " +
                          std::to_string(target_label));
  }

  std::int64_t next_id = 0;
  for (const FeatureRecord& r : dataset.records) next_id = std::max(next_id, r.id + 1);

  std::vector<FeatureRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int source = sources[rng.index(sources.size())];
    const auto& pool = by_label.at(source);
    const FeatureRecord& src = dataset.records[pool[rng.index(pool.size())]];
    const Tensor z = rng.gaussian_tensor({1, bundle.gen_xy.d_z});
    Tensor f_row = Tensor::zeros({1, dataset.d_f});
    for (std::size_t j = 0; j < dataset.d_f; ++j) f_row.at(0, j) = src.f[j];
    const ContextInterval c{target_label - source};
    const Tensor generated =
        generator_forward(bundle.params, bundle.gen_xy, bundle.embedding, c, f_row, z);

    FeatureRecord rec;
    rec.id = next_id++;
    rec.label = target_label;
    rec.f = generated.data;
    rec.prov.synthetic = true;
    rec.prov.source_id = src.id;
    rec.prov.delta = c.delta;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace cafv
