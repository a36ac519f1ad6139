#include "cafv/models.hpp"

#include <algorithm>
#include <cmath>

#include "cafv/errors.hpp"

namespace cafv {

std::size_t ClassifierSpec::index_of_label(int label) const {
  const auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) {
    throw ValidationError("label " + std::to_string(label) +
                          " is not in the classifier's label set");
  }
  return static_cast<std::size_t>(it - labels.begin());
}

Tensor context_weight(const Tensor& w_base, const Tensor& v_flat, const Tensor& e) {
  if (w_base.rank() != 2 || v_flat.rank() != 2) {
    throw ShapeError("context_weight: w_base and v_flat must be matrices");
  }
  if (e.numel() != v_flat.rows()) {
    throw ShapeError("context_weight: embedding length " + std::to_string(e.numel()) +
                     " does not match context tensor rows " + std::to_string(v_flat.rows()));
  }
  if (v_flat.cols() != w_base.numel()) {
    throw ShapeError("context_weight: context tensor columns " +
                     std::to_string(v_flat.cols()) + " do not match base weight size " +
                     std::to_string(w_base.numel()));
  }
  Tensor out = w_base;
  for (std::size_t k = 0; k < e.numel(); ++k) {
    const double ek = e.data[k];
    if (ek == 0.0) continue;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      out.data[i] += ek * v_flat.at(k, i);
    }
  }
  return out;
}

NodeId context_weight_node(Graph& g, const GeneratorSpec& spec, NodeId e_row) {
  const NodeId delta =
      g.reshape(g.matmul(e_row, g.param(spec.w_ctx())), {spec.d_f, spec.hidden});
  return g.add(g.param(spec.w_base()), delta);
}

void register_generator_params(ParamStore& store, const GeneratorSpec& spec,
                               std::size_t embed_dim, RngStream& rng) {
  const std::size_t din = spec.d_f + spec.d_z;
  store.add(spec.w0(), uniform_fan_init({din, spec.hidden}, din, spec.hidden, rng));
  store.add(spec.b0(), Tensor::zeros({spec.hidden}));
  store.add(spec.w_base(),
            uniform_fan_init({spec.d_f, spec.hidden}, spec.hidden, spec.d_f, rng));
  store.add(spec.w_ctx(), uniform_fan_init({embed_dim, spec.d_f * spec.hidden},
                                           spec.hidden, spec.d_f, rng));
  store.add(spec.b_out(), Tensor::zeros({spec.d_f}));
}

void register_critic_params(ParamStore& store, const CriticSpec& spec,
                            std::size_t embed_dim, RngStream& rng) {
  const std::size_t din = spec.d_f + embed_dim;
  store.add(spec.w1_f(), uniform_fan_init({spec.d_f, spec.hidden}, din, spec.hidden, rng));
  store.add(spec.w1_c(),
            uniform_fan_init({embed_dim, spec.hidden}, din, spec.hidden, rng));
  store.add(spec.b1(), Tensor::zeros({spec.hidden}));
  store.add(spec.w2(), uniform_fan_init({spec.hidden, 1}, spec.hidden, 1, rng));
  store.add(spec.b2(), Tensor::zeros({1}));
}

void register_classifier_params(ParamStore& store, const ClassifierSpec& spec,
                                RngStream& rng, bool trainable) {
  const std::size_t k = spec.num_classes();
  store.add(spec.w(), uniform_fan_init({spec.d_f, k}, spec.d_f, k, rng), trainable);
  store.add(spec.b(), Tensor::zeros({k}), trainable);
}

NodeId generator_forward_node(Graph& g, const GeneratorSpec& spec,
                              const ContextEmbedding& emb, ContextInterval c, NodeId f,
                              NodeId z) {
  const NodeId x = g.concat(f, z);
  const NodeId h =
      g.leaky_relu(g.add(g.matmul(x, g.param(spec.w0())), g.param(spec.b0())), spec.slope);
  const NodeId wc = context_weight_node(g, spec, emb.embed_node(g, c));
  return g.relu(g.add(g.matmul(h, wc, false, true), g.param(spec.b_out())));
}

Tensor generator_forward(const ParamStore& params, const GeneratorSpec& spec,
                         const ContextEmbedding& emb, ContextInterval c,
                         const Tensor& f_batch, const Tensor& z_batch) {
  Graph g(&params);
  const NodeId out =
      generator_forward_node(g, spec, emb, c, g.constant(f_batch), g.constant(z_batch));
  return g.forward(out);
}

NodeId critic_forward_node(Graph& g, const CriticSpec& spec, const ContextEmbedding& emb,
                           ContextInterval c, NodeId f) {
  const NodeId ctx_row = g.matmul(emb.embed_node(g, c), g.param(spec.w1_c()));  // [1, H]
  const NodeId pre =
      g.add(g.add(g.matmul(f, g.param(spec.w1_f())), ctx_row), g.param(spec.b1()));
  const NodeId h = g.leaky_relu(pre, spec.slope);
  return g.add(g.matmul(h, g.param(spec.w2())), g.param(spec.b2()));
}

Tensor critic_forward(const ParamStore& params, const CriticSpec& spec,
                      const ContextEmbedding& emb, ContextInterval c,
                      const Tensor& f_batch) {
  Graph g(&params);
  const NodeId out = critic_forward_node(g, spec, emb, c, g.constant(f_batch));
  return g.forward(out);
}

Tensor critic_preactivation(const ParamStore& params, const CriticSpec& spec,
                            const ContextEmbedding& emb, ContextInterval c,
                            const Tensor& f_batch) {
  const Tensor e = emb.embed(params, c);
  Tensor e_row = e;
  e_row.shape = {1, e.numel()};
  const Tensor ctx = gemm(e_row, params.value(spec.w1_c()));  // [1, H]
  Tensor pre = gemm(f_batch, params.value(spec.w1_f()));      // [n, H]
  const Tensor& b1 = params.value(spec.b1());
  for (std::size_t i = 0; i < pre.rows(); ++i) {
    for (std::size_t j = 0; j < pre.cols(); ++j) {
      pre.at(i, j) += ctx.data[j] + b1.data[j];
    }
  }
  return pre;
}

Tensor leaky_mask(const Tensor& pre, double slope) {
  Tensor mask = pre;
  for (double& v : mask.data) v = v > 0.0 ? 1.0 : slope;
  return mask;
}

NodeId critic_input_gradient_node(Graph& g, const CriticSpec& spec,
                                  const ContextEmbedding& emb, ContextInterval c, NodeId f,
                                  const Tensor& mask) {
  (void)emb;
  (void)c;
  const std::size_t n = g.node(f).shape.at(0);
  if (mask.rank() != 2 || mask.rows() != n || mask.cols() != spec.hidden) {
    throw ShapeError("critic_input_gradient: mask shape " + mask.shape_str() +
                     " does not match [" + std::to_string(n) + ", " +
                     std::to_string(spec.hidden) + "]");
  }
  // dD/df = W1_f (mask ⊙ w2) per row; rows of `spread` repeat w2ᵀ.
  const NodeId ones = g.constant(Tensor::full({n, 1}, 1.0));
  const NodeId spread = g.matmul(ones, g.param(spec.w2()), false, true);  // [n, H]
  const NodeId masked = g.mask_mul(spread, mask);
  return g.matmul(masked, g.param(spec.w1_f()), false, true);  // [n, d_f]
}

Tensor critic_input_gradient(const ParamStore& params, const CriticSpec& spec,
                             const ContextEmbedding& emb, ContextInterval c,
                             const Tensor& f_batch) {
  const Tensor pre = critic_preactivation(params, spec, emb, c, f_batch);
  const Tensor mask = leaky_mask(pre, spec.slope);
  Graph g(&params);
  const NodeId node =
      critic_input_gradient_node(g, spec, emb, c, g.constant(f_batch), mask);
  return g.forward(node);
}

NodeId classifier_logits_node(Graph& g, const ClassifierSpec& spec, NodeId f) {
  return g.add(g.matmul(f, g.param(spec.w())), g.param(spec.b()));
}

Tensor classifier_probs(const ParamStore& params, const ClassifierSpec& spec,
                        const Tensor& f_batch) {
  Tensor logits = gemm(f_batch, params.value(spec.w()));
  const Tensor& b = params.value(spec.b());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    for (std::size_t j = 0; j < logits.cols(); ++j) logits.at(i, j) += b.data[j];
  }
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      logits.at(i, j) = std::exp(logits.at(i, j) - mx);
      denom += logits.at(i, j);
    }
    for (std::size_t j = 0; j < logits.cols(); ++j) logits.at(i, j) /= denom;
  }
  return logits;
}

int classifier_predict(const ParamStore& params, const ClassifierSpec& spec,
                       const Tensor& f_row) {
  Tensor row = f_row;
  if (row.rank() == 1) row.shape = {1, row.numel()};
  if (row.rank() != 2 || row.rows() != 1 || row.cols() != spec.d_f) {
    throw ShapeError("classifier_predict: expected a single feature vector of length " +
                     std::to_string(spec.d_f));
  }
  const Tensor probs = classifier_probs(params, spec, row);
  std::size_t best = 0;
  for (std::size_t j = 1; j < probs.cols(); ++j) {
    if (probs.data[j] > probs.data[best]) best = j;  // ties keep the smaller label
  }
  return spec.labels[best];
}

ModelBundle make_bundle(const TrainConfig& cfg, const std::vector<int>& labels,
                        RngStream& rng) {
  cfg.validate();
  if (labels.size() < 2) {
    throw ValidationError("model bundle needs at least 2 class labels");
  }
  std::vector<int> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("model bundle label set contains duplicates");
  }

  ModelBundle b;
  b.embedding = cfg.make_embedding();
  const std::size_t e_dim = b.embedding.dim();
  b.gen_xy = GeneratorSpec{"gen_xy.", cfg.feature_dim, cfg.noise_dim, cfg.hidden_generator};
  b.gen_yx = GeneratorSpec{"gen_yx.", cfg.feature_dim, cfg.noise_dim, cfg.hidden_generator};
  b.critic_x = CriticSpec{"critic_x.", cfg.feature_dim, cfg.hidden_critic};
  b.critic_y = CriticSpec{"critic_y.", cfg.feature_dim, cfg.hidden_critic};
  b.classifier = ClassifierSpec{"cls.", cfg.feature_dim, sorted};

  register_generator_params(b.params, b.gen_xy, e_dim, rng);
  register_generator_params(b.params, b.gen_yx, e_dim, rng);
  register_critic_params(b.params, b.critic_x, e_dim, rng);
  register_critic_params(b.params, b.critic_y, e_dim, rng);
  if (b.embedding.mode() == EmbeddingMode::LearnedTable) {
    const std::size_t n = b.embedding.interval_set().size();
    b.params.add(b.embedding.table_param(),
                 uniform_fan_init({n, e_dim}, n, e_dim, rng));
  }
  register_classifier_params(b.params, b.classifier, rng, /*trainable=*/false);
  return b;
}

}  // namespace cafv
