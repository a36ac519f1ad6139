#pragma once

#include <string>
#include <vector>

#include "cafv/config.hpp"
#include "cafv/context.hpp"
#include "cafv/graph.hpp"
#include "cafv/param_store.hpp"
#include "cafv/rng.hpp"
#include "cafv/tensor.hpp"

namespace cafv {

// Parameter naming scheme: every network owns a prefix, and its tensors live
// in a shared ParamStore under prefix + short name. The specs below carry
// dimensions only; weights stay in the store.

// Two affine stages: hidden = leaky_relu(W0 concat(f, z) + b0) and
// out = relu(Wc hidden + b_out), where Wc = w_base + sum_k e_k * slice_k of
// the context tensor. The context tensor is stored flattened as
// [embed_dim, d_f * hidden] with row k holding slice k in row-major order.
struct GeneratorSpec {
  std::string prefix;
  std::size_t d_f = 0;
  std::size_t d_z = 0;
  std::size_t hidden = 0;
  double slope = 0.2;

  std::string w0() const { return prefix + "w0"; }
  std::string b0() const { return prefix + "b0"; }
  std::string w_base() const { return prefix + "w_base"; }
  std::string w_ctx() const { return prefix + "w_ctx"; }
  std::string b_out() const { return prefix + "b_out"; }
};

// Conditioning enters the first layer additively: the feature block and the
// embedding block have separate weight matrices, which is the same map as a
// single matrix applied to concat(f, E(c)).
struct CriticSpec {
  std::string prefix;
  std::size_t d_f = 0;
  std::size_t hidden = 0;
  double slope = 0.2;

  std::string w1_f() const { return prefix + "w1_f"; }
  std::string w1_c() const { return prefix + "w1_c"; }
  std::string b1() const { return prefix + "b1"; }
  std::string w2() const { return prefix + "w2"; }
  std::string b2() const { return prefix + "b2"; }
};

struct ClassifierSpec {
  std::string prefix;
  std::size_t d_f = 0;
  std::vector<int> labels;  // sorted ascending

  std::string w() const { return prefix + "w"; }
  std::string b() const { return prefix + "b"; }
  std::size_t num_classes() const { return labels.size(); }
  std::size_t index_of_label(int label) const;
};

// W^c = w_base + sum_k e[k] * slice_k, with the slices flattened into the
// rows of v_flat ([len(e), rows*cols of w_base]).
Tensor context_weight(const Tensor& w_base, const Tensor& v_flat, const Tensor& e);
NodeId context_weight_node(Graph& g, const GeneratorSpec& spec, NodeId e_row);

void register_generator_params(ParamStore& store, const GeneratorSpec& spec,
                               std::size_t embed_dim, RngStream& rng);
void register_critic_params(ParamStore& store, const CriticSpec& spec,
                            std::size_t embed_dim, RngStream& rng);
void register_classifier_params(ParamStore& store, const ClassifierSpec& spec,
                                RngStream& rng, bool trainable = true);

// f: [n, d_f], z: [n, d_z] -> [n, d_f], entries >= 0.
NodeId generator_forward_node(Graph& g, const GeneratorSpec& spec,
                              const ContextEmbedding& emb, ContextInterval c, NodeId f,
                              NodeId z);
Tensor generator_forward(const ParamStore& params, const GeneratorSpec& spec,
                         const ContextEmbedding& emb, ContextInterval c,
                         const Tensor& f_batch, const Tensor& z_batch);

// f: [n, d_f] -> [n, 1], unbounded.
NodeId critic_forward_node(Graph& g, const CriticSpec& spec, const ContextEmbedding& emb,
                           ContextInterval c, NodeId f);
Tensor critic_forward(const ParamStore& params, const CriticSpec& spec,
                      const ContextEmbedding& emb, ContextInterval c,
                      const Tensor& f_batch);

// First-layer pre-activations at the current parameter values, [n, hidden].
Tensor critic_preactivation(const ParamStore& params, const CriticSpec& spec,
                            const ContextEmbedding& emb, ContextInterval c,
                            const Tensor& f_batch);
// Per-unit gradient factor of leaky_relu: 1 where pre > 0, slope elsewhere.
Tensor leaky_mask(const Tensor& pre, double slope);

// d critic / d f as a graph expression, [n, d_f]. The activation mask is
// evaluated at the current parameters and frozen, so the node stays
// differentiable w.r.t. the critic weights (exact almost everywhere).
NodeId critic_input_gradient_node(Graph& g, const CriticSpec& spec,
                                  const ContextEmbedding& emb, ContextInterval c, NodeId f,
                                  const Tensor& mask);
Tensor critic_input_gradient(const ParamStore& params, const CriticSpec& spec,
                             const ContextEmbedding& emb, ContextInterval c,
                             const Tensor& f_batch);

// Logits [n, K]; probabilities row-normalized via a numerically stable
// softmax; predictions break ties toward the smallest label.
NodeId classifier_logits_node(Graph& g, const ClassifierSpec& spec, NodeId f);
Tensor classifier_probs(const ParamStore& params, const ClassifierSpec& spec,
                        const Tensor& f_batch);
int classifier_predict(const ParamStore& params, const ClassifierSpec& spec,
                       const Tensor& f_row);

// The full model set trained by the pipeline, sharing one parameter store.
struct ModelBundle {
  GeneratorSpec gen_xy;
  GeneratorSpec gen_yx;
  CriticSpec critic_x;
  CriticSpec critic_y;
  ClassifierSpec classifier;
  ContextEmbedding embedding = ContextEmbedding::one_hot({-1, 1});
  ParamStore params;
};

// Initializes every network from `rng` in a fixed order. The classifier
// block is registered frozen; training code copies pretrained weights in.
ModelBundle make_bundle(const TrainConfig& cfg, const std::vector<int>& labels,
                        RngStream& rng);

}  // namespace cafv
