#pragma once

#include <vector>

#include "cafv/context.hpp"
#include "cafv/graph.hpp"
#include "cafv/models.hpp"
#include "cafv/rng.hpp"

namespace cafv {

struct LossWeights {
  double lambda1 = 10.0;  // cycle reconstruction
  double lambda2 = 10.0;  // gradient penalty
  double beta = 0.001;    // classification term

  void validate() const;
};

// One logging row of the alternating game. The per-side penalties come from
// the critic updates; total is the generator objective recomposed in a fixed
// order (see compose_total).
struct LossBreakdown {
  long long step = 0;
  double gan_xy = 0.0;
  double gan_yx = 0.0;
  double cycle = 0.0;
  double cls_x = 0.0;
  double cls_y = 0.0;
  double penalty_x = 0.0;
  double penalty_y = 0.0;
  double total = 0.0;
};

// total = (gan_xy + gan_yx) + lambda1*cycle + beta*(cls_y + cls_x), evaluated
// in exactly this association so the scalar recomputation is bit-equal to
// the graph's.
double compose_total(double gan_xy, double gan_yx, double cycle, double cls_y,
                     double cls_x, const LossWeights& w);

// Mean absolute difference over every entry of two equal-shape batches.
NodeId l1_mean_node(Graph& g, NodeId a, NodeId b);

// alpha*real + (1-alpha)*fake with one alpha per row.
Tensor interpolate_batch(const Tensor& real, const Tensor& fake, RngStream& alpha_rng);

// mean over rows of (||d critic/d f at f_hat||_2 - 1)^2. The activation mask
// is taken at the current parameters; f_hat enters as a constant.
NodeId gradient_penalty_node(Graph& g, const CriticSpec& critic,
                             const ContextEmbedding& emb, ContextInterval c,
                             const Tensor& f_hat);
double gradient_penalty(const ParamStore& params, const CriticSpec& critic,
                        const ContextEmbedding& emb, ContextInterval c,
                        const Tensor& f_real, const Tensor& f_fake,
                        RngStream& alpha_rng);

struct CriticObjectiveNodes {
  NodeId objective = 0;      // mean D(real) - mean D(fake) - lambda2 * penalty
  NodeId neg_objective = 0;  // descended by SGD
  NodeId penalty = 0;
};

// real/fake enter as constants: the critic update must not see generator
// parameters.
CriticObjectiveNodes critic_objective_nodes(Graph& g, const CriticSpec& critic,
                                            const ContextEmbedding& emb, ContextInterval c,
                                            const Tensor& f_real, const Tensor& f_fake,
                                            const Tensor& f_hat, const LossWeights& w);

// -mean D(fake, c); fake may be a generator subgraph.
NodeId generator_adversarial_node(Graph& g, const CriticSpec& critic,
                                  const ContextEmbedding& emb, ContextInterval c,
                                  NodeId fake);

// Mean negative log-probability of `target` under the bundled classifier.
NodeId classification_loss_node(Graph& g, const ClassifierSpec& cls, NodeId fake,
                                int target);

// X->Y->X plus Y->X->Y mean-L1 reconstruction, fresh noise per hop.
NodeId cycle_loss_node(Graph& g, const GeneratorSpec& gen_xy, const GeneratorSpec& gen_yx,
                       const ContextEmbedding& emb, ContextInterval c, NodeId f_x,
                       NodeId z_xy, NodeId z_back_x, NodeId f_y, NodeId z_yx,
                       NodeId z_back_y);

struct GeneratorObjectiveNodes {
  NodeId total = 0;
  NodeId gan_xy = 0;
  NodeId gan_yx = 0;
  NodeId cycle = 0;
  NodeId cls_y = 0;
  NodeId cls_x = 0;
  NodeId fake_y = 0;
  NodeId fake_x = 0;
};

// The generator players' descent target: adversarial terms on both fakes,
// weighted cycle reconstruction, and weighted classification terms on the
// frozen classifier. Critic parameters appear in the graph but their
// gradients are discarded by the caller.
GeneratorObjectiveNodes generator_objective_nodes(Graph& g, const ModelBundle& b,
                                                  ContextInterval c, const Tensor& f_x,
                                                  const Tensor& f_y, const Tensor& z_xy,
                                                  const Tensor& z_back_x,
                                                  const Tensor& z_yx,
                                                  const Tensor& z_back_y, int s_x, int s_y,
                                                  const LossWeights& w);

struct FullObjectiveNodes {
  NodeId total = 0;
  NodeId gan_xy = 0;  // full critic-side value for the X->Y direction
  NodeId gan_yx = 0;
  NodeId cycle = 0;
  NodeId cls_y = 0;
  NodeId cls_x = 0;
};

// The complete two-sided objective as one scalar: full adversarial values
// (real, fake and penalty terms) plus weighted cycle and classification
// terms. Interpolation points enter as fixed tensors so the scalar is an
// exact function of the parameters. Used by the gradient-check harness.
FullObjectiveNodes full_objective_nodes(Graph& g, const ModelBundle& b, ContextInterval c,
                                        const Tensor& f_x, const Tensor& f_y,
                                        const Tensor& z_xy, const Tensor& z_back_x,
                                        const Tensor& z_yx, const Tensor& z_back_y,
                                        const Tensor& f_hat_x, const Tensor& f_hat_y,
                                        int s_x, int s_y, const LossWeights& w);

}  // namespace cafv
