#include "cafv/losses.hpp"

#include <cmath>

#include "cafv/errors.hpp"

namespace cafv {

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(beta >= 0.0) ||
      !std::isfinite(lambda1) || !std::isfinite(lambda2) || !std::isfinite(beta)) {
    throw ValidationError("loss weights must be finite and >= 0");
  }
}

double compose_total(double gan_xy, double gan_yx, double cycle, double cls_y,
                     double cls_x, const LossWeights& w) {
  const double t1 = gan_xy + gan_yx;
  const double t2 = w.lambda1 * cycle;
  const double t3 = t1 + t2;
  const double t4 = cls_y + cls_x;
  const double t5 = w.beta * t4;
  return t3 + t5;
}

namespace {

void require_batch(const Tensor& t, const char* what) {
  if (t.rank() != 2 || t.rows() == 0) {
    throw ValidationError(std::string(what) + " must be a non-empty [n, d] batch, got " +
                          t.shape_str());
  }
}

// relu(x) + relu(-x) = |x|.
NodeId abs_node(Graph& g, NodeId x) {
  return g.add(g.relu(x), g.relu(g.scalar_affine(x, -1.0, 0.0)));
}

NodeId cycle_from_fakes(Graph& g, const GeneratorSpec& gen_xy, const GeneratorSpec& gen_yx,
                        const ContextEmbedding& emb, ContextInterval c, NodeId f_x,
                        NodeId fake_y, NodeId z_back_x, NodeId f_y, NodeId fake_x,
                        NodeId z_back_y) {
  const NodeId rec_x = generator_forward_node(g, gen_yx, emb, reverse(c), fake_y, z_back_x);
  const NodeId rec_y = generator_forward_node(g, gen_xy, emb, c, fake_x, z_back_y);
  return g.add(l1_mean_node(g, rec_x, f_x), l1_mean_node(g, rec_y, f_y));
}

// t1..t5 association shared with compose_total.
NodeId compose_total_node(Graph& g, NodeId gan_xy, NodeId gan_yx, NodeId cycle,
                          NodeId cls_y, NodeId cls_x, const LossWeights& w) {
  const NodeId t1 = g.add(gan_xy, gan_yx);
  const NodeId t2 = g.scalar_affine(cycle, w.lambda1, 0.0);
  const NodeId t3 = g.add(t1, t2);
  const NodeId t4 = g.add(cls_y, cls_x);
  const NodeId t5 = g.scalar_affine(t4, w.beta, 0.0);
  return g.add(t3, t5);
}

}  // namespace

NodeId l1_mean_node(Graph& g, NodeId a, NodeId b) {
  return g.mean(abs_node(g, g.sub(a, b)));
}

Tensor interpolate_batch(const Tensor& real, const Tensor& fake, RngStream& alpha_rng) {
  require_batch(real, "interpolation real batch");
  require_batch(fake, "interpolation fake batch");
  if (!real.same_shape(fake)) {
    throw ShapeError("interpolation batches differ in shape: " + real.shape_str() +
                     " vs " + fake.shape_str());
  }
  Tensor out = Tensor::zeros(real.shape);
  for (std::size_t i = 0; i < real.rows(); ++i) {
    const double alpha = alpha_rng.uniform01();
    for (std::size_t j = 0; j < real.cols(); ++j) {
      out.at(i, j) = alpha * real.at(i, j) + (1.0 - alpha) * fake.at(i, j);
    }
  }
  return out;
}

NodeId gradient_penalty_node(Graph& g, const CriticSpec& critic,
                             const ContextEmbedding& emb, ContextInterval c,
                             const Tensor& f_hat) {
  require_batch(f_hat, "gradient penalty batch");
  const Tensor pre = critic_preactivation(*g.store(), critic, emb, c, f_hat);
  const Tensor mask = leaky_mask(pre, critic.slope);
  const NodeId gin =
      critic_input_gradient_node(g, critic, emb, c, g.constant(f_hat), mask);
  const NodeId norm = g.row_l2_norm(gin);
  const NodeId centered = g.scalar_affine(norm, 1.0, -1.0);
  return g.mean(g.mul(centered, centered));
}

double gradient_penalty(const ParamStore& params, const CriticSpec& critic,
                        const ContextEmbedding& emb, ContextInterval c,
                        const Tensor& f_real, const Tensor& f_fake,
                        RngStream& alpha_rng) {
  const Tensor f_hat = interpolate_batch(f_real, f_fake, alpha_rng);
  Graph g(&params);
  return g.forward(gradient_penalty_node(g, critic, emb, c, f_hat)).value();
}

CriticObjectiveNodes critic_objective_nodes(Graph& g, const CriticSpec& critic,
                                            const ContextEmbedding& emb, ContextInterval c,
                                            const Tensor& f_real, const Tensor& f_fake,
                                            const Tensor& f_hat, const LossWeights& w) {
  require_batch(f_real, "critic real batch");
  require_batch(f_fake, "critic fake batch");
  w.validate();
  CriticObjectiveNodes out;
  const NodeId mean_real = g.mean(critic_forward_node(g, critic, emb, c, g.constant(f_real)));
  const NodeId mean_fake = g.mean(critic_forward_node(g, critic, emb, c, g.constant(f_fake)));
  out.penalty = gradient_penalty_node(g, critic, emb, c, f_hat);
  out.objective = g.sub(g.sub(mean_real, mean_fake),
                        g.scalar_affine(out.penalty, w.lambda2, 0.0));
  out.neg_objective = g.scalar_affine(out.objective, -1.0, 0.0);
  return out;
}

NodeId generator_adversarial_node(Graph& g, const CriticSpec& critic,
                                  const ContextEmbedding& emb, ContextInterval c,
                                  NodeId fake) {
  if (g.node(fake).shape.size() != 2 || g.node(fake).shape[0] == 0) {
    throw ValidationError("adversarial term needs a non-empty fake batch");
  }
  return g.scalar_affine(g.mean(critic_forward_node(g, critic, emb, c, fake)), -1.0, 0.0);
}

NodeId classification_loss_node(Graph& g, const ClassifierSpec& cls, NodeId fake,
                                int target) {
  const std::size_t idx = cls.index_of_label(target);
  const std::size_t n = g.node(fake).shape.at(0);
  if (n == 0) throw ValidationError("classification loss needs a non-empty batch");
  const std::vector<std::size_t> targets(n, idx);
  return g.mean(g.softmax_xent(classifier_logits_node(g, cls, fake), targets));
}

NodeId cycle_loss_node(Graph& g, const GeneratorSpec& gen_xy, const GeneratorSpec& gen_yx,
                       const ContextEmbedding& emb, ContextInterval c, NodeId f_x,
                       NodeId z_xy, NodeId z_back_x, NodeId f_y, NodeId z_yx,
                       NodeId z_back_y) {
  const NodeId fake_y = generator_forward_node(g, gen_xy, emb, c, f_x, z_xy);
  const NodeId fake_x = generator_forward_node(g, gen_yx, emb, reverse(c), f_y, z_yx);
  return cycle_from_fakes(g, gen_xy, gen_yx, emb, c, f_x, fake_y, z_back_x, f_y, fake_x,
                          z_back_y);
}

GeneratorObjectiveNodes generator_objective_nodes(Graph& g, const ModelBundle& b,
                                                  ContextInterval c, const Tensor& f_x,
                                                  const Tensor& f_y, const Tensor& z_xy,
                                                  const Tensor& z_back_x,
                                                  const Tensor& z_yx,
                                                  const Tensor& z_back_y, int s_x, int s_y,
                                                  const LossWeights& w) {
  require_batch(f_x, "generator x batch");
  require_batch(f_y, "generator y batch");
  w.validate();

  GeneratorObjectiveNodes out;
  const NodeId fx = g.constant(f_x);
  const NodeId fy = g.constant(f_y);
  out.fake_y = generator_forward_node(g, b.gen_xy, b.embedding, c, fx, g.constant(z_xy));
  out.fake_x =
      generator_forward_node(g, b.gen_yx, b.embedding, reverse(c), fy, g.constant(z_yx));
  out.gan_xy = generator_adversarial_node(g, b.critic_y, b.embedding, c, out.fake_y);
  out.gan_yx =
      generator_adversarial_node(g, b.critic_x, b.embedding, reverse(c), out.fake_x);
  out.cycle = cycle_from_fakes(g, b.gen_xy, b.gen_yx, b.embedding, c, fx, out.fake_y,
                               g.constant(z_back_x), fy, out.fake_x, g.constant(z_back_y));
  out.cls_y = classification_loss_node(g, b.classifier, out.fake_y, s_y);
  out.cls_x = classification_loss_node(g, b.classifier, out.fake_x, s_x);
  out.total = compose_total_node(g, out.gan_xy, out.gan_yx, out.cycle, out.cls_y,
                                 out.cls_x, w);
  return out;
}

FullObjectiveNodes full_objective_nodes(Graph& g, const ModelBundle& b, ContextInterval c,
                                        const Tensor& f_x, const Tensor& f_y,
                                        const Tensor& z_xy, const Tensor& z_back_x,
                                        const Tensor& z_yx, const Tensor& z_back_y,
                                        const Tensor& f_hat_x, const Tensor& f_hat_y,
                                        int s_x, int s_y, const LossWeights& w) {
  require_batch(f_x, "objective x batch");
  require_batch(f_y, "objective y batch");
  w.validate();

  FullObjectiveNodes out;
  const NodeId fx = g.constant(f_x);
  const NodeId fy = g.constant(f_y);
  const NodeId fake_y =
      generator_forward_node(g, b.gen_xy, b.embedding, c, fx, g.constant(z_xy));
  const NodeId fake_x =
      generator_forward_node(g, b.gen_yx, b.embedding, reverse(c), fy, g.constant(z_yx));

  const NodeId real_score_y = g.mean(critic_forward_node(g, b.critic_y, b.embedding, c, fy));
  const NodeId fake_score_y =
      g.mean(critic_forward_node(g, b.critic_y, b.embedding, c, fake_y));
  const NodeId pen_y = gradient_penalty_node(g, b.critic_y, b.embedding, c, f_hat_y);
  out.gan_xy = g.sub(g.sub(real_score_y, fake_score_y),
                     g.scalar_affine(pen_y, w.lambda2, 0.0));

  const NodeId real_score_x =
      g.mean(critic_forward_node(g, b.critic_x, b.embedding, reverse(c), fx));
  const NodeId fake_score_x =
      g.mean(critic_forward_node(g, b.critic_x, b.embedding, reverse(c), fake_x));
  const NodeId pen_x =
      gradient_penalty_node(g, b.critic_x, b.embedding, reverse(c), f_hat_x);
  out.gan_yx = g.sub(g.sub(real_score_x, fake_score_x),
                     g.scalar_affine(pen_x, w.lambda2, 0.0));

  out.cycle = cycle_from_fakes(g, b.gen_xy, b.gen_yx, b.embedding, c, fx, fake_y,
                               g.constant(z_back_x), fy, fake_x, g.constant(z_back_y));
  out.cls_y = classification_loss_node(g, b.classifier, fake_y, s_y);
  out.cls_x = classification_loss_node(g, b.classifier, fake_x, s_x);
  out.total =
      compose_total_node(g, out.gan_xy, out.gan_yx, out.cycle, out.cls_y, out.cls_x, w);
  return out;
}

}  // namespace cafv
