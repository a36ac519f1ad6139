#include <cmath>
#include <vector>

#include "cafv/errors.hpp"
#include "cafv/grad_check.hpp"
#include "cafv/losses.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cafv;
using testsupport::make_gan_problem;
using testsupport::tiny_config;

TEST_CASE("mean L1 over a batch") {
  ParamStore store;
  Graph g(&store);
  const NodeId a = g.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const NodeId b = g.constant(Tensor::matrix(2, 2, {2, 3, 4, 5}));
  CHECK(g.forward(l1_mean_node(g, a, b)).value() == 1.0);

  Graph g2(&store);
  const NodeId c = g2.constant(Tensor::matrix(1, 2, {1, 2}));
  const NodeId d = g2.constant(Tensor::matrix(1, 2, {3, 1}));
  CHECK(g2.forward(l1_mean_node(g2, c, d)).value() == 1.5);
}

TEST_CASE("interpolation stays on the segment with one alpha per row") {
  RngStream alpha(3, "alpha");
  const Tensor real = Tensor::matrix(2, 2, {0, 0, 10, 10});
  const Tensor fake = Tensor::matrix(2, 2, {1, 1, 20, 20});
  const Tensor mix = interpolate_batch(real, fake, alpha);
  // Within a row both coordinates share one alpha.
  CHECK(mix.at(0, 0) == mix.at(0, 1));
  CHECK(mix.at(1, 0) == mix.at(1, 1));
  CHECK(mix.at(0, 0) >= 0.0);
  CHECK(mix.at(0, 0) <= 1.0);
  CHECK(mix.at(1, 0) >= 10.0);
  CHECK(mix.at(1, 0) <= 20.0);

  RngStream alpha2(4, "alpha");
  const Tensor same = interpolate_batch(real, real, alpha2);
  CHECK(same.data == real.data);

  RngStream alpha3(5, "alpha");
  CHECK_THROWS_AS(interpolate_batch(Tensor::zeros({0, 2}), Tensor::zeros({0, 2}), alpha3),
                  ValidationError);
  CHECK_THROWS_AS(interpolate_batch(real, Tensor::zeros({2, 3}), alpha3), ShapeError);
}

namespace {

// Critic with a single huge-bias hidden unit: D is exactly linear with
// input gradient w over the whole sampled region.
ModelBundle linear_critic(std::vector<double> w) {
  TrainConfig cfg = tiny_config(w.size(), 2, 1);
  testsupport::GanProblem p = make_gan_problem(1, cfg);
  ModelBundle b = std::move(p.bundle);
  for (const std::string& name : b.params.names()) {
    for (double& v : b.params.value(name).data) v = 0.0;
  }
  b.params.value(b.critic_y.w1_f()).data = w;
  b.params.value(b.critic_y.w2()).data = {1.0};
  b.params.value(b.critic_y.b1()).data = {1e6};
  return b;
}

}  // namespace

TEST_CASE("gradient penalty of a linear critic has the closed form") {
  ModelBundle b = linear_critic({3.0, 4.0});
  RngStream data(9, "data");
  RngStream alpha(9, "alpha");
  for (int round = 0; round < 5; ++round) {
    const Tensor real = testsupport::positive_batch(data, 4, 2);
    const Tensor fake = testsupport::positive_batch(data, 4, 2);
    const double pen = gradient_penalty(b.params, b.critic_y, b.embedding,
                                        ContextInterval{1}, real, fake, alpha);
    CHECK(std::fabs(pen - 16.0) <= 1e-10);
  }

  ModelBundle unit = linear_critic({0.6, 0.8});
  const Tensor real = testsupport::positive_batch(data, 3, 2);
  const Tensor fake = testsupport::positive_batch(data, 3, 2);
  const double pen = gradient_penalty(unit.params, unit.critic_y, unit.embedding,
                                      ContextInterval{1}, real, fake, alpha);
  CHECK(std::fabs(pen) <= 1e-10);
}

TEST_CASE("critic objective on a zero critic is minus lambda2") {
  ModelBundle b = linear_critic({0.0, 0.0});
  b.params.value(b.critic_y.w2()).data = {0.0};
  b.params.value(b.critic_y.b1()).data = {0.0};
  RngStream data(2, "data");
  const Tensor real = testsupport::positive_batch(data, 3, 2);
  const Tensor fake = testsupport::positive_batch(data, 3, 2);
  RngStream alpha(2, "alpha");
  const Tensor f_hat = interpolate_batch(real, fake, alpha);

  LossWeights w;
  Graph g(&b.params);
  const CriticObjectiveNodes nodes = critic_objective_nodes(
      g, b.critic_y, b.embedding, ContextInterval{1}, real, fake, f_hat, w);
  g.forward(nodes.neg_objective);
  CHECK(g.payload(nodes.penalty).value() == 1.0);
  CHECK(g.payload(nodes.objective).value() == -w.lambda2);
  CHECK(g.payload(nodes.neg_objective).value() == w.lambda2);
}

TEST_CASE("identical real and fake batches cancel the score terms") {
  const TrainConfig cfg = tiny_config();
  testsupport::GanProblem p = make_gan_problem(21, cfg, 3);
  RngStream alpha(21, "alpha");
  const Tensor f_hat = interpolate_batch(p.f_x, p.f_x, alpha);
  Graph g(&p.bundle.params);
  const CriticObjectiveNodes nodes = critic_objective_nodes(
      g, p.bundle.critic_x, p.bundle.embedding, p.c, p.f_x, p.f_x, f_hat, p.weights);
  g.forward(nodes.objective);
  const double pen = g.payload(nodes.penalty).value();
  CHECK(g.payload(nodes.objective).value() == -p.weights.lambda2 * pen);
}

TEST_CASE("generator adversarial term is the negated fake score") {
  const TrainConfig cfg = tiny_config();
  testsupport::GanProblem p = make_gan_problem(31, cfg, 2);
  const Tensor fake = generator_forward(p.bundle.params, p.bundle.gen_xy,
                                        p.bundle.embedding, p.c, p.f_x, p.z_xy);

  Graph g(&p.bundle.params);
  const NodeId adv =
      generator_adversarial_node(g, p.bundle.critic_y, p.bundle.embedding, p.c,
                                 g.constant(fake));
  const double adv_value = g.forward(adv).value();

  Graph g2(&p.bundle.params);
  const double mean_fake =
      g2.forward(g2.mean(critic_forward_node(g2, p.bundle.critic_y, p.bundle.embedding,
                                             p.c, g2.constant(fake))))
          .value();
  CHECK(adv_value == -mean_fake);

  ModelBundle zero = linear_critic({0.0, 0.0});
  zero.params.value(zero.critic_y.w2()).data = {0.0};
  zero.params.value(zero.critic_y.b1()).data = {0.0};
  Graph g3(&zero.params);
  const NodeId z_adv = generator_adversarial_node(
      g3, zero.critic_y, zero.embedding, ContextInterval{1},
      g3.constant(Tensor::matrix(2, 2, {1, 2, 3, 4})));
  CHECK(g3.forward(z_adv).value() == 0.0);
}

TEST_CASE("classification loss closed forms") {
  const TrainConfig cfg = tiny_config(2, 2, 4);
  testsupport::GanProblem p = make_gan_problem(1, cfg);
  ParamStore store;
  ClassifierSpec cls{"cls.", 2, {10, 11, 12, 13}};
  RngStream init(1, "cls-init");
  register_classifier_params(store, cls, init, /*trainable=*/false);
  for (double& v : store.value(cls.w()).data) v = 0.0;

  const Tensor batch = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  Graph g(&store);
  const NodeId loss = classification_loss_node(g, cls, g.constant(batch), 12);
  CHECK(g.forward(loss).value() == doctest::Approx(std::log(4.0)).epsilon(1e-15));

  // Probability 1 on the target makes the loss vanish.
  store.value(cls.b()).data = {0, 0, 200.0, 0};
  Graph g2(&store);
  const NodeId zero_loss = classification_loss_node(g2, cls, g2.constant(batch), 12);
  CHECK(g2.forward(zero_loss).value() == 0.0);

  Graph g3(&store);
  CHECK_THROWS_AS(classification_loss_node(g3, cls, g3.constant(batch), 15),
                  ValidationError);
}

TEST_CASE("classification loss trains the generator, not the frozen classifier") {
  const TrainConfig cfg = tiny_config();
  testsupport::GanProblem p = make_gan_problem(41, cfg);
  Graph g(&p.bundle.params);
  const NodeId fake = generator_forward_node(g, p.bundle.gen_xy, p.bundle.embedding, p.c,
                                             g.constant(p.f_x), g.constant(p.z_xy));
  const NodeId loss = classification_loss_node(g, p.bundle.classifier, fake, 11);
  g.forward(loss);
  const GradMap grads = g.backward(loss);
  CHECK(grads.count("cls.w") == 0);
  CHECK(grads.count("cls.b") == 0);
  double magnitude = 0.0;
  for (double v : grads.at("gen_xy.w0").data) magnitude += std::fabs(v);
  CHECK(magnitude > 0.0);
}

namespace {

// Both generators pass the feature block through untouched: first layer
// copies f (ignoring z), context tensor zero, output weight identity.
void make_identity_generator(ModelBundle& b, const GeneratorSpec& gen) {
  const std::size_t d_f = gen.d_f;
  ParamStore& ps = b.params;
  Tensor w0 = Tensor::zeros({d_f + gen.d_z, gen.hidden});
  for (std::size_t i = 0; i < d_f; ++i) w0.at(i, i) = 1.0;
  ps.value(gen.w0()).data = w0.data;
  ps.value(gen.b0()).data.assign(gen.hidden, 0.0);
  Tensor wb = Tensor::zeros({d_f, gen.hidden});
  for (std::size_t i = 0; i < d_f; ++i) wb.at(i, i) = 1.0;
  ps.value(gen.w_base()).data = wb.data;
  for (double& v : ps.value(gen.w_ctx()).data) v = 0.0;
  ps.value(gen.b_out()).data.assign(d_f, 0.0);
}

}  // namespace

TEST_CASE("cycle loss hand cases") {
  TrainConfig cfg = tiny_config(2, 2, 2);
  testsupport::GanProblem p = make_gan_problem(1, cfg, 2);
  make_identity_generator(p.bundle, p.bundle.gen_xy);
  make_identity_generator(p.bundle, p.bundle.gen_yx);

  Graph g(&p.bundle.params);
  const NodeId cyc = cycle_loss_node(
      g, p.bundle.gen_xy, p.bundle.gen_yx, p.bundle.embedding, p.c, g.constant(p.f_x),
      g.constant(p.z_xy), g.constant(p.z_back_x), g.constant(p.f_y), g.constant(p.z_yx),
      g.constant(p.z_back_y));
  CHECK(g.forward(cyc).value() == 0.0);

  // Shift the return trip by +1 per coordinate: each side reconstructs
  // input+1, so each side contributes exactly 1.
  p.bundle.params.value(p.bundle.gen_yx.b_out()).data = {1.0, 1.0};
  Graph g2(&p.bundle.params);
  const NodeId off = cycle_loss_node(
      g2, p.bundle.gen_xy, p.bundle.gen_yx, p.bundle.embedding, p.c, g2.constant(p.f_x),
      g2.constant(p.z_xy), g2.constant(p.z_back_x), g2.constant(p.f_y),
      g2.constant(p.z_yx), g2.constant(p.z_back_y));
  CHECK(g2.forward(off).value() == 2.0);
}

TEST_CASE("generator objective recomposes bit-exactly from its parts") {
  const TrainConfig cfg = tiny_config();
  for (std::uint64_t seed = 50; seed < 54; ++seed) {
    testsupport::GanProblem p = make_gan_problem(seed, cfg, 2);
    Graph g(&p.bundle.params);
    const GeneratorObjectiveNodes nodes =
        generator_objective_nodes(g, p.bundle, p.c, p.f_x, p.f_y, p.z_xy, p.z_back_x,
                                  p.z_yx, p.z_back_y, p.s_x, p.s_y, p.weights);
    const double total = g.forward(nodes.total).value();
    const double recomposed = compose_total(
        g.payload(nodes.gan_xy).value(), g.payload(nodes.gan_yx).value(),
        g.payload(nodes.cycle).value(), g.payload(nodes.cls_y).value(),
        g.payload(nodes.cls_x).value(), p.weights);
    CHECK(total == recomposed);

    LossWeights off;
    off.lambda1 = 0.0;
    off.beta = 0.0;
    Graph g2(&p.bundle.params);
    const GeneratorObjectiveNodes plain =
        generator_objective_nodes(g2, p.bundle, p.c, p.f_x, p.f_y, p.z_xy, p.z_back_x,
                                  p.z_yx, p.z_back_y, p.s_x, p.s_y, off);
    const double adv_only = g2.forward(plain.total).value();
    CHECK(adv_only == (g2.payload(plain.gan_xy).value() + g2.payload(plain.gan_yx).value()));
  }
}

TEST_CASE("cycle, classification and penalty terms are never negative") {
  const TrainConfig cfg = tiny_config();
  for (std::uint64_t seed = 60; seed < 70; ++seed) {
    testsupport::GanProblem p = make_gan_problem(seed, cfg, 2);
    Graph g(&p.bundle.params);
    const GeneratorObjectiveNodes nodes =
        generator_objective_nodes(g, p.bundle, p.c, p.f_x, p.f_y, p.z_xy, p.z_back_x,
                                  p.z_yx, p.z_back_y, p.s_x, p.s_y, p.weights);
    g.forward(nodes.total);
    CHECK(g.payload(nodes.cycle).value() >= 0.0);
    CHECK(g.payload(nodes.cls_x).value() >= 0.0);
    CHECK(g.payload(nodes.cls_y).value() >= 0.0);

    Graph g2(&p.bundle.params);
    const NodeId pen = gradient_penalty_node(g2, p.bundle.critic_y, p.bundle.embedding,
                                             p.c, p.f_hat_y);
    CHECK(g2.forward(pen).value() >= 0.0);
  }
}

namespace {

struct GradCheckOutcome {
  double max_rel = 0.0;
  int checked = 0;
  std::string worst;
};

// Runs `build` through backward and finite differences on kink-free draws.
template <typename BuildFn>
GradCheckOutcome gradcheck_seeds(const TrainConfig& cfg, std::uint64_t base_seed,
                                 int wanted, BuildFn build) {
  GradCheckOutcome out;
  std::uint64_t seed = base_seed;
  while (out.checked < wanted) {
    ++seed;
    testsupport::GanProblem p = make_gan_problem(seed, cfg, 2);
    Graph g(&p.bundle.params);
    const NodeId root = build(g, p);
    g.forward(root);
    if (!testsupport::kink_free(g, root) || !testsupport::penalty_mask_clear(p)) continue;

    const GradMap analytic = g.backward(root);
    const GradMap numeric = finite_diff_grad(
        [&]() {
          Graph fg(&p.bundle.params);
          return fg.forward(build(fg, p)).value();
        },
        p.bundle.params, 1e-5);
    // Floor at roughly twice the cancellation noise of central differences
    // on a loss of magnitude ~100 (ulp(L)/2eps), so exactly-cancelling
    // gradients are not compared against pure rounding noise.
    const GradCheckReport rep = compare_gradients(analytic, numeric, 2e-9);
    if (rep.max_rel_error > out.max_rel) {
      out.max_rel = rep.max_rel_error;
      out.worst = rep.worst_param;
    }
    ++out.checked;
  }
  return out;
}

}  // namespace

TEST_CASE("loss gradients agree with finite differences") {
  const TrainConfig cfg = tiny_config(3, 2, 4);

  SUBCASE("cycle loss") {
    const auto out = gradcheck_seeds(cfg, 100, 5, [](Graph& g, testsupport::GanProblem& p) {
      return cycle_loss_node(g, p.bundle.gen_xy, p.bundle.gen_yx, p.bundle.embedding, p.c,
                             g.constant(p.f_x), g.constant(p.z_xy), g.constant(p.z_back_x),
                             g.constant(p.f_y), g.constant(p.z_yx),
                             g.constant(p.z_back_y));
    });
    CHECK(out.max_rel <= 1e-6);
  }

  SUBCASE("classification loss through the generator") {
    const auto out = gradcheck_seeds(cfg, 200, 5, [](Graph& g, testsupport::GanProblem& p) {
      const NodeId fake = generator_forward_node(g, p.bundle.gen_xy, p.bundle.embedding,
                                                 p.c, g.constant(p.f_x),
                                                 g.constant(p.z_xy));
      return classification_loss_node(g, p.bundle.classifier, fake, p.s_y);
    });
    CHECK(out.max_rel <= 1e-6);
  }

  SUBCASE("critic objective with penalty") {
    const auto out = gradcheck_seeds(cfg, 300, 5, [](Graph& g, testsupport::GanProblem& p) {
      return critic_objective_nodes(g, p.bundle.critic_y, p.bundle.embedding, p.c, p.f_y,
                                    p.fake_y0, p.f_hat_y, p.weights)
          .neg_objective;
    });
    INFO("worst parameter: ", out.worst);
    CHECK(out.max_rel <= 1e-6);
  }

  SUBCASE("generator adversarial through the generator") {
    const auto out = gradcheck_seeds(cfg, 400, 5, [](Graph& g, testsupport::GanProblem& p) {
      const NodeId fake = generator_forward_node(g, p.bundle.gen_xy, p.bundle.embedding,
                                                 p.c, g.constant(p.f_x),
                                                 g.constant(p.z_xy));
      return generator_adversarial_node(g, p.bundle.critic_y, p.bundle.embedding, p.c,
                                        fake);
    });
    CHECK(out.max_rel <= 1e-6);
  }

  SUBCASE("full two-sided objective") {
    const auto out = gradcheck_seeds(cfg, 500, 5, [](Graph& g, testsupport::GanProblem& p) {
      return full_objective_nodes(g, p.bundle, p.c, p.f_x, p.f_y, p.z_xy, p.z_back_x,
                                  p.z_yx, p.z_back_y, p.f_hat_x, p.f_hat_y, p.s_x, p.s_y,
                                  p.weights)
          .total;
    });
    INFO("worst parameter: ", out.worst);
    CHECK(out.max_rel <= 1e-6);
  }
}

TEST_CASE("penalty gradient flows to critic parameters only") {
  const TrainConfig cfg = tiny_config();
  testsupport::GanProblem p = make_gan_problem(77, cfg, 2);
  Graph g(&p.bundle.params);
  const NodeId pen =
      gradient_penalty_node(g, p.bundle.critic_y, p.bundle.embedding, p.c, p.f_hat_y);
  g.forward(pen);
  const GradMap grads = g.backward(pen);
  double critic_mag = 0.0, other_mag = 0.0;
  for (const auto& [name, t] : grads) {
    double m = 0.0;
    for (double v : t.data) m += std::fabs(v);
    if (name.rfind("critic_y.", 0) == 0) {
      critic_mag += m;
    } else {
      other_mag += m;
    }
  }
  CHECK(critic_mag > 0.0);
  CHECK(other_mag == 0.0);
}
