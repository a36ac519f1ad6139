#include <cmath>
#include <vector>

#include "cafv/context.hpp"
#include "cafv/errors.hpp"
#include "cafv/models.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cafv;
using testsupport::tiny_config;

TEST_CASE("one-hot embedding is an indicator over the sorted interval set") {
  const ContextEmbedding emb = ContextEmbedding::one_hot({2, -1, 1, -2});
  CHECK(emb.interval_set() == std::vector<int>{-2, -1, 1, 2});
  CHECK(emb.dim() == 4);
  ParamStore store;
  CHECK(emb.embed(store, ContextInterval{1}).data == std::vector<double>{0, 0, 1, 0});
  CHECK(emb.embed(store, ContextInterval{-2}).data == std::vector<double>{1, 0, 0, 0});
  CHECK_THROWS_AS(emb.embed(store, ContextInterval{3}), ValidationError);
  CHECK_THROWS_AS(emb.embed(store, ContextInterval{0}), ValidationError);
  CHECK_THROWS_AS(ContextEmbedding::one_hot({}), ValidationError);
  CHECK_THROWS_AS(ContextEmbedding::one_hot({1, 0}), ValidationError);
  CHECK_THROWS_AS(ContextEmbedding::one_hot({1, 1}), ValidationError);
}

TEST_CASE("reverse flips the interval sign") {
  CHECK(reverse(ContextInterval{3}).delta == -3);
  CHECK(reverse(reverse(ContextInterval{-1})).delta == -1);
}

TEST_CASE("learned table embedding looks up a trainable row") {
  const ContextEmbedding emb = ContextEmbedding::learned_table({-1, 1}, 3, "tbl");
  ParamStore store;
  store.add("tbl", Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  CHECK(emb.embed(store, ContextInterval{-1}).data == std::vector<double>{1, 2, 3});
  CHECK(emb.embed(store, ContextInterval{1}).data == std::vector<double>{4, 5, 6});
  CHECK(emb.embed(store, ContextInterval{1}).data ==
        emb.embed(store, ContextInterval{1}).data);

  Graph g(&store);
  const NodeId root = g.sum(emb.embed_node(g, ContextInterval{1}));
  CHECK(g.forward(root).value() == 15.0);
  const GradMap grads = g.backward(root);
  CHECK(grads.at("tbl").data == std::vector<double>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("context weight adds the embedding-weighted slices") {
  const Tensor w_base = Tensor::matrix(2, 2, {1, 0, 0, 1});
  // Slice 0 = [[0.5, 0], [0, -0.5]], slice 1 = [[0, 1], [1, 0]].
  const Tensor v_flat = Tensor::matrix(2, 4, {0.5, 0, 0, -0.5, 0, 1, 1, 0});

  CHECK(context_weight(w_base, v_flat, Tensor::vec({0, 0})).data == w_base.data);
  CHECK(context_weight(w_base, v_flat, Tensor::vec({1, 0})).data ==
        std::vector<double>{1.5, 0, 0, 0.5});
  CHECK(context_weight(w_base, v_flat, Tensor::vec({0, 1})).data ==
        std::vector<double>{1, 1, 1, 1});
  CHECK_THROWS_AS(context_weight(w_base, v_flat, Tensor::vec({1, 0, 0})), ShapeError);
  CHECK_THROWS_AS(context_weight(w_base, Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}),
                                 Tensor::vec({1, 0})),
                  ShapeError);
}

TEST_CASE("context weight is affine in the embedding") {
  RngStream rng(5, "init");
  const Tensor w = rng.gaussian_tensor({3, 2});
  const Tensor v = rng.gaussian_tensor({4, 6});
  const Tensor e1 = rng.gaussian_tensor({4});
  const Tensor e2 = rng.gaussian_tensor({4});

  Tensor sum_e = e1;
  for (std::size_t i = 0; i < 4; ++i) sum_e.data[i] += e2.data[i];
  const Tensor lhs = context_weight(w, v, sum_e);
  const Tensor r1 = context_weight(w, v, e1);
  const Tensor r2 = context_weight(w, v, e2);
  for (std::size_t i = 0; i < lhs.data.size(); ++i) {
    CHECK(lhs.data[i] ==
          doctest::Approx(r1.data[i] + r2.data[i] - w.data[i]).epsilon(1e-12));
  }

  Tensor e_scaled = e1;
  for (double& x : e_scaled.data) x *= 2.5;
  const Tensor hom = context_weight(w, v, e_scaled);
  for (std::size_t i = 0; i < hom.data.size(); ++i) {
    CHECK(hom.data[i] ==
          doctest::Approx(w.data[i] + 2.5 * (r1.data[i] - w.data[i])).epsilon(1e-12));
  }
}

namespace {

// A bundle whose parameters the test then overwrites by hand.
ModelBundle zeroed_bundle(const TrainConfig& cfg) {
  ModelBundle b = testsupport::make_gan_problem(1, cfg).bundle;
  for (const std::string& name : b.params.names()) {
    for (double& v : b.params.value(name).data) v = 0.0;
  }
  return b;
}

}  // namespace

TEST_CASE("generator with zero weights emits the zero vector") {
  const TrainConfig cfg = tiny_config();
  ModelBundle b = zeroed_bundle(cfg);
  RngStream noise(3, "noise");
  const Tensor f = Tensor::matrix(1, 3, {1.0, 0.5, 0.2});
  const Tensor z = noise.gaussian_tensor({1, 2});
  const Tensor out =
      generator_forward(b.params, b.gen_xy, b.embedding, ContextInterval{1}, f, z);
  CHECK(out.shape == std::vector<std::size_t>{1, 3});
  CHECK(out.data == std::vector<double>{0, 0, 0});
}

TEST_CASE("generator output is non-negative, d_f wide, and deterministic") {
  const TrainConfig cfg = tiny_config(4, 3, 5);
  testsupport::GanProblem p = testsupport::make_gan_problem(11, cfg, 3);
  const Tensor out = generator_forward(p.bundle.params, p.bundle.gen_xy,
                                       p.bundle.embedding, p.c, p.f_x, p.z_xy);
  CHECK(out.shape == std::vector<std::size_t>{3, 4});
  for (double v : out.data) CHECK(v >= 0.0);
  const Tensor again = generator_forward(p.bundle.params, p.bundle.gen_xy,
                                         p.bundle.embedding, p.c, p.f_x, p.z_xy);
  CHECK(out.data == again.data);
}

TEST_CASE("different contexts change the generator output when the context tensor is active") {
  const TrainConfig cfg = tiny_config();
  testsupport::GanProblem p = testsupport::make_gan_problem(7, cfg);
  const Tensor up = generator_forward(p.bundle.params, p.bundle.gen_xy, p.bundle.embedding,
                                      ContextInterval{1}, p.f_x, p.z_xy);
  const Tensor down = generator_forward(p.bundle.params, p.bundle.gen_xy,
                                        p.bundle.embedding, ContextInterval{-1}, p.f_x,
                                        p.z_xy);
  CHECK(up.data != down.data);

  // With the context tensor zeroed the conditioning disappears.
  for (double& v : p.bundle.params.value(p.bundle.gen_xy.w_ctx()).data) v = 0.0;
  const Tensor a = generator_forward(p.bundle.params, p.bundle.gen_xy, p.bundle.embedding,
                                     ContextInterval{1}, p.f_x, p.z_xy);
  const Tensor b = generator_forward(p.bundle.params, p.bundle.gen_xy, p.bundle.embedding,
                                     ContextInterval{-1}, p.f_x, p.z_xy);
  CHECK(a.data == b.data);
}

TEST_CASE("cycle composition closes over the feature shape") {
  const TrainConfig cfg = tiny_config(6, 2, 4);
  testsupport::GanProblem p = testsupport::make_gan_problem(13, cfg, 2);
  const Tensor fake_y = generator_forward(p.bundle.params, p.bundle.gen_xy,
                                          p.bundle.embedding, p.c, p.f_x, p.z_xy);
  const Tensor back = generator_forward(p.bundle.params, p.bundle.gen_yx,
                                        p.bundle.embedding, reverse(p.c), fake_y,
                                        p.z_back_x);
  CHECK(back.shape == p.f_x.shape);
}

namespace {

// d_f=2, one hidden unit: w1_f = [[2], [-1]], w2 = [[3]], everything else 0.
ModelBundle tiny_critic_bundle() {
  ModelBundle b = zeroed_bundle(tiny_config(2, 2, 1));
  b.params.value(b.critic_y.w1_f()).data = {2.0, -1.0};
  b.params.value(b.critic_y.w2()).data = {3.0};
  return b;
}

}  // namespace

TEST_CASE("critic forward matches the hand evaluation") {
  ModelBundle zero = zeroed_bundle(tiny_config(2, 2, 1));
  const Tensor f = Tensor::matrix(1, 2, {1.0, 0.0});
  CHECK(critic_forward(zero.params, zero.critic_y, zero.embedding, ContextInterval{1}, f)
            .value() == 0.0);

  ModelBundle b = tiny_critic_bundle();
  // pre = 2*1 + (-1)*0 = 2 > 0, so D = 3 * 2 = 6.
  CHECK(critic_forward(b.params, b.critic_y, b.embedding, ContextInterval{1}, f).value() ==
        6.0);
  // pre = -2 < 0: leaky slope 0.2 gives D = 3 * (-0.4) = -1.2.
  const Tensor neg = Tensor::matrix(1, 2, {-1.0, 0.0});
  CHECK(critic_forward(b.params, b.critic_y, b.embedding, ContextInterval{1}, neg).value() ==
        doctest::Approx(-1.2).epsilon(1e-15));
}

TEST_CASE("critic conditioning reacts to the context columns") {
  ModelBundle b = tiny_critic_bundle();
  b.params.value(b.critic_y.w1_c()).data = {5.0, -5.0};  // one column per interval
  const Tensor f = Tensor::matrix(1, 2, {1.0, 0.0});
  const double up =
      critic_forward(b.params, b.critic_y, b.embedding, ContextInterval{1}, f).value();
  const double down =
      critic_forward(b.params, b.critic_y, b.embedding, ContextInterval{-1}, f).value();
  CHECK(up != down);
}

TEST_CASE("critic input gradient matches the hand chain rule") {
  ModelBundle b = tiny_critic_bundle();
  const Tensor pos = Tensor::matrix(1, 2, {1.0, 0.0});
  const Tensor g_pos =
      critic_input_gradient(b.params, b.critic_y, b.embedding, ContextInterval{1}, pos);
  CHECK(g_pos.data == std::vector<double>{6.0, -3.0});

  const Tensor neg = Tensor::matrix(1, 2, {-1.0, 0.0});
  const Tensor g_neg =
      critic_input_gradient(b.params, b.critic_y, b.embedding, ContextInterval{1}, neg);
  CHECK(g_neg.data[0] == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(g_neg.data[1] == doctest::Approx(-0.6).epsilon(1e-15));
}

TEST_CASE("critic input gradient agrees with finite differences on the input") {
  const TrainConfig cfg = tiny_config(4, 2, 5);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    testsupport::GanProblem p = testsupport::make_gan_problem(seed, cfg, 3);
    const Tensor pre = critic_preactivation(p.bundle.params, p.bundle.critic_y,
                                            p.bundle.embedding, p.c, p.f_x);
    bool clear = true;
    for (double v : pre.data) clear = clear && std::fabs(v) > 1e-3;
    if (!clear) continue;

    const Tensor analytic = critic_input_gradient(p.bundle.params, p.bundle.critic_y,
                                                  p.bundle.embedding, p.c, p.f_x);
    Tensor f = p.f_x;
    const double eps = 1e-6;
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      const double orig = f.data[i];
      f.data[i] = orig + eps;
      Tensor up = critic_forward(p.bundle.params, p.bundle.critic_y, p.bundle.embedding,
                                 p.c, f);
      f.data[i] = orig - eps;
      Tensor down = critic_forward(p.bundle.params, p.bundle.critic_y, p.bundle.embedding,
                                   p.c, f);
      f.data[i] = orig;
      double up_sum = 0.0, down_sum = 0.0;
      for (double v : up.data) up_sum += v;
      for (double v : down.data) down_sum += v;
      const double fd = (up_sum - down_sum) / (2 * eps);
      CHECK(analytic.data[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("classifier probabilities are a proper softmax") {
  const TrainConfig cfg = tiny_config(2, 2, 4);
  ModelBundle b = zeroed_bundle(cfg);
  ClassifierSpec cls{"c4.", 2, {10, 11, 12, 13}};
  RngStream init(2, "cls-init");
  register_classifier_params(b.params, cls, init);
  for (double& v : b.params.value(cls.w()).data) v = 0.0;

  const Tensor f = Tensor::matrix(1, 2, {0.3, 0.7});
  const Tensor uniform = classifier_probs(b.params, cls, f);
  for (double v : uniform.data) CHECK(v == 0.25);

  // Logits [ln 1, ln 3, 0, 0] via the bias alone.
  b.params.value(cls.b()).data = {0.0, std::log(3.0), -1e9, -1e9};
  const Tensor probs = classifier_probs(b.params, cls, f);
  CHECK(probs.data[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(probs.data[1] == doctest::Approx(0.75).epsilon(1e-12));
  double total = 0.0;
  for (double v : probs.data) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("classifier prediction takes the argmax with smallest-label ties") {
  ParamStore store;
  ClassifierSpec cls{"c3.", 2, {14, 16, 17}};
  RngStream init(2, "cls-init");
  register_classifier_params(store, cls, init);
  for (double& v : store.value(cls.w()).data) v = 0.0;
  store.value(cls.b()).data = {std::log(0.1), std::log(0.7), std::log(0.2)};

  const Tensor f = Tensor::matrix(1, 2, {1.0, 1.0});
  CHECK(classifier_predict(store, cls, f) == 16);

  // Exact tie between 16 and 17.
  store.value(cls.b()).data = {0.0, 2.0, 2.0};
  CHECK(classifier_predict(store, cls, f) == 16);

  // Constant logit shifts change nothing.
  store.value(cls.b()).data = {100.0, 102.0, 102.0};
  CHECK(classifier_predict(store, cls, f) == 16);

  CHECK_THROWS_AS(cls.index_of_label(15), ValidationError);
}

TEST_CASE("bundle registration is complete and classifier starts frozen") {
  const TrainConfig cfg = tiny_config();
  RngStream init(1, "init");
  ModelBundle b = make_bundle(cfg, {12, 10, 11}, init);
  CHECK(b.classifier.labels == std::vector<int>{10, 11, 12});
  CHECK(b.params.contains("gen_xy.w0"));
  CHECK(b.params.contains("gen_yx.w_ctx"));
  CHECK(b.params.contains("critic_x.w2"));
  CHECK(b.params.contains("critic_y.w1_c"));
  CHECK(b.params.contains("cls.w"));
  CHECK_FALSE(b.params.trainable("cls.w"));
  CHECK(b.params.trainable("gen_xy.w_base"));

  RngStream init2(1, "init");
  ModelBundle b2 = make_bundle(cfg, {10, 11, 12}, init2);
  for (const std::string& name : b.params.names()) {
    CHECK(b.params.value(name).data == b2.params.value(name).data);
  }

  RngStream init3(1, "init");
  CHECK_THROWS_AS(make_bundle(cfg, {10}, init3), ValidationError);
  RngStream init4(1, "init");
  CHECK_THROWS_AS(make_bundle(cfg, {10, 10, 11}, init4), ValidationError);
}
