#pragma once

// Shared helpers for building small, fully-seeded model instances in tests.

#include <cmath>
#include <string>
#include <vector>

#include "cafv/config.hpp"
#include "cafv/losses.hpp"
#include "cafv/models.hpp"
#include "cafv/rng.hpp"

namespace cafv::testsupport {

inline TrainConfig tiny_config(std::size_t d_f = 3, std::size_t d_z = 2,
                               std::size_t hidden = 4) {
  TrainConfig cfg;
  cfg.feature_dim = d_f;
  cfg.noise_dim = d_z;
  cfg.hidden_generator = hidden;
  cfg.hidden_critic = hidden;
  cfg.batch_size = 4;
  return cfg;
}

inline Tensor positive_batch(RngStream& rng, std::size_t n, std::size_t d) {
  Tensor t = Tensor::zeros({n, d});
  for (double& v : t.data) v = rng.uniform(0.2, 1.5);
  return t;
}

// Everything one generator/critic objective needs, drawn from a single seed.
struct GanProblem {
  ModelBundle bundle;
  ContextInterval c{1};
  int s_x = 10;
  int s_y = 11;
  Tensor f_x, f_y;
  Tensor z_xy, z_back_x, z_yx, z_back_y;
  Tensor f_hat_x, f_hat_y;
  Tensor fake_x0, fake_y0;  // generator outputs at the initial parameters
  LossWeights weights;
};

inline GanProblem make_gan_problem(std::uint64_t seed, const TrainConfig& cfg,
                                   std::size_t batch = 2) {
  RngStream init(seed, "init");
  GanProblem p{make_bundle(cfg, {10, 11, 12}, init)};
  RngStream data(seed, "data");
  p.f_x = positive_batch(data, batch, cfg.feature_dim);
  p.f_y = positive_batch(data, batch, cfg.feature_dim);
  RngStream noise(seed, "noise");
  p.z_xy = noise.gaussian_tensor({batch, cfg.noise_dim});
  p.z_back_x = noise.gaussian_tensor({batch, cfg.noise_dim});
  p.z_yx = noise.gaussian_tensor({batch, cfg.noise_dim});
  p.z_back_y = noise.gaussian_tensor({batch, cfg.noise_dim});
  RngStream alpha(seed, "alpha");
  p.fake_y0 = generator_forward(p.bundle.params, p.bundle.gen_xy, p.bundle.embedding, p.c,
                                p.f_x, p.z_xy);
  p.fake_x0 = generator_forward(p.bundle.params, p.bundle.gen_yx, p.bundle.embedding,
                                reverse(p.c), p.f_y, p.z_yx);
  p.f_hat_y = interpolate_batch(p.f_y, p.fake_y0, alpha);
  p.f_hat_x = interpolate_batch(p.f_x, p.fake_x0, alpha);
  return p;
}

// True when every activation input and every row norm in the evaluated graph
// sits at least `margin` away from its non-differentiable point.
inline bool kink_free(const Graph& g, NodeId root, double margin = 1e-3) {
  for (NodeId id : g.ancestors(root)) {
    const Value& v = g.node(id);
    if (v.op == OpKind::Relu || v.op == OpKind::LeakyRelu) {
      for (double pre : g.node(v.parents[0]).payload.data) {
        if (std::fabs(pre) <= margin) return false;
      }
    }
    if (v.op == OpKind::RowL2Norm) {
      for (double n : g.payload(id).data) {
        if (n <= margin) return false;
      }
    }
  }
  return true;
}

// The gradient-penalty mask lives outside the graph; its pre-activations
// must clear the margin too or a parameter perturbation could flip it.
inline bool penalty_mask_clear(const GanProblem& p, double margin = 1e-3) {
  for (const auto& [critic, c, f_hat] :
       {std::tuple<const CriticSpec&, ContextInterval, const Tensor&>{
            p.bundle.critic_y, p.c, p.f_hat_y},
        std::tuple<const CriticSpec&, ContextInterval, const Tensor&>{
            p.bundle.critic_x, reverse(p.c), p.f_hat_x}}) {
    const Tensor pre =
        critic_preactivation(p.bundle.params, critic, p.bundle.embedding, c, f_hat);
    for (double v : pre.data) {
      if (std::fabs(v) <= margin) return false;
    }
  }
  return true;
}

}  // namespace cafv::testsupport
