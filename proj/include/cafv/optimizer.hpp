#pragma once

#include "cafv/param_store.hpp"

namespace cafv {

enum class OptimRule { Sgd, Adam };

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Applies one update for every parameter named in grads. SGD is plain
// gradient descent without momentum; Adam keeps per-parameter moments in
// the store and uses bias correction.
//
// All gradients are validated before anything is mutated: a non-finite
// gradient aborts the whole step with no partial writes. Gradients for
// frozen parameters are skipped with a warning.
void optimizer_step(ParamStore& store, const GradMap& grads, OptimRule rule, double lr,
                    const AdamConfig& adam = {});

}  // namespace cafv
