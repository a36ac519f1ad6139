#include "cafv/optimizer.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "cafv/errors.hpp"
#include "cafv/log.hpp"

namespace cafv {

void optimizer_step(ParamStore& store, const GradMap& grads, OptimRule rule, double lr,
                    const AdamConfig& adam) {
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ValidationError("optimizer_step: learning rate must be positive and finite");
  }

  // Validation pass first so a bad gradient can never leave the store
  // half-updated.
  for (const auto& [name, g] : grads) {
    const Tensor& p = store.value(name);  // throws for unknown names
    if (g.shape != p.shape) {
      throw ShapeError("optimizer_step: gradient for '" + name + "' has shape " +
                       g.shape_str() + ", parameter has " + p.shape_str());
    }
    if (!g.all_finite()) {
      throw NumericError("optimizer_step aborted: non-finite gradient for '" + name + "'");
    }
  }

  struct Staged {
    std::string name;
    Tensor value;
    AdamState state;
    bool has_state = false;
  };
  std::vector<Staged> staged;
  staged.reserve(grads.size());

  for (const auto& [name, g] : grads) {
    if (!store.trainable(name)) {
      log_info("optimizer_step: skipping frozen parameter '" + name + "'");
      continue;
    }
    Staged s;
    s.name = name;
    s.value = store.value(name);
    if (rule == OptimRule::Sgd) {
      for (std::size_t i = 0; i < s.value.data.size(); ++i) {
        s.value.data[i] -= lr * g.data[i];
      }
    } else {
      const AdamState& prev = store.adam_state(name);
      s.state = prev;
      s.state.t = prev.t + 1;
      const double bc1 = 1.0 - std::pow(adam.beta1, double(s.state.t));
      const double bc2 = 1.0 - std::pow(adam.beta2, double(s.state.t));
      for (std::size_t i = 0; i < s.value.data.size(); ++i) {
        const double gi = g.data[i];
        const double m = adam.beta1 * prev.m.data[i] + (1.0 - adam.beta1) * gi;
        const double v = adam.beta2 * prev.v.data[i] + (1.0 - adam.beta2) * gi * gi;
        s.state.m.data[i] = m;
        s.state.v.data[i] = v;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        s.value.data[i] -= lr * mhat / (std::sqrt(vhat) + adam.eps);
      }
      s.has_state = true;
    }
    if (!s.value.all_finite()) {
      throw NumericError("optimizer_step aborted: update for '" + name +
                         "' produced non-finite values");
    }
    staged.push_back(std::move(s));
  }

  for (Staged& s : staged) {
    store.value(s.name) = std::move(s.value);
    if (s.has_state) store.adam_state(s.name) = std::move(s.state);
  }
}

}  // namespace cafv
