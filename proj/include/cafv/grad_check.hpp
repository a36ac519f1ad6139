#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cafv/param_store.hpp"

namespace cafv {

// Central-difference gradient of loss_fn with respect to the named
// parameters (default: every trainable parameter). loss_fn must read the
// parameters from the store so in-place perturbations are visible; each
// parameter value is restored exactly before moving on. The oracle stays
// independent of any analytic gradient path.
GradMap finite_diff_grad(const std::function<double()>& loss_fn, ParamStore& params,
                         double epsilon, std::vector<std::string> names = {});

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t compared_values = 0;
};

// Per-parameter relative error: max-norm of the difference over the larger
// of the two max-norms. Parameters present in only one map count as errors.
//
// Central differences carry cancellation noise of about ulp(loss) / (2 eps);
// zero-gradient parameters would otherwise report relative error 1 on pure
// noise. Differences at or below noise_floor are treated as exact agreement.
GradCheckReport compare_gradients(const GradMap& analytic, const GradMap& numeric,
                                  double noise_floor = 0.0);

}  // namespace cafv
