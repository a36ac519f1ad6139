#include "cafv/grad_check.hpp"

#include <cmath>
#include <limits>

#include "cafv/errors.hpp"

namespace cafv {

GradMap finite_diff_grad(const std::function<double()>& loss_fn, ParamStore& params,
                         double epsilon, std::vector<std::string> names) {
  if (!(epsilon > 0.0)) throw ValidationError("finite_diff_grad: epsilon must be positive");
  if (names.empty()) names = params.trainable_names();

  GradMap out;
  for (const std::string& name : names) {
    Tensor& p = params.value(name);
    Tensor g = Tensor::zeros(p.shape);
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double original = p.data[i];
      p.data[i] = original + epsilon;
      const double up = loss_fn();
      p.data[i] = original - epsilon;
      const double down = loss_fn();
      p.data[i] = original;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_grad: non-finite loss at perturbed point of '" +
                           name + "'[" + std::to_string(i) + "]");
      }
      g.data[i] = (up - down) / (2.0 * epsilon);
    }
    out.emplace(name, std::move(g));
  }
  return out;
}

GradCheckReport compare_gradients(const GradMap& analytic, const GradMap& numeric,
                                  double noise_floor) {
  GradCheckReport report;
  for (const auto& [name, ana] : analytic) {
    if (numeric.find(name) == numeric.end()) {
      report.max_rel_error = std::numeric_limits<double>::infinity();
      report.worst_param = name + " (missing numeric gradient)";
    }
  }
  for (const auto& [name, num] : numeric) {
    auto it = analytic.find(name);
    if (it == analytic.end()) {
      report.max_rel_error = std::numeric_limits<double>::infinity();
      report.worst_param = name + " (missing analytic gradient)";
      continue;
    }
    const Tensor& ana = it->second;
    if (ana.shape != num.shape) {
      report.max_rel_error = std::numeric_limits<double>::infinity();
      report.worst_param = name + " (shape mismatch)";
      continue;
    }
    double diff_max = 0.0, ana_max = 0.0, num_max = 0.0;
    for (std::size_t i = 0; i < num.data.size(); ++i) {
      diff_max = std::max(diff_max, std::fabs(ana.data[i] - num.data[i]));
      ana_max = std::max(ana_max, std::fabs(ana.data[i]));
      num_max = std::max(num_max, std::fabs(num.data[i]));
      ++report.compared_values;
    }
    if (diff_max <= noise_floor) diff_max = 0.0;
    const double scale = std::max({ana_max, num_max, 1e-12});
    const double rel = diff_max / scale;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = name;
    }
  }
  return report;
}

}  // namespace cafv
