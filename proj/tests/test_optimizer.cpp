#include <cmath>
#include <limits>

#include "cafv/errors.hpp"
#include "cafv/grad_check.hpp"
#include "cafv/optimizer.hpp"
#include "cafv/param_store.hpp"
#include "doctest.h"

using namespace cafv;

TEST_CASE("sgd applies p -= lr * g exactly") {
  ParamStore store;
  store.add("p", Tensor::vec({1.0, -2.0}));
  GradMap grads;
  grads.emplace("p", Tensor::vec({0.5, 1.0}));
  optimizer_step(store, grads, OptimRule::Sgd, 0.1);
  CHECK(store.value("p").data[0] == 0.95);
  CHECK(store.value("p").data[1] == -2.0 - 0.1);
}

TEST_CASE("adam first step moves by roughly the learning rate") {
  ParamStore store;
  store.add("p", Tensor::vec({1.0}));
  GradMap grads;
  grads.emplace("p", Tensor::vec({1.0}));
  optimizer_step(store, grads, OptimRule::Adam, 1e-3);
  // m_hat = 1, v_hat = 1 => delta = lr / (1 + eps).
  CHECK(store.value("p").data[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-7));
  CHECK(store.adam_state("p").t == 1);
  optimizer_step(store, grads, OptimRule::Adam, 1e-3);
  CHECK(store.adam_state("p").t == 2);
  CHECK(store.value("p").data[0] < 1.0 - 1.9e-3);
}

TEST_CASE("adam moments follow the bias-corrected recurrences") {
  ParamStore store;
  store.add("p", Tensor::vec({0.0}));
  GradMap grads;
  grads.emplace("p", Tensor::vec({2.0}));
  AdamConfig cfg;
  optimizer_step(store, grads, OptimRule::Adam, 0.01, cfg);
  const AdamState& st = store.adam_state("p");
  CHECK(st.m.data[0] == doctest::Approx((1 - cfg.beta1) * 2.0).epsilon(1e-15));
  CHECK(st.v.data[0] == doctest::Approx((1 - cfg.beta2) * 4.0).epsilon(1e-15));
  const double m_hat = st.m.data[0] / (1 - cfg.beta1);
  const double v_hat = st.v.data[0] / (1 - cfg.beta2);
  const double expect = -0.01 * m_hat / (std::sqrt(v_hat) + cfg.eps);
  CHECK(store.value("p").data[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("frozen parameters are skipped without error") {
  ParamStore store;
  store.add("p", Tensor::vec({1.0}));
  store.add("frozen", Tensor::vec({5.0}), /*trainable=*/false);
  GradMap grads;
  grads.emplace("p", Tensor::vec({1.0}));
  grads.emplace("frozen", Tensor::vec({100.0}));
  optimizer_step(store, grads, OptimRule::Sgd, 0.1);
  CHECK(store.value("frozen").data[0] == 5.0);
  CHECK(store.value("p").data[0] == 0.9);
}

TEST_CASE("a non-finite gradient aborts the whole step") {
  ParamStore store;
  store.add("a", Tensor::vec({1.0}));
  store.add("b", Tensor::vec({2.0}));
  GradMap grads;
  grads.emplace("a", Tensor::vec({0.5}));
  grads.emplace("b", Tensor::vec({std::numeric_limits<double>::quiet_NaN()}));
  CHECK_THROWS_AS(optimizer_step(store, grads, OptimRule::Sgd, 0.1), NumericError);
  // "a" sorts before "b" but must not have been touched.
  CHECK(store.value("a").data[0] == 1.0);
  CHECK(store.value("b").data[0] == 2.0);
}

TEST_CASE("bad step inputs are rejected") {
  ParamStore store;
  store.add("p", Tensor::vec({1.0}));
  GradMap unknown;
  unknown.emplace("q", Tensor::vec({1.0}));
  CHECK_THROWS_AS(optimizer_step(store, unknown, OptimRule::Sgd, 0.1), ValidationError);

  GradMap misshapen;
  misshapen.emplace("p", Tensor::vec({1.0, 2.0}));
  CHECK_THROWS_AS(optimizer_step(store, misshapen, OptimRule::Sgd, 0.1), ShapeError);

  GradMap ok;
  ok.emplace("p", Tensor::vec({1.0}));
  CHECK_THROWS_AS(optimizer_step(store, ok, OptimRule::Sgd, 0.0), ValidationError);
  CHECK_THROWS_AS(optimizer_step(store, ok, OptimRule::Sgd, -0.1), ValidationError);
  CHECK(store.value("p").data[0] == 1.0);
}

TEST_CASE("central differences recover the gradient of a quadratic") {
  ParamStore store;
  store.add("w", Tensor::vec({1.0, 2.0, 3.0}));
  auto loss = [&]() {
    double s = 0.0;
    for (double v : store.value("w").data) s += v * v;
    return s;
  };
  const GradMap fd = finite_diff_grad(loss, store, 1e-5);
  CHECK(fd.at("w").data[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(fd.at("w").data[1] == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(fd.at("w").data[2] == doctest::Approx(6.0).epsilon(1e-8));
  // Probing must restore the original values bit for bit.
  CHECK(store.value("w").data == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("finite differences refuse a non-finite loss") {
  ParamStore store;
  store.add("w", Tensor::vec({1.0}));
  auto loss = [&]() { return std::numeric_limits<double>::quiet_NaN(); };
  CHECK_THROWS_AS(finite_diff_grad(loss, store, 1e-5), NumericError);
}

TEST_CASE("gradient comparison takes the worst relative error over parameters") {
  GradMap a, b;
  a.emplace("x", Tensor::vec({1.0, 2.0}));
  b.emplace("x", Tensor::vec({1.0, 2.0 + 2e-7}));
  a.emplace("y", Tensor::vec({10.0}));
  b.emplace("y", Tensor::vec({10.0}));
  const GradCheckReport report = compare_gradients(a, b);
  CHECK(report.max_rel_error == doctest::Approx(1e-7).epsilon(1e-3));
  CHECK(report.worst_param == "x");
  CHECK(report.compared_values == 3);

  GradMap missing;
  missing.emplace("x", Tensor::vec({1.0, 2.0}));
  CHECK(std::isinf(compare_gradients(a, missing).max_rel_error));
}
