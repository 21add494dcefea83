#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "mdtc/adam.hpp"

using namespace mdtc;

namespace {

Model tiny_model(std::uint64_t seed) {
  Rng rng(seed);
  HyperParams h;
  h.embed_dim = 2;
  h.conv_specs = {{2, 2}};
  h.dropout = 0.0;
  return make_model(ModelKind::Cond, {true, false}, h, 6, 2, 2, rng);
}

}  // namespace

TEST_CASE("zero gradient leaves the parameter untouched") {
  AdamConfig c;
  Tensor p = Tensor::row({1.5, -2.0});
  Tensor g = Tensor::zeros({2});
  Tensor m = Tensor::zeros({2}), v = Tensor::zeros({2});
  for (std::uint64_t t = 1; t <= 5; ++t) adam_update_tensor(p, g, m, v, c, t);
  CHECK(p[0] == 1.5);
  CHECK(p[1] == -2.0);
}

TEST_CASE("first step matches the hand-evaluated update") {
  AdamConfig c;  // alpha 1e-4, beta1 0.9, beta2 0.999, eps 1e-8
  Tensor p = Tensor::row({1.0});
  Tensor g = Tensor::row({1.0});
  Tensor m = Tensor::zeros({1}), v = Tensor::zeros({1});
  adam_update_tensor(p, g, m, v, c, 1);
  // mhat = vhat = 1 after bias correction, so the step is alpha/(1+eps).
  const double expected = 1.0 - c.alpha / (1.0 + c.eps);
  CHECK(std::abs(p[0] - expected) <= 1e-12);
  CHECK(m[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(v[0] == doctest::Approx(0.001).epsilon(1e-12));
}

TEST_CASE("constant gradient follows the geometric-series closed form") {
  // With g fixed, the bias corrections cancel: mhat = g, vhat = g^2, and
  // every step moves by exactly alpha * g / (|g| + eps).
  AdamConfig c;
  for (double g0 : {0.05, -0.8, 3.0, 250.0}) {
    Tensor p = Tensor::row({0.7});
    Tensor g = Tensor::row({g0});
    Tensor m = Tensor::zeros({1}), v = Tensor::zeros({1});
    const double step = c.alpha * g0 / (std::abs(g0) + c.eps);
    for (std::uint64_t t = 1; t <= 3; ++t) {
      adam_update_tensor(p, g, m, v, c, t);
      const double expected = 0.7 - static_cast<double>(t) * step;
      CHECK(std::abs(p[0] - expected) <= 1e-12);
    }
  }
}

TEST_CASE("constant-gradient step magnitude approaches alpha") {
  AdamConfig c;
  for (double g0 : {0.05, 1.0, 30.0, 1e4}) {
    Tensor p = Tensor::row({0.0});
    Tensor g = Tensor::row({g0});
    Tensor m = Tensor::zeros({1}), v = Tensor::zeros({1});
    double prev = 0.0;
    double magnitude = 0.0;
    for (std::uint64_t t = 1; t <= 3; ++t) {
      adam_update_tensor(p, g, m, v, c, t);
      magnitude = std::abs(p[0] - prev);
      prev = p[0];
    }
    CHECK(std::abs(magnitude - c.alpha) <= 1e-6 * c.alpha);
  }
}

TEST_CASE("sign of the step opposes the gradient") {
  AdamConfig c;
  Tensor p = Tensor::row({0.0, 0.0});
  Tensor g = Tensor::row({2.0, -2.0});
  Tensor m = Tensor::zeros({2}), v = Tensor::zeros({2});
  adam_update_tensor(p, g, m, v, c, 1);
  CHECK(p[0] < 0.0);
  CHECK(p[1] > 0.0);
}

TEST_CASE("adam_step walks every parameter group deterministically") {
  Model a = tiny_model(42);
  Model b = tiny_model(42);
  AdamState sa = make_adam_state(a.params, {});
  AdamState sb = make_adam_state(b.params, {});

  ParamSet grads = zeros_like(a.params);
  Rng rng(5);
  for (auto& ref : tensor_refs(grads))
    for (std::size_t i = 0; i < ref.tensor->size(); ++i)
      (*ref.tensor)[i] = rng.uniform(-1.0, 1.0);

  for (int step = 0; step < 3; ++step) {
    adam_step(a.params, grads, sa);
    adam_step(b.params, grads, sb);
  }
  CHECK(sa.t == 3);
  auto ra = tensor_refs(a.params);
  auto rb = tensor_refs(b.params);
  for (std::size_t i = 0; i < ra.size(); ++i)
    CHECK(*ra[i].tensor == *rb[i].tensor);
}

TEST_CASE("adam_step rejects bad gradients by name") {
  Model m = tiny_model(43);
  AdamState state = make_adam_state(m.params, {});
  ParamSet grads = zeros_like(m.params);
  grads.classifier.w[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(m.params, grads, state);
    FAIL("expected TrainError");
  } catch (const TrainError& e) {
    CHECK(std::string(e.what()).find("classifier.w") != std::string::npos);
  }

  ParamSet bad = zeros_like(m.params);
  bad.classifier.w = Tensor::zeros({1, 1});
  AdamState s2 = make_adam_state(m.params, {});
  CHECK_THROWS_AS(adam_step(m.params, bad, s2), TrainError);
}
