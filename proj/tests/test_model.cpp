#include <cmath>
#include <optional>
#include <vector>

#include "doctest.h"
#include "mdtc/model.hpp"

using namespace mdtc;

namespace {

HyperParams tiny_hyper(double dropout = 0.0) {
  HyperParams h;
  h.embed_dim = 2;
  h.conv_specs = {{2, 2}, {3, 2}};
  h.dropout = dropout;
  h.lambda_d = 0.25;
  h.lambda_g = 0.5;
  return h;
}

Batch toy_batch(std::size_t n, std::size_t len, int vocab, int labels,
                int domains, std::uint64_t seed) {
  Rng rng(seed);
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> ids;
    for (std::size_t t = 0; t < len; ++t)
      ids.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(vocab))));
    b.ids.push_back(std::move(ids));
    b.labels.push_back(static_cast<int>(i % labels));
    b.domains.push_back(static_cast<int>(i % domains));
  }
  return b;
}

void zero_params(Model& m) {
  for (auto& ref : tensor_refs(m.params)) ref.tensor->fill(0.0);
}

bool all_zero(const Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] != 0.0) return false;
  return true;
}

bool bank_zero(const ConvBank& b) {
  for (const auto& w : b.weights)
    if (!all_zero(w)) return false;
  for (const auto& bi : b.biases)
    if (!all_zero(bi)) return false;
  return true;
}

// Equality over the parameters every architecture shares.
bool common_equal(ParamSet& a, ParamSet& b) {
  if (!(a.embedding.table == b.embedding.table)) return false;
  for (std::size_t i = 0; i < a.shared.weights.size(); ++i)
    if (!(a.shared.weights[i] == b.shared.weights[i]) ||
        !(a.shared.biases[i] == b.shared.biases[i]))
      return false;
  if (a.privates.size() != b.privates.size()) return false;
  for (std::size_t k = 0; k < a.privates.size(); ++k)
    for (std::size_t i = 0; i < a.privates[k].weights.size(); ++i)
      if (!(a.privates[k].weights[i] == b.privates[k].weights[i]) ||
          !(a.privates[k].biases[i] == b.privates[k].biases[i]))
        return false;
  return a.classifier.w == b.classifier.w && a.classifier.b == b.classifier.b;
}

}  // namespace

TEST_CASE("make_model head layout per architecture") {
  Rng rng(1);
  Model cond = make_model(ModelKind::Cond, {true, false}, tiny_hyper(), 10, 3,
                          4, rng);
  CHECK(cond.params.privates.size() == 4);
  CHECK(cond.params.discriminator.has_value());
  CHECK_FALSE(cond.params.generator.has_value());

  Model cond_off =
      make_model(ModelKind::Cond, {false, false}, tiny_hyper(), 10, 3, 4, rng);
  CHECK(cond_off.params.discriminator.has_value());  // head always present

  Model gen = make_model(ModelKind::Gen, {false, false}, tiny_hyper(), 10, 3,
                         4, rng);
  CHECK(gen.params.privates.size() == 1);
  CHECK(gen.params.discriminator.has_value());
  CHECK(gen.params.generator.has_value());

  Model base =
      make_model(ModelKind::Baseline, {false, false}, tiny_hyper(), 10, 3, 4, rng);
  CHECK(base.params.privates.empty());
  CHECK_FALSE(base.params.discriminator.has_value());
  CHECK_FALSE(base.params.generator.has_value());
  // The baseline doubles each width's filter count to match dim([h_s; h_p]).
  CHECK(base.params.shared.output_dim() == 2 * cond.params.shared.output_dim());
  CHECK(base.repr_dim() == cond.repr_dim());

  CHECK_THROWS_AS(
      make_model(ModelKind::Cond, {false, true}, tiny_hyper(), 10, 3, 4, rng),
      ConfigError);
}

TEST_CASE("tensor_refs enumerates in the persistence order") {
  Rng rng(2);
  Model gen = make_model(ModelKind::Gen, {true, true}, tiny_hyper(), 10, 2, 3,
                         rng);
  auto refs = tensor_refs(gen.params);
  std::vector<std::string> names;
  for (const auto& r : refs) names.push_back(r.name);
  std::vector<std::string> want = {
      "embedding",    "shared.w0",  "shared.b0",        "shared.w1",
      "shared.b1",    "private0.w0", "private0.b0",     "private0.w1",
      "private0.b1",  "classifier.w", "classifier.b",   "discriminator.w",
      "discriminator.b", "generator.w", "generator.b"};
  CHECK(names == want);
}

TEST_CASE("zeroed model predicts uniformly and its losses are logs") {
  Rng rng(3);
  Model m = make_model(ModelKind::Cond, {true, false}, tiny_hyper(), 10, 2, 3,
                       rng);
  zero_params(m);
  std::vector<int> ids = {1, 2, 3, 4, 5, 6};
  Prediction p = predict_instance(m, ids, 0, Mode::Eval);
  REQUIRE(p.class_probs.size() == 2);
  CHECK(p.class_probs[0] == 0.5);
  CHECK(p.class_probs[1] == 0.5);
  REQUIRE(p.disc_probs.size() == 3);
  CHECK(p.disc_probs[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  Batch b = toy_batch(4, 6, 10, 2, 3, 7);
  LossBreakdown loss = compute_loss(m, b, Mode::Eval);
  CHECK(loss.task == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(loss.adv == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(loss.gen == 0.0);
  CHECK(loss.total_reported == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng2(4);
  Model g = make_model(ModelKind::Gen, {true, true}, tiny_hyper(), 10, 2, 3,
                       rng2);
  zero_params(g);
  LossBreakdown gl = compute_loss(g, b, Mode::Eval);
  CHECK(gl.task == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(gl.adv == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(gl.gen == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(gl.total_reported ==
        doctest::Approx(std::log(2.0) + 0.5 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("hand-built baseline: embed, conv, pool, classify") {
  Model m;
  m.kind = ModelKind::Baseline;
  m.hyper = tiny_hyper();
  m.hyper.embed_dim = 1;
  m.hyper.dropout = 0.0;
  m.vocab_size = 4;
  m.n_labels = 2;
  m.n_domains = 1;
  m.params.embedding.table = Tensor::from({4, 1}, {0, 1, 2, 3});
  m.params.shared.specs = {{2, 1}};
  m.params.shared.weights = {Tensor::from({2, 1}, {1, 1})};
  m.params.shared.biases = {Tensor::row({0})};
  m.params.classifier.w = Tensor::from({1, 2}, {1, -1});
  m.params.classifier.b = Tensor::row({0, 0});

  // windows of [0,1,2,3] sum to [1,3,5]; pooled 5; logits (5, -5)
  Prediction p = predict_instance(m, {0, 1, 2, 3}, std::nullopt, Mode::Eval);
  CHECK(p.h_s[0] == 5.0);
  CHECK(p.class_probs[0] ==
        doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-14));

  Batch b;
  b.ids = {{0, 1, 2, 3}};
  b.labels = {1};
  b.domains = {0};
  LossBreakdown loss = compute_loss(m, b, Mode::Eval);
  CHECK(loss.task ==
        doctest::Approx(std::log1p(std::exp(10.0))).epsilon(1e-12));
}

TEST_CASE("cond routing: shared path identical, private path differs") {
  Rng rng(5);
  Model m = make_model(ModelKind::Cond, {true, false}, tiny_hyper(), 10, 2, 3,
                       rng);
  std::vector<int> ids = {1, 2, 3, 4, 5, 6};
  Prediction a = predict_instance(m, ids, 0, Mode::Eval);
  Prediction b = predict_instance(m, ids, 2, Mode::Eval);
  CHECK(a.h_s == b.h_s);
  CHECK(a.disc_probs == b.disc_probs);
  CHECK_FALSE(a.h_p == b.h_p);
  CHECK_FALSE(a.class_probs == b.class_probs);

  CHECK_THROWS_AS(predict_instance(m, ids, 3, Mode::Eval), RoutingError);
  CHECK_THROWS_AS(predict_instance(m, ids, std::nullopt, Mode::Eval),
                  RoutingError);
}

TEST_CASE("loss_backward rejects out-of-inventory ids") {
  Rng rng(6);
  Model m = make_model(ModelKind::Cond, {true, false}, tiny_hyper(), 10, 2, 3,
                       rng);
  Batch b = toy_batch(2, 6, 10, 2, 3, 8);
  b.domains[1] = 5;
  ParamSet grads = zeros_like(m.params);
  Rng step(1);
  CHECK_THROWS_AS(loss_backward(m, b, step, grads), RoutingError);
  b.domains[1] = 1;
  b.labels[0] = 9;
  CHECK_THROWS_AS(loss_backward(m, b, step, grads), TrainError);
}

TEST_CASE("lambda_d = 0 reproduces task-only gradients exactly") {
  Rng rng(7);
  HyperParams h = tiny_hyper(0.3);
  h.lambda_d = 0.0;
  Model on = make_model(ModelKind::Cond, {true, false}, h, 10, 2, 3, rng);
  Model off = on;
  off.switches.adversary = false;

  Batch b = toy_batch(5, 6, 10, 2, 3, 9);
  ParamSet g_on = zeros_like(on.params);
  ParamSet g_off = zeros_like(off.params);
  Rng r1(11), r2(11);
  LossBreakdown l_on = loss_backward(on, b, r1, g_on);
  LossBreakdown l_off = loss_backward(off, b, r2, g_off);

  CHECK(l_on.task == l_off.task);  // same dropout draws, same forward
  CHECK(l_off.adv == 0.0);
  CHECK(l_on.adv > 0.0);
  CHECK(common_equal(g_on, g_off));
  // The discriminator still trains on its own unscaled objective.
  CHECK_FALSE(all_zero(g_on.discriminator->w));
  CHECK(all_zero(g_off.discriminator->w));
}

TEST_CASE("lambda_g = 0 keeps the generator term out of every gradient") {
  Rng rng(8);
  HyperParams h = tiny_hyper(0.0);
  h.lambda_g = 0.0;
  Model on = make_model(ModelKind::Gen, {false, true}, h, 10, 2, 3, rng);
  Model off = on;
  off.switches.generator = false;

  Batch b = toy_batch(5, 6, 10, 2, 3, 10);
  ParamSet g_on = zeros_like(on.params);
  ParamSet g_off = zeros_like(off.params);
  Rng r1(12), r2(12);
  LossBreakdown l_on = loss_backward(on, b, r1, g_on);
  LossBreakdown l_off = loss_backward(off, b, r2, g_off);

  CHECK(l_on.gen > 0.0);  // the term is still measured
  CHECK(l_off.gen == 0.0);
  CHECK(common_equal(g_on, g_off));
  CHECK(all_zero(g_on.generator->w));
  CHECK(all_zero(g_on.generator->b));
}

TEST_CASE("private banks are isolated per domain") {
  Rng rng(9);
  Model m = make_model(ModelKind::Cond, {true, false}, tiny_hyper(), 10, 2, 3,
                       rng);
  Batch b = toy_batch(4, 6, 10, 2, 3, 13);
  for (auto& d : b.domains) d = 1;  // every instance routes through bank 1
  ParamSet grads = zeros_like(m.params);
  Rng step(2);
  loss_backward(m, b, step, grads);
  CHECK(bank_zero(grads.privates[0]));
  CHECK_FALSE(bank_zero(grads.privates[1]));
  CHECK(bank_zero(grads.privates[2]));
}

TEST_CASE("generator term never reaches the shared bank or discriminator") {
  Rng rng(10);
  HyperParams h = tiny_hyper(0.0);
  h.lambda_g = 0.7;
  Model m = make_model(ModelKind::Gen, {false, true}, h, 10, 2, 3, rng);
  Batch b = toy_batch(4, 6, 10, 2, 3, 14);
  ParamSet grads = zeros_like(m.params);
  Rng step(3);
  BackwardHooks hooks;
  hooks.include_task = false;  // leaves the lambda_g term alone
  loss_backward(m, b, step, grads, hooks);
  CHECK(bank_zero(grads.shared));
  CHECK(all_zero(grads.classifier.w));
  CHECK(all_zero(grads.discriminator->w));
  CHECK_FALSE(bank_zero(grads.privates[0]));
  CHECK_FALSE(all_zero(grads.generator->w));
  CHECK_FALSE(all_zero(grads.embedding.table));  // via the private bank
}

TEST_CASE("reversal scales the shared gradient by -lambda_d and spares theta_d") {
  Rng rng(11);
  HyperParams h = tiny_hyper(0.4);
  h.lambda_d = 0.25;
  Model m = make_model(ModelKind::Cond, {true, false}, h, 10, 2, 3, rng);
  Batch b = toy_batch(6, 6, 10, 2, 3, 15);

  BackwardHooks reversed;  // default multiplier: -lambda_d
  reversed.include_task = false;
  BackwardHooks raw;
  raw.grl_multiplier = 1.0;  // unreversed, unscaled
  raw.include_task = false;

  ParamSet g_rev = zeros_like(m.params);
  ParamSet g_raw = zeros_like(m.params);
  Rng r1(16), r2(16);
  loss_backward(m, b, r1, g_rev, reversed);
  loss_backward(m, b, r2, g_raw, raw);

  // theta_d sees the same gradient no matter what happens at the seam.
  CHECK(g_rev.discriminator->w == g_raw.discriminator->w);
  CHECK(g_rev.discriminator->b == g_raw.discriminator->b);

  // Everything upstream of the seam is the raw gradient times -lambda_d.
  auto rev_refs = tensor_refs(g_rev);
  auto raw_refs = tensor_refs(g_raw);
  for (std::size_t i = 0; i < rev_refs.size(); ++i) {
    if (rev_refs[i].name.rfind("discriminator", 0) == 0) continue;
    const Tensor& a = *rev_refs[i].tensor;
    const Tensor& n = *raw_refs[i].tensor;
    for (std::size_t j = 0; j < a.size(); ++j) {
      double want = -h.lambda_d * n[j];
      CHECK(std::abs(a[j] - want) <= 1e-10 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("matched-capacity baseline reproduces the gen task loss bitwise") {
  Rng rng(12);
  HyperParams h = tiny_hyper(0.5);
  Model gen = make_model(ModelKind::Gen, {true, true}, h, 10, 2, 3, rng);
  Model base = matched_baseline_from_gen(gen);
  REQUIRE(base.params.shared.specs.size() ==
          gen.params.shared.specs.size() + gen.params.privates[0].specs.size());

  Batch b = toy_batch(6, 6, 10, 2, 3, 17);

  // Train mode: the dropout stream must line up draw for draw.
  Rng r1(21), r2(21);
  LossBreakdown lg = compute_loss(gen, b, Mode::Train, &r1);
  LossBreakdown lb = compute_loss(base, b, Mode::Train, &r2);
  CHECK(lg.task == lb.task);

  LossBreakdown eg = compute_loss(gen, b, Mode::Eval);
  LossBreakdown eb = compute_loss(base, b, Mode::Eval);
  CHECK(eg.task == eb.task);

  // Per-instance predictions agree too.
  Prediction pg = predict_instance(gen, b.ids[0], std::nullopt, Mode::Eval);
  Prediction pb = predict_instance(base, b.ids[0], std::nullopt, Mode::Eval);
  CHECK(pg.class_probs == pb.class_probs);
}

TEST_CASE("switches-off gen model matches its matched baseline gradients") {
  Rng rng(13);
  HyperParams h = tiny_hyper(0.0);
  Model gen = make_model(ModelKind::Gen, {false, false}, h, 10, 2, 3, rng);
  Model base = matched_baseline_from_gen(gen);
  Batch b = toy_batch(4, 6, 10, 2, 3, 18);

  ParamSet gg = zeros_like(gen.params);
  ParamSet gb = zeros_like(base.params);
  Rng r1(22), r2(22);
  loss_backward(gen, b, r1, gg);
  loss_backward(base, b, r2, gb);

  CHECK(gg.embedding.table == gb.embedding.table);
  CHECK(gg.classifier.w == gb.classifier.w);
  CHECK(gg.classifier.b == gb.classifier.b);
  // The baseline's single bank is the shared bank followed by the private.
  const std::size_t ns = gen.params.shared.specs.size();
  for (std::size_t i = 0; i < ns; ++i) {
    CHECK(gg.shared.weights[i] == gb.shared.weights[i]);
    CHECK(gg.shared.biases[i] == gb.shared.biases[i]);
  }
  for (std::size_t i = 0; i < gen.params.privates[0].specs.size(); ++i) {
    CHECK(gg.privates[0].weights[i] == gb.shared.weights[ns + i]);
    CHECK(gg.privates[0].biases[i] == gb.shared.biases[ns + i]);
  }
}

TEST_CASE("train mode with dropout demands an rng") {
  Rng rng(14);
  Model m = make_model(ModelKind::Baseline, {false, false}, tiny_hyper(0.5),
                       10, 2, 1, rng);
  Batch b = toy_batch(1, 6, 10, 2, 1, 19);
  CHECK_THROWS_AS(compute_loss(m, b, Mode::Train, nullptr), ConfigError);
  CHECK_NOTHROW(compute_loss(m, b, Mode::Eval, nullptr));
}
