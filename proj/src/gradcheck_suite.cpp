#include "mdtc/gradcheck_suite.hpp"

#include <cmath>

#include "mdtc/errors.hpp"
#include "mdtc/gradcheck.hpp"
#include "mdtc/layers.hpp"
#include "mdtc/model.hpp"

namespace mdtc {

namespace {

constexpr double kMargin = 1e-3;
constexpr int kMaxAttempts = 64;

Tensor transpose(const Tensor& t) {
  Tensor out = Tensor::zeros({t.cols(), t.rows()});
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) out.at(c, r) = t.at(r, c);
  return out;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo,
                     double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  init_uniform(t, rng, lo, hi);
  return t;
}

double check_matmul(std::uint64_t seed) {
  Rng rng(seed);
  DiffOp op;
  op.name = "matmul";
  op.forward = [](const std::vector<Tensor>& in) {
    return matmul(in[0], in[1]);
  };
  op.backward = [](const std::vector<Tensor>& in, const Tensor& g) {
    return std::vector<Tensor>{matmul(g, transpose(in[1])),
                               matmul(transpose(in[0]), g)};
  };
  std::vector<Tensor> point{random_tensor({2, 3}, rng, -1.0, 1.0),
                            random_tensor({3, 4}, rng, -1.0, 1.0)};
  return check_gradients(op, point, rng);
}

double check_softmax_xent(std::uint64_t seed) {
  Rng rng(seed);
  Tensor logits = random_tensor({4}, rng, -2.0, 2.0);
  const std::size_t gold = 1;
  ScalarFn f = [gold](const std::vector<Tensor>& in) {
    return cross_entropy(softmax(in[0]), gold);
  };
  Tensor analytic = softmax(logits);
  analytic[gold] -= 1.0;
  auto numeric = finite_diff_grad(f, {logits});
  return max_rel_error({analytic}, numeric);
}

double check_linear(std::uint64_t seed, bool fault) {
  Rng rng(seed);
  DiffOp op;
  op.name = "linear";
  op.forward = [](const std::vector<Tensor>& in) {
    return linear_forward(in[0], Linear{in[1], in[2]});
  };
  op.backward = [fault](const std::vector<Tensor>& in, const Tensor& g) {
    Tensor dx = Tensor::zeros(in[0].shape());
    Tensor dw = Tensor::zeros(in[1].shape());
    Tensor db = Tensor::zeros(in[2].shape());
    linear_backward(in[0], Linear{in[1], in[2]}, g, dw, db, &dx);
    if (fault) dw[0] += 0.05 * (std::abs(dw[0]) + 1.0);
    return std::vector<Tensor>{dx, dw, db};
  };
  std::vector<Tensor> point{random_tensor({5}, rng, -1.0, 1.0),
                            random_tensor({5, 3}, rng, -1.0, 1.0),
                            random_tensor({3}, rng, -0.5, 0.5)};
  return check_gradients(op, point, rng);
}

double check_embedding(std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<int> ids{1, 2, 2, 0};  // repeated id: scatter accumulates
  DiffOp op;
  op.name = "embedding";
  op.forward = [ids](const std::vector<Tensor>& in) {
    return embed_forward(ids, Embedding{in[0]});
  };
  op.backward = [ids](const std::vector<Tensor>& in, const Tensor& g) {
    return std::vector<Tensor>{embed_backward(ids, g, Embedding{in[0]})};
  };
  std::vector<Tensor> point{random_tensor({6, 3}, rng, -1.0, 1.0)};
  return check_gradients(op, point, rng);
}

// Winning pre-activation and its margin over every other position must
// clear kMargin for each filter, otherwise eps-perturbations can flip the
// ReLU gate or the pooling argmax under the finite-difference probe.
bool conv_margins_ok(const Tensor& x, const ConvBank& bank) {
  const std::size_t e = x.cols();
  for (std::size_t s = 0; s < bank.specs.size(); ++s) {
    const auto& spec = bank.specs[s];
    if (x.rows() < spec.width) return false;
    const std::size_t npos = x.rows() - spec.width + 1;
    for (std::size_t f = 0; f < spec.filters; ++f) {
      double best = -1e300, second = -1e300;
      for (std::size_t p = 0; p < npos; ++p) {
        double acc = bank.biases[s][f];
        for (std::size_t t = 0; t < spec.width * e; ++t)
          acc += x.data()[p * e + t] * bank.weights[s].data()[t * spec.filters + f];
        if (acc > best) {
          second = best;
          best = acc;
        } else if (acc > second) {
          second = acc;
        }
      }
      if (std::abs(best) < kMargin) return false;
      if (npos > 1 && best - second < kMargin) return false;
    }
  }
  return true;
}

double check_conv_bank(std::uint64_t seed, std::size_t embed_dim,
                       const std::vector<std::size_t>& widths,
                       std::size_t filters) {
  std::vector<ConvSpec> specs;
  for (std::size_t w : widths) specs.push_back({w, filters});
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_seed(seed, 200 + static_cast<std::uint64_t>(attempt)));
    Tensor x = random_tensor({6, embed_dim}, rng, -1.0, 1.0);
    ConvBank bank = make_conv_bank(specs, embed_dim, rng);
    for (auto& b : bank.biases) init_uniform(b, rng, -0.3, 0.3);
    if (!conv_margins_ok(x, bank)) continue;

    DiffOp op;
    op.name = "conv_bank";
    op.forward = [specs, embed_dim](const std::vector<Tensor>& in) {
      ConvBank bk;
      bk.specs = specs;
      for (std::size_t s = 0; s < specs.size(); ++s) {
        bk.weights.push_back(in[1 + 2 * s]);
        bk.biases.push_back(in[2 + 2 * s]);
      }
      return conv_forward(in[0], bk);
    };
    op.backward = [specs, embed_dim](const std::vector<Tensor>& in,
                                     const Tensor& g) {
      ConvBank bk;
      bk.specs = specs;
      for (std::size_t s = 0; s < specs.size(); ++s) {
        bk.weights.push_back(in[1 + 2 * s]);
        bk.biases.push_back(in[2 + 2 * s]);
      }
      ConvCache cache;
      conv_forward(in[0], bk, &cache);
      Tensor dx = Tensor::zeros(in[0].shape());
      std::vector<Tensor> dw, db;
      for (std::size_t s = 0; s < specs.size(); ++s) {
        dw.push_back(Tensor::zeros(bk.weights[s].shape()));
        db.push_back(Tensor::zeros(bk.biases[s].shape()));
      }
      conv_backward(in[0], bk, cache, g.data(), dw, db, &dx);
      std::vector<Tensor> out{dx};
      for (std::size_t s = 0; s < specs.size(); ++s) {
        out.push_back(dw[s]);
        out.push_back(db[s]);
      }
      return out;
    };
    std::vector<Tensor> point{x};
    for (std::size_t s = 0; s < specs.size(); ++s) {
      point.push_back(bank.weights[s]);
      point.push_back(bank.biases[s]);
    }
    return check_gradients(op, point, rng);
  }
  throw ContractError("conv gradcheck: no well-conditioned sample found");
}

double check_dropout_eval(std::uint64_t seed) {
  Rng rng(seed);
  const double p = 0.5;
  DiffOp op;
  op.name = "dropout_eval";
  op.forward = [p](const std::vector<Tensor>& in) {
    Rng r(0);
    return dropout_apply(in[0], p, r, Mode::Eval).output;
  };
  op.backward = [p](const std::vector<Tensor>& in, const Tensor& g) {
    Rng r(0);
    auto res = dropout_apply(in[0], p, r, Mode::Eval);
    return std::vector<Tensor>{dropout_backward(g, res.mask, res.scale)};
  };
  std::vector<Tensor> point{random_tensor({7}, rng, -1.0, 1.0)};
  return check_gradients(op, point, rng);
}

// The reversal layer is defined to violate the ordinary derivative
// relationship: its composite backward must equal -lambda times the true
// gradient of the (identity) forward map.
double check_grl_composite(std::uint64_t seed) {
  Rng rng(seed);
  const double lambda = 0.7;
  Tensor x = random_tensor({4}, rng, -1.0, 1.0);
  Linear head = make_linear(4, 3, rng);
  Tensor proj = random_tensor({3}, rng, -1.0, 1.0);

  ScalarFn f = [&](const std::vector<Tensor>& in) {
    Tensor y = linear_forward(grl_forward(in[0]), head);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
    return s;
  };
  Tensor dw = Tensor::zeros(head.w.shape());
  Tensor db = Tensor::zeros(head.b.shape());
  Tensor dx_plain = Tensor::zeros(x.shape());
  linear_backward(x, head, proj, dw, db, &dx_plain);
  Tensor analytic = grl_backward(dx_plain, lambda);

  auto numeric = finite_diff_grad(f, {x});
  Tensor expected = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    expected[i] = -lambda * numeric[0][i];
  return max_rel_error({analytic}, {expected});
}

struct FullCheckSetup {
  Model model;
  Batch batch;
};

FullCheckSetup make_full_setup(ModelKind kind, Switches sw,
                               const GradCheckSizes& sz, std::uint64_t seed) {
  HyperParams hyper;
  hyper.lambda_d = 0.7;
  hyper.lambda_g = 0.9;
  hyper.dropout = 0.0;  // stochastic layers are checked separately
  hyper.embed_dim = sz.embed_dim;
  hyper.conv_specs.clear();
  for (std::size_t w : sz.widths) hyper.conv_specs.push_back({w, sz.filters});

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_seed(seed, 300 + static_cast<std::uint64_t>(attempt)));
    Model m = make_model(kind, sw, hyper, sz.vocab, sz.labels, sz.domains, rng);
    // Glorot init keeps pre-activations small; widen everything so margins
    // and head gradients are O(1).
    for (auto& ref : tensor_refs(m.params)) {
      for (std::size_t i = 0; i < ref.tensor->size(); ++i)
        (*ref.tensor)[i] = rng.uniform(-0.9, 0.9);
    }
    Batch batch;
    bool ok = true;
    for (std::size_t i = 0; i < sz.batch; ++i) {
      std::vector<int> ids;
      for (std::size_t t = 0; t < sz.seq_len; ++t)
        ids.push_back(static_cast<int>(rng.index(sz.vocab)));
      const int d = static_cast<int>(i % sz.domains);
      Tensor x = embed_forward(ids, m.params.embedding);
      if (!conv_margins_ok(x, m.params.shared)) ok = false;
      if (m.has_private()) {
        const std::size_t route =
            m.kind == ModelKind::Cond ? static_cast<std::size_t>(d) : 0;
        if (!conv_margins_ok(x, m.params.privates[route])) ok = false;
      }
      batch.ids.push_back(std::move(ids));
      batch.labels.push_back(static_cast<int>(rng.index(sz.labels)));
      batch.domains.push_back(d);
    }
    if (!ok) continue;
    return {std::move(m), std::move(batch)};
  }
  throw ContractError("full-model gradcheck: no well-conditioned sample found");
}

double check_full_model(ModelKind kind, Switches sw, const GradCheckSizes& sz,
                        std::uint64_t seed, bool fault) {
  FullCheckSetup setup = make_full_setup(kind, sw, sz, seed);
  Model& m = setup.model;
  const bool adv_on = sw.adversary && m.params.discriminator.has_value();
  const bool gen_on = sw.generator && m.params.generator.has_value();

  auto objective = [&](bool disc_route) {
    LossBreakdown l = compute_loss(m, setup.batch, Mode::Eval);
    if (disc_route) return l.adv;
    double j = l.task;
    if (adv_on) j -= m.hyper.lambda_d * l.adv;
    if (gen_on) j += m.hyper.lambda_g * l.gen;
    return j;
  };

  ParamSet grads = zeros_like(m.params);
  Rng scratch(0);  // dropout is off; no randomness is consumed
  loss_backward(m, setup.batch, scratch, grads);
  if (fault) grads.classifier.w[0] += 0.05 * (std::abs(grads.classifier.w[0]) + 1.0);

  double worst = 0.0;
  auto param_refs = tensor_refs(m.params);
  auto grad_refs = tensor_refs(grads);
  for (std::size_t r = 0; r < param_refs.size(); ++r) {
    // The discriminator maximizes its way: its gradient is the plain
    // derivative of the adversarial term, not of the composite objective.
    const bool disc_route =
        param_refs[r].name.rfind("discriminator", 0) == 0;
    if (disc_route && !adv_on) continue;  // term absent; gradient must be 0
    Tensor& theta = *param_refs[r].tensor;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + kFdEps;
      const double up = objective(disc_route);
      theta[i] = saved - kFdEps;
      const double down = objective(disc_route);
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * kFdEps);
      worst = std::max(worst, rel_error((*grad_refs[r].tensor)[i], numeric));
    }
  }

  // Inactive adversarial term: the discriminator must be untouched.
  if (!adv_on && m.params.discriminator) {
    for (const char* name : {"discriminator.w", "discriminator.b"}) {
      for (const auto& ref : grad_refs) {
        if (ref.name != name) continue;
        for (std::size_t i = 0; i < ref.tensor->size(); ++i)
          worst = std::max(worst, std::abs((*ref.tensor)[i]));
      }
    }
  }
  return worst;
}

}  // namespace

std::vector<ComponentResult> run_gradcheck_suite(std::uint64_t seed,
                                                 const GradCheckSizes& sizes,
                                                 bool inject_fault) {
  std::vector<ComponentResult> results;
  auto add = [&](const std::string& name, double err) {
    results.push_back({name, err, err <= kGradTolerance});
  };

  add("matmul", check_matmul(derive_seed(seed, 10)));
  add("softmax_xent", check_softmax_xent(derive_seed(seed, 11)));
  add("linear", check_linear(derive_seed(seed, 12), inject_fault));
  add("embedding", check_embedding(derive_seed(seed, 13)));
  add("conv_bank", check_conv_bank(derive_seed(seed, 14), sizes.embed_dim,
                                   sizes.widths, sizes.filters));
  add("dropout_eval", check_dropout_eval(derive_seed(seed, 15)));
  add("grl_composite", check_grl_composite(derive_seed(seed, 16)));

  struct Cfg {
    const char* name;
    ModelKind kind;
    Switches sw;
  };
  const Cfg cfgs[] = {
      {"baseline", ModelKind::Baseline, {false, false}},
      {"baseline+d+g", ModelKind::Baseline, {true, true}},
      {"cond", ModelKind::Cond, {false, false}},
      {"cond+d", ModelKind::Cond, {true, false}},
      {"gen", ModelKind::Gen, {false, false}},
      {"gen+d+g", ModelKind::Gen, {true, true}},
  };
  std::uint64_t salt = 20;
  for (const auto& cfg : cfgs)
    add(cfg.name, check_full_model(cfg.kind, cfg.sw, sizes,
                                   derive_seed(seed, salt++), false));
  return results;
}

}  // namespace mdtc
