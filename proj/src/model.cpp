#include "mdtc/model.hpp"

#include <cmath>
#include <cstring>

#include "mdtc/errors.hpp"

namespace mdtc {

std::string kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Baseline: return "baseline";
    case ModelKind::Cond: return "cond";
    case ModelKind::Gen: return "gen";
  }
  throw ConfigError("unknown model kind");
}

ModelKind kind_from_name(const std::string& name) {
  if (name == "baseline") return ModelKind::Baseline;
  if (name == "cond") return ModelKind::Cond;
  if (name == "gen") return ModelKind::Gen;
  throw ConfigError("unknown architecture \"" + name +
                    "\"; expected baseline, cond, or gen");
}

ParamSet zeros_like(const ParamSet& ps) {
  ParamSet z = ps;
  for (auto& ref : tensor_refs(z)) ref.tensor->fill(0.0);
  return z;
}

namespace {

void push_bank(std::vector<NamedTensor>& out, const std::string& prefix,
               ConvBank& bank) {
  for (std::size_t i = 0; i < bank.specs.size(); ++i) {
    out.push_back({prefix + ".w" + std::to_string(i), &bank.weights[i]});
    out.push_back({prefix + ".b" + std::to_string(i), &bank.biases[i]});
  }
}

}  // namespace

std::vector<NamedTensor> tensor_refs(ParamSet& ps) {
  std::vector<NamedTensor> out;
  out.push_back({"embedding", &ps.embedding.table});
  push_bank(out, "shared", ps.shared);
  for (std::size_t k = 0; k < ps.privates.size(); ++k)
    push_bank(out, "private" + std::to_string(k), ps.privates[k]);
  out.push_back({"classifier.w", &ps.classifier.w});
  out.push_back({"classifier.b", &ps.classifier.b});
  if (ps.discriminator) {
    out.push_back({"discriminator.w", &ps.discriminator->w});
    out.push_back({"discriminator.b", &ps.discriminator->b});
  }
  if (ps.generator) {
    out.push_back({"generator.w", &ps.generator->w});
    out.push_back({"generator.b", &ps.generator->b});
  }
  return out;
}

std::vector<ConstNamedTensor> tensor_refs(const ParamSet& ps) {
  auto refs = tensor_refs(const_cast<ParamSet&>(ps));
  std::vector<ConstNamedTensor> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back({r.name, r.tensor});
  return out;
}

std::size_t Model::repr_dim() const {
  std::size_t dim = params.shared.output_dim();
  if (has_private()) dim += params.privates.at(0).output_dim();
  return dim;
}

std::size_t Model::shared_dim() const { return params.shared.output_dim(); }

namespace {

void validate_hyper(const HyperParams& h) {
  if (h.lambda_d < 0.0 || h.lambda_g < 0.0)
    throw ConfigError("lambda_d and lambda_g must be nonnegative");
  if (h.dropout < 0.0 || h.dropout >= 1.0)
    throw ConfigError("dropout must satisfy 0 <= p < 1");
  if (h.embed_dim == 0) throw ConfigError("embed_dim must be positive");
  if (h.learning_rate <= 0.0)
    throw ConfigError("learning rate must be positive");
  if (h.conv_specs.empty())
    throw ConfigError("at least one conv spec is required");
}

}  // namespace

Model make_model(ModelKind kind, Switches switches, const HyperParams& hyper,
                 std::size_t vocab_size, std::size_t n_labels,
                 std::size_t n_domains, Rng& rng) {
  validate_hyper(hyper);
  if (vocab_size < 2) throw ConfigError("vocabulary too small");
  if (n_labels < 2) throw ConfigError("need at least two labels");
  if (n_domains < 1) throw ConfigError("need at least one training domain");
  if (kind == ModelKind::Cond && switches.generator)
    throw ConfigError("cond has no generator head; +g applies to gen/baseline");

  Model m;
  m.kind = kind;
  m.switches = switches;
  m.hyper = hyper;
  m.vocab_size = vocab_size;
  m.n_labels = n_labels;
  m.n_domains = n_domains;

  m.params.embedding = make_embedding(vocab_size, hyper.embed_dim, rng);
  if (kind == ModelKind::Baseline) {
    std::vector<ConvSpec> doubled = hyper.conv_specs;
    for (auto& s : doubled) s.filters *= 2;
    m.params.shared = make_conv_bank(doubled, hyper.embed_dim, rng);
  } else {
    m.params.shared = make_conv_bank(hyper.conv_specs, hyper.embed_dim, rng);
    const std::size_t n_private = kind == ModelKind::Cond ? n_domains : 1;
    for (std::size_t k = 0; k < n_private; ++k)
      m.params.privates.push_back(
          make_conv_bank(hyper.conv_specs, hyper.embed_dim, rng));
  }
  m.params.classifier = make_linear(m.repr_dim(), n_labels, rng);

  const bool want_disc = kind != ModelKind::Baseline || switches.adversary;
  const bool want_gen =
      kind == ModelKind::Gen ||
      (kind == ModelKind::Baseline && switches.generator);
  if (want_disc)
    m.params.discriminator = make_linear(m.shared_dim(), n_domains, rng);
  if (want_gen) {
    const std::size_t gin = m.has_private()
                                ? m.params.privates[0].output_dim()
                                : m.shared_dim();
    m.params.generator = make_linear(gin, n_domains, rng);
  }
  return m;
}

Model matched_baseline_from_gen(const Model& gen) {
  if (gen.kind != ModelKind::Gen)
    throw ConfigError("matched baseline construction requires a gen model");
  Model b;
  b.kind = ModelKind::Baseline;
  b.switches = {};
  b.hyper = gen.hyper;
  b.hyper.lambda_d = 0.0;
  b.hyper.lambda_g = 0.0;
  b.vocab_size = gen.vocab_size;
  b.n_labels = gen.n_labels;
  b.n_domains = gen.n_domains;
  b.params.embedding = gen.params.embedding;
  ConvBank bank = gen.params.shared;
  const ConvBank& priv = gen.params.privates.at(0);
  bank.specs.insert(bank.specs.end(), priv.specs.begin(), priv.specs.end());
  bank.weights.insert(bank.weights.end(), priv.weights.begin(),
                      priv.weights.end());
  bank.biases.insert(bank.biases.end(), priv.biases.begin(),
                     priv.biases.end());
  b.params.shared = std::move(bank);
  b.params.classifier = gen.params.classifier;
  return b;
}

bool LossBreakdown::finite() const {
  return std::isfinite(task) && std::isfinite(adv) && std::isfinite(gen) &&
         std::isfinite(total_reported);
}

namespace {

struct InstForward {
  Tensor x;
  ConvCache cs, cp;
  Tensor hs_raw, hp_raw;
  DropoutResult ds, dp;
  Tensor feat;
  Tensor pc, pd, pg;
  std::size_t route = 0;
};

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros({a.size() + b.size()});
  std::memcpy(out.data(), a.data(), a.size() * sizeof(double));
  std::memcpy(out.data() + a.size(), b.data(), b.size() * sizeof(double));
  return out;
}

std::size_t checked_route(const Model& m, int domain) {
  if (domain < 0 || static_cast<std::size_t>(domain) >= m.n_domains)
    throw RoutingError("domain index " + std::to_string(domain) +
                       " outside the " + std::to_string(m.n_domains) +
                       " training domains");
  return static_cast<std::size_t>(domain);
}

InstForward forward_one(const Model& m, const std::vector<int>& ids,
                        std::size_t route, Mode mode, Rng* rng, bool need_disc,
                        bool need_gen) {
  const double p = m.hyper.dropout;
  if (mode == Mode::Train && p > 0.0 && !rng)
    throw ConfigError("train-mode forward with dropout needs an RNG");
  // Never drawn from: eval mode and p == 0 consume no randomness.
  static thread_local Rng unused(0);
  Rng& r = rng ? *rng : unused;

  InstForward f;
  f.route = route;
  f.x = embed_forward(ids, m.params.embedding);
  f.hs_raw = conv_forward(f.x, m.params.shared, &f.cs);
  f.ds = dropout_apply(f.hs_raw, p, r, mode);
  if (m.has_private()) {
    f.hp_raw = conv_forward(f.x, m.params.privates.at(route), &f.cp);
    f.dp = dropout_apply(f.hp_raw, p, r, mode);
    f.feat = concat(f.ds.output, f.dp.output);
  } else {
    f.feat = f.ds.output;
  }
  f.pc = softmax(linear_forward(f.feat, m.params.classifier));
  if (need_disc && m.params.discriminator) {
    // Gradient reversal sits here; the forward pass is the identity.
    f.pd = softmax(linear_forward(grl_forward(f.ds.output),
                                  *m.params.discriminator));
  }
  if (need_gen && m.params.generator) {
    const Tensor& gin = m.has_private() ? f.dp.output : f.ds.output;
    f.pg = softmax(linear_forward(gin, *m.params.generator));
  }
  return f;
}

// d(cross_entropy(softmax(z), gold))/dz = probs - onehot(gold), here scaled.
Tensor xent_logit_grad(const Tensor& probs, int gold, double scale) {
  Tensor g = probs;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= scale;
  g[static_cast<std::size_t>(gold)] -= scale;
  return g;
}

}  // namespace

Prediction predict_instance(const Model& m, const std::vector<int>& ids,
                            std::optional<std::size_t> route, Mode mode,
                            Rng* rng) {
  std::size_t r = 0;
  if (m.kind == ModelKind::Cond) {
    if (!route)
      throw RoutingError("cond inference needs a private pathway index");
    r = checked_route(m, static_cast<int>(*route));
  }
  InstForward f = forward_one(m, ids, r, mode, rng, true, true);
  Prediction out;
  out.class_probs = std::move(f.pc);
  out.disc_probs = std::move(f.pd);
  out.gen_probs = std::move(f.pg);
  out.h_s = std::move(f.ds.output);
  if (m.has_private()) out.h_p = std::move(f.dp.output);
  return out;
}

LossBreakdown loss_backward(const Model& m, const Batch& batch, Rng& rng,
                            ParamSet& grads, const BackwardHooks& hooks) {
  if (batch.size() == 0) throw TrainError("empty batch");
  const bool adv_on = m.switches.adversary && m.params.discriminator.has_value();
  const bool gen_on = m.switches.generator && m.params.generator.has_value();
  const bool need_domain = m.kind == ModelKind::Cond || adv_on || gen_on;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double grl_mult = hooks.grl_multiplier.value_or(-m.hyper.lambda_d);
  const std::size_t hs_dim = m.shared_dim();

  LossBreakdown loss;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int y = batch.labels[i];
    const int d = batch.domains[i];
    if (y < 0 || static_cast<std::size_t>(y) >= m.n_labels)
      throw TrainError("label index " + std::to_string(y) +
                       " outside the training inventory");
    std::size_t route = 0;
    if (m.kind == ModelKind::Cond) route = checked_route(m, d);
    if (need_domain) checked_route(m, d);

    InstForward f =
        forward_one(m, batch.ids[i], route, Mode::Train, &rng, adv_on, gen_on);
    loss.task += cross_entropy(f.pc, static_cast<std::size_t>(y));

    Tensor dhs_drop = Tensor::zeros(f.ds.output.shape());
    Tensor dhp_drop;
    if (m.has_private()) dhp_drop = Tensor::zeros(f.dp.output.shape());

    if (hooks.include_task) {
      Tensor g_zc = xent_logit_grad(f.pc, y, inv_b);
      Tensor dfeat = Tensor::zeros(f.feat.shape());
      linear_backward(f.feat, m.params.classifier, g_zc, grads.classifier.w,
                      grads.classifier.b, &dfeat);
      for (std::size_t j = 0; j < hs_dim; ++j) dhs_drop[j] += dfeat[j];
      for (std::size_t j = hs_dim; j < dfeat.size(); ++j)
        dhp_drop[j - hs_dim] += dfeat[j];
    }

    if (adv_on) {
      loss.adv += cross_entropy(f.pd, static_cast<std::size_t>(d));
      // The discriminator minimizes its own cross-entropy unscaled; the
      // reversal applies only to the gradient flowing into h_s.
      Tensor g_zd = xent_logit_grad(f.pd, d, inv_b);
      Tensor dhs_disc = Tensor::zeros(f.ds.output.shape());
      linear_backward(f.ds.output, *m.params.discriminator, g_zd,
                      grads.discriminator->w, grads.discriminator->b,
                      &dhs_disc);
      Tensor rev = grl_backward(dhs_disc, -grl_mult);
      dhs_drop.add_scaled(rev, 1.0);
    }

    if (gen_on) {
      loss.gen += cross_entropy(f.pg, static_cast<std::size_t>(d));
      Tensor g_zg = xent_logit_grad(f.pg, d, m.hyper.lambda_g * inv_b);
      const Tensor& gin = m.has_private() ? f.dp.output : f.ds.output;
      Tensor& dgin = m.has_private() ? dhp_drop : dhs_drop;
      linear_backward(gin, *m.params.generator, g_zg, grads.generator->w,
                      grads.generator->b, &dgin);
    }

    Tensor dhs_raw = dropout_backward(dhs_drop, f.ds.mask, f.ds.scale);
    Tensor dx = Tensor::zeros(f.x.shape());
    conv_backward(f.x, m.params.shared, f.cs, dhs_raw.data(),
                  grads.shared.weights, grads.shared.biases, &dx);
    if (m.has_private()) {
      Tensor dhp_raw = dropout_backward(dhp_drop, f.dp.mask, f.dp.scale);
      conv_backward(f.x, m.params.privates.at(route), f.cp, dhp_raw.data(),
                    grads.privates.at(route).weights,
                    grads.privates.at(route).biases, &dx);
    }
    embed_backward_accum(batch.ids[i], dx, grads.embedding.table);
  }

  loss.task *= inv_b;
  loss.adv *= inv_b;
  loss.gen *= inv_b;
  loss.total_reported = loss.task + m.hyper.lambda_g * loss.gen;
  return loss;
}

LossBreakdown compute_loss(const Model& m, const Batch& batch, Mode mode,
                           Rng* rng) {
  if (batch.size() == 0) throw TrainError("empty batch");
  const bool adv_on = m.switches.adversary && m.params.discriminator.has_value();
  const bool gen_on = m.switches.generator && m.params.generator.has_value();
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  LossBreakdown loss;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int y = batch.labels[i];
    const int d = batch.domains[i];
    if (y < 0 || static_cast<std::size_t>(y) >= m.n_labels)
      throw TrainError("label index " + std::to_string(y) +
                       " outside the training inventory");
    std::size_t route = 0;
    if (m.kind == ModelKind::Cond) route = checked_route(m, d);
    if (adv_on || gen_on) checked_route(m, d);
    InstForward f =
        forward_one(m, batch.ids[i], route, mode, rng, adv_on, gen_on);
    loss.task += cross_entropy(f.pc, static_cast<std::size_t>(y));
    if (adv_on) loss.adv += cross_entropy(f.pd, static_cast<std::size_t>(d));
    if (gen_on) loss.gen += cross_entropy(f.pg, static_cast<std::size_t>(d));
  }
  loss.task *= inv_b;
  loss.adv *= inv_b;
  loss.gen *= inv_b;
  loss.total_reported = loss.task + m.hyper.lambda_g * loss.gen;
  return loss;
}

}  // namespace mdtc
