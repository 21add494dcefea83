#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdtc/data.hpp"
#include "mdtc/layers.hpp"

namespace mdtc {

enum class ModelKind { Baseline, Cond, Gen };

std::string kind_name(ModelKind k);
ModelKind kind_from_name(const std::string& name);

// Loss-term switches. The adversarial term feeds the discriminator on the
// shared representation through gradient reversal; the generative term feeds
// the generator head on the private representation with no reversal.
struct Switches {
  bool adversary = false;
  bool generator = false;
};

struct HyperParams {
  double lambda_d = 1e-3;
  double lambda_g = 1e-3;
  double dropout = 0.5;
  std::size_t embed_dim = 300;
  double learning_rate = 1e-4;
  // Per-pathway conv layout. The baseline doubles the filter count of each
  // width so its single representation matches dim([h_s; h_p]).
  std::vector<ConvSpec> conv_specs = {
      {2, 128}, {4, 128}, {8, 128}, {16, 128}, {32, 128}};
};

// One structure describes parameters, gradients, and optimizer moments
// alike; zeros_like clones the layout. Enumeration order is fixed and shared
// by the optimizer and the persistence format.
struct ParamSet {
  Embedding embedding;
  ConvBank shared;                 // baseline: the single bank
  std::vector<ConvBank> privates;  // cond: K banks; gen: one; baseline: none
  Linear classifier;
  std::optional<Linear> discriminator;
  std::optional<Linear> generator;
};

ParamSet zeros_like(const ParamSet& ps);

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};
std::vector<NamedTensor> tensor_refs(ParamSet& ps);

struct ConstNamedTensor {
  std::string name;
  const Tensor* tensor;
};
std::vector<ConstNamedTensor> tensor_refs(const ParamSet& ps);

struct Model {
  ModelKind kind = ModelKind::Baseline;
  Switches switches;
  HyperParams hyper;
  std::size_t vocab_size = 0;
  std::size_t n_labels = 0;
  std::size_t n_domains = 0;  // training domains K
  ParamSet params;

  bool has_private() const { return kind != ModelKind::Baseline; }
  std::size_t repr_dim() const;    // classifier input dimension
  std::size_t shared_dim() const;  // discriminator input dimension
};

// Head layout: cond always carries a discriminator and never a generator
// head (+g on cond is a config error); gen always carries both heads even
// when the switches are off; the baseline carries exactly the heads its
// switches ask for. Initialization order is embedding, shared bank, private
// banks, classifier, discriminator, generator.
Model make_model(ModelKind kind, Switches switches, const HyperParams& hyper,
                 std::size_t vocab_size, std::size_t n_labels,
                 std::size_t n_domains, Rng& rng);

// Builds a switches-off baseline whose single bank is the gen model's shared
// bank followed by its private bank, with parameter values copied in place,
// so the classifier path computes the same arithmetic in the same order.
Model matched_baseline_from_gen(const Model& gen);

// ---------------------------------------------------------------------------
// Forward

struct Prediction {
  Tensor class_probs;
  Tensor disc_probs;  // empty when the model has no discriminator
  Tensor gen_probs;   // empty when the model has no generator head
  Tensor h_s;         // post-dropout shared (or sole) representation
  Tensor h_p;         // post-dropout private representation; empty for baseline
};

// Cond requires route < K (the private pathway to use); baseline and gen
// ignore it. Train mode with dropout > 0 requires rng.
Prediction predict_instance(const Model& m, const std::vector<int>& ids,
                            std::optional<std::size_t> route, Mode mode,
                            Rng* rng = nullptr);

// ---------------------------------------------------------------------------
// Losses and backward

struct LossBreakdown {
  double task = 0.0;
  double adv = 0.0;
  double gen = 0.0;
  double total_reported = 0.0;  // task + lambda_g * gen
  bool finite() const;
};

// Test instrumentation. grl_multiplier overrides the factor applied to the
// adversarial gradient entering the shared representation (default
// -lambda_d); include_task=false drops the task term from the backward pass
// while leaving forward values untouched.
struct BackwardHooks {
  std::optional<double> grl_multiplier;
  bool include_task = true;
};

// Mean-over-batch terms. Gradients accumulate into `grads` (zeros_like of
// the params). The discriminator receives the unscaled adversarial gradient;
// only the path into the shared representation is reversed and scaled.
// Cond routes each instance through the private bank of its domain id and
// throws RoutingError when that id is outside [0, K).
LossBreakdown loss_backward(const Model& m, const Batch& batch, Rng& rng,
                            ParamSet& grads, const BackwardHooks& hooks = {});

// Forward-only loss; Eval mode ignores rng and dropout.
LossBreakdown compute_loss(const Model& m, const Batch& batch, Mode mode,
                           Rng* rng = nullptr);

}  // namespace mdtc
