#pragma once

#include <cstdint>

#include "mdtc/model.hpp"

namespace mdtc {

struct AdamConfig {
  double alpha = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments share the parameter layout; t counts completed steps.
struct AdamState {
  AdamConfig config;
  std::uint64_t t = 0;
  ParamSet m;
  ParamSet v;
};

AdamState make_adam_state(const ParamSet& params, const AdamConfig& config);

// In-place update of a single tensor given its moments. Exposed for oracle
// tests against hand-evaluated update sequences.
void adam_update_tensor(Tensor& param, const Tensor& grad, Tensor& m,
                        Tensor& v, const AdamConfig& c, std::uint64_t t);

// One optimizer step over every parameter group. Throws TrainError naming
// the parameter group on a non-finite gradient.
void adam_step(ParamSet& params, ParamSet& grads, AdamState& state);

}  // namespace mdtc
