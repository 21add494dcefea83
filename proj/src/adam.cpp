#include "mdtc/adam.hpp"

#include <cmath>

#include "mdtc/errors.hpp"

namespace mdtc {

AdamState make_adam_state(const ParamSet& params, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  return s;
}

void adam_update_tensor(Tensor& param, const Tensor& grad, Tensor& m,
                        Tensor& v, const AdamConfig& c, std::uint64_t t) {
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= c.alpha * mhat / (std::sqrt(vhat) + c.eps);
  }
}

void adam_step(ParamSet& params, ParamSet& grads, AdamState& state) {
  auto p_refs = tensor_refs(params);
  auto g_refs = tensor_refs(grads);
  auto m_refs = tensor_refs(state.m);
  auto v_refs = tensor_refs(state.v);
  if (p_refs.size() != g_refs.size() || p_refs.size() != m_refs.size() ||
      p_refs.size() != v_refs.size())
    throw TrainError("optimizer state layout does not match the parameters");
  ++state.t;
  for (std::size_t i = 0; i < p_refs.size(); ++i) {
    if (!p_refs[i].tensor->same_shape(*g_refs[i].tensor))
      throw TrainError("gradient shape mismatch for " + p_refs[i].name);
    if (!g_refs[i].tensor->all_finite())
      throw TrainError("non-finite gradient in " + g_refs[i].name);
    adam_update_tensor(*p_refs[i].tensor, *g_refs[i].tensor, *m_refs[i].tensor,
                       *v_refs[i].tensor, state.config, state.t);
  }
}

}  // namespace mdtc
