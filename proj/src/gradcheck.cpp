#include "mdtc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mdtc/errors.hpp"

namespace mdtc {

std::vector<Tensor> finite_diff_grad(const ScalarFn& f,
                                     const std::vector<Tensor>& point,
                                     double eps) {
  if (eps <= 0) throw ContractError("finite_diff_grad: eps must be positive");
  std::vector<Tensor> grads;
  grads.reserve(point.size());
  std::vector<Tensor> probe = point;
  for (std::size_t t = 0; t < probe.size(); ++t) {
    Tensor g(probe[t].shape());
    for (std::size_t i = 0; i < probe[t].size(); ++i) {
      const double saved = probe[t][i];
      probe[t][i] = saved + eps;
      const double hi = f(probe);
      probe[t][i] = saved - eps;
      const double lo = f(probe);
      probe[t][i] = saved;
      g[i] = (hi - lo) / (2.0 * eps);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

std::vector<Tensor> finite_diff_grad(const DiffOp& op,
                                     const std::vector<Tensor>& point,
                                     double eps) {
  ScalarFn f = [&op](const std::vector<Tensor>& x) {
    Tensor out = op.forward(x);
    if (out.size() != 1)
      throw ContractError("finite_diff_grad: op '" + op.name +
                          "' does not produce a scalar output (got " +
                          Tensor::shape_str(out.shape()) + ")");
    return out[0];
  };
  return finite_diff_grad(f, point, eps);
}

double rel_error(double analytic, double numeric) {
  const double denom =
      std::max({std::fabs(analytic), std::fabs(numeric), 1e-4});
  return std::fabs(analytic - numeric) / denom;
}

double max_rel_error(const std::vector<Tensor>& analytic,
                     const std::vector<Tensor>& numeric) {
  if (analytic.size() != numeric.size())
    throw ContractError("max_rel_error: gradient list size mismatch");
  double worst = 0.0;
  for (std::size_t t = 0; t < analytic.size(); ++t) {
    if (!analytic[t].same_shape(numeric[t]))
      throw ContractError("max_rel_error: gradient shape mismatch at input " +
                          std::to_string(t));
    for (std::size_t i = 0; i < analytic[t].size(); ++i)
      worst = std::max(worst, rel_error(analytic[t][i], numeric[t][i]));
  }
  return worst;
}

double check_gradients(const DiffOp& op, const std::vector<Tensor>& point,
                       Rng& rng, double eps) {
  // Fixed random projection weights, drawn once.
  Tensor w(op.forward(point).shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);

  std::vector<Tensor> analytic = op.backward(point, w);

  ScalarFn projected = [&op, &w](const std::vector<Tensor>& x) {
    Tensor out = op.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += w[i] * out[i];
    return s;
  };
  std::vector<Tensor> numeric = finite_diff_grad(projected, point, eps);
  return max_rel_error(analytic, numeric);
}

}  // namespace mdtc
