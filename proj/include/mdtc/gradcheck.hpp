#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mdtc/rng.hpp"
#include "mdtc/tensor.hpp"

namespace mdtc {

// A differentiable operation. forward maps a list of input tensors (data and
// parameters alike) to one output tensor; backward maps the gradient w.r.t.
// that output back to gradients w.r.t. every input, in order. Stochastic ops
// must bake their randomness into the closure so forward is deterministic.
//
// Contract: backward must agree with central finite differences of forward to
// a relative error of 1e-4 at random points (1e-6 for smooth ops sampled away
// from ReLU kinks). Every layer and model in the repository is held to this.
struct DiffOp {
  std::string name;
  std::function<Tensor(const std::vector<Tensor>&)> forward;
  std::function<std::vector<Tensor>(const std::vector<Tensor>&, const Tensor&)>
      backward;
};

using ScalarFn = std::function<double(const std::vector<Tensor>&)>;

inline constexpr double kFdEps = 1e-5;
inline constexpr double kGradTolerance = 1e-4;

// Central differences (f(x+eps) - f(x-eps)) / (2 eps), one entry at a time.
std::vector<Tensor> finite_diff_grad(const ScalarFn& f,
                                     const std::vector<Tensor>& point,
                                     double eps = kFdEps);

// Same, for an op whose forward already emits a scalar (a 1-element tensor).
// Throws ContractError otherwise.
std::vector<Tensor> finite_diff_grad(const DiffOp& op,
                                     const std::vector<Tensor>& point,
                                     double eps = kFdEps);

// |a - n| / max(|a|, |n|, 1e-4). The floor keeps finite-difference noise on
// exactly-zero gradients (masked ReLU entries) from reading as failures while
// still catching wrong scales on any gradient that matters.
double rel_error(double analytic, double numeric);
double max_rel_error(const std::vector<Tensor>& analytic,
                     const std::vector<Tensor>& numeric);

// Gradcheck via a random projection: wraps op into the scalar
// sum_ij w_ij * forward(x)_ij with fixed random weights w, runs backward with
// w as the upstream gradient, and compares against central differences.
// Returns the max relative error over all entries of all inputs.
double check_gradients(const DiffOp& op, const std::vector<Tensor>& point,
                       Rng& rng, double eps = kFdEps);

}  // namespace mdtc
