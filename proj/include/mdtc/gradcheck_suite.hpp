#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mdtc {

struct GradCheckSizes {
  std::size_t seq_len = 8;
  std::size_t embed_dim = 2;
  std::size_t filters = 2;
  std::vector<std::size_t> widths = {2, 3};
  std::size_t labels = 2;
  std::size_t domains = 3;
  std::size_t vocab = 11;
  std::size_t batch = 3;
};

struct ComponentResult {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = false;
};

// Finite-difference validation of every layer backward and of the six full
// model configurations (each architecture with switches off and on). Sample
// points are resampled until every conv filter's winning pre-activation and
// its margin over the runner-up clear 1e-3, keeping central differences away
// from ReLU kinks and pooling ties. Full-model checks evaluate the composite
// objective task - lambda_d*adv + lambda_g*gen for the encoder/classifier
// parameters and the raw adversarial term for the discriminator, matching
// what the backward pass is defined to produce.
//
// inject_fault deliberately corrupts one analytic gradient so callers can
// confirm the suite detects bad backward passes.
std::vector<ComponentResult> run_gradcheck_suite(std::uint64_t seed,
                                                 const GradCheckSizes& sizes,
                                                 bool inject_fault = false);

}  // namespace mdtc
