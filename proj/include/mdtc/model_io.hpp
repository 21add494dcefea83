#pragma once

#include <string>
#include <vector>

#include "mdtc/adam.hpp"
#include "mdtc/data.hpp"
#include "mdtc/model.hpp"

namespace mdtc {

// Everything needed to run a saved model on raw text.
struct ModelBundle {
  Model model;
  TokenizerSpec tokenizer;
  Vocab vocab;
  std::vector<std::string> labels;
  std::vector<std::string> domains;
};

// File layout: one magic line, one line of JSON (architecture, switches,
// hyperparameters, inventories, tokenizer, vocabulary, bank layout, head
// flags, and a name/shape manifest), then raw little-endian float64 blocks
// in manifest order. Writes are deterministic byte for byte.
void save_model(const ModelBundle& bundle, const std::string& path);
ModelBundle load_model(const std::string& path);

// Optimizer state in the same block format, for resumable training. Loading
// verifies the manifest against the given parameter layout.
void save_adam_state(const AdamState& state, const ParamSet& params,
                     const std::string& path);
AdamState load_adam_state(const std::string& path, const ParamSet& params);

}  // namespace mdtc
