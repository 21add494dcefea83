#pragma once

#include <string>

#include "mdtc/synth.hpp"
#include "mdtc/train.hpp"

namespace mdtc {

// Everything a training run needs, read from one JSON config file so the
// experiment is reproducible from a single artifact. Command-line flags
// override seed and paths only.
struct RunConfig {
  TrainConfig train;
  std::string data_path;     // --data overrides
  std::string model_out = "model.mdtc";
  std::string metrics_out;   // default: model_out + ".metrics.json"

  std::string resolved_metrics_out() const {
    return metrics_out.empty() ? model_out + ".metrics.json" : metrics_out;
  }
};

// Strict parsers: unknown keys are rejected with ConfigError naming the key.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

SynthSpec parse_synth_spec(const std::string& json_text);
SynthSpec load_synth_spec(const std::string& path);

}  // namespace mdtc
