#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdtc/adam.hpp"
#include "mdtc/metrics.hpp"
#include "mdtc/model.hpp"
#include "mdtc/model_io.hpp"

namespace mdtc {

struct TrainConfig {
  ModelKind kind = ModelKind::Baseline;
  Switches switches;
  HyperParams hyper;
  TokenizerSpec tokenizer;
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double dev_fraction = 0.1;
  std::uint64_t seed = 0;
  std::size_t cv_folds = 0;  // used by the CLI; 0 means plain training
  bool progress = false;     // per-epoch loss lines on stderr
};

struct TrainResult {
  ModelBundle bundle;
  AdamState adam;
  MetricsReport report;  // per-epoch history plus data warnings
};

// Deterministic under config.seed: model init, dev split, and the epoch
// shuffles each draw from independently derived streams. Throws TrainError
// on a non-finite loss, naming the epoch and step.
TrainResult train(const Corpus& corpus, const TrainConfig& config);

// H = -sum p ln p with 0 ln 0 = 0.
double entropy(const Tensor& probs);

enum class Granularity { Dataset, Instance };

struct MinEntropyChoice {
  std::size_t domain = 0;            // dataset-level winner
  std::vector<double> mean_entropy;  // per candidate pathway
  std::vector<int> predictions;      // per instance
  std::vector<std::size_t> instance_domain;
};

// Runs the classifier under every candidate private pathway and keeps the
// one with the lowest prediction entropy: mean over the whole set (dataset
// granularity) or per instance. Ties go to the lowest pathway index.
MinEntropyChoice min_entropy_predict(const Model& model,
                                     const std::vector<std::vector<int>>& seqs,
                                     Granularity granularity);

struct OracleChoice {
  std::size_t domain = 0;
  double accuracy = 0.0;
  std::vector<double> accuracy_by_candidate;
  std::vector<int> predictions;
};

// Picks the candidate pathway with the highest labelled accuracy (ties to
// the lowest index). min_entropy accuracy can never exceed this.
OracleChoice oracle_domain_predict(const Model& model,
                                   const std::vector<std::vector<int>>& seqs,
                                   const std::vector<int>& gold_labels);

enum class InferMode {
  Gold,                // route by the example's own (training) domain
  MinEntropyDataset,
  MinEntropyInstance,
  Oracle,
  Fixed,               // route everything through one named domain
};

InferMode infer_mode_from_name(const std::string& name,
                               std::string* fixed_domain);

struct EvalOptions {
  InferMode infer = InferMode::MinEntropyDataset;
  std::string fixed_domain;
};

// Groups the corpus by domain string, scores accuracy per group with dropout
// in eval mode, and macro-averages. The inference mode only matters for
// cond models. Labels unseen at training time count as incorrect and are
// flagged.
MetricsReport evaluate(const ModelBundle& bundle, const Corpus& corpus,
                       const EvalOptions& opts = {});

// Stratified k-fold protocol: trains one model per fold (seed derived per
// fold) and pools correct/total counts per domain across folds. Routing uses
// gold domains; this is the in-domain protocol.
MetricsReport cross_validate(const Corpus& corpus, const TrainConfig& config,
                             std::size_t k);

// Trains a fresh linear domain classifier on the frozen shared
// representations and reports its accuracy: a measure of how much domain
// information survives in h_s.
double domain_probe_accuracy(const ModelBundle& bundle, const Corpus& corpus,
                             std::uint64_t seed);

}  // namespace mdtc
