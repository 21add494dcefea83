#pragma once

#include <cstdint>

#include "mdtc/data.hpp"

namespace mdtc {

// Controlled spurious-correlation testbed. Documents are bags of four token
// families:
//   lbl{c}_{r}   label markers, rate label_rate, informative everywhere
//   dom{k}_{r}   train-domain markers (heldout domains use hdom{j}_{r},
//                unseen at training time), rate domain_rate
//   spur{k}_{c}  spurious tokens, rate spur_rate; inside training domain k
//                the token's c always equals the document label, so a model
//                may exploit it, but in heldout documents k and c are drawn
//                uniformly and carry no label signal
//   noise{r}     filler, remaining probability mass
struct SynthSpec {
  std::size_t n_labels = 4;
  std::size_t n_train_domains = 4;
  std::size_t n_heldout_domains = 2;
  std::size_t docs_per_domain_label = 200;
  std::size_t doc_length = 30;
  std::size_t markers_per_label = 2;
  std::size_t markers_per_domain = 2;
  std::size_t noise_vocab = 60;
  double label_rate = 0.06;
  double domain_rate = 0.10;
  double spur_rate = 0.30;
};

struct SynthResult {
  Corpus train;
  Corpus heldout;
};

// Deterministic under seed. Throws ConfigError when the three rates are
// outside [0,1] or sum above 1, or any count is zero (heldout count may be 0).
SynthResult synth_corpus(const SynthSpec& spec, std::uint64_t seed);

}  // namespace mdtc
