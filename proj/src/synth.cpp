#include "mdtc/synth.hpp"

#include <string>

#include "mdtc/errors.hpp"
#include "mdtc/rng.hpp"

namespace mdtc {

namespace {

void validate(const SynthSpec& s) {
  for (double r : {s.label_rate, s.domain_rate, s.spur_rate})
    if (r < 0.0 || r > 1.0)
      throw ConfigError("synth rates must lie in [0,1]");
  if (s.label_rate + s.domain_rate + s.spur_rate > 1.0)
    throw ConfigError("synth rates sum above 1");
  if (s.n_labels == 0 || s.n_train_domains == 0 ||
      s.docs_per_domain_label == 0 || s.doc_length == 0 ||
      s.markers_per_label == 0 || s.markers_per_domain == 0 ||
      s.noise_vocab == 0)
    throw ConfigError("synth counts must be positive");
}

std::string make_doc(const SynthSpec& s, bool heldout, std::size_t dom,
                     std::size_t label, Rng& rng) {
  std::string text;
  for (std::size_t t = 0; t < s.doc_length; ++t) {
    const double u = rng.uniform();
    std::string tok;
    if (u < s.label_rate) {
      tok = "lbl" + std::to_string(label) + "_" +
            std::to_string(rng.index(s.markers_per_label));
    } else if (u < s.label_rate + s.domain_rate) {
      tok = (heldout ? "hdom" : "dom") + std::to_string(dom) + "_" +
            std::to_string(rng.index(s.markers_per_domain));
    } else if (u < s.label_rate + s.domain_rate + s.spur_rate) {
      // Correlated with the label inside a training domain, uniform junk in
      // heldout documents.
      const std::size_t k = heldout ? rng.index(s.n_train_domains) : dom;
      const std::size_t c = heldout ? rng.index(s.n_labels) : label;
      tok = "spur" + std::to_string(k) + "_" + std::to_string(c);
    } else {
      tok = "noise" + std::to_string(rng.index(s.noise_vocab));
    }
    if (!text.empty()) text.push_back(' ');
    text += tok;
  }
  return text;
}

}  // namespace

SynthResult synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  std::vector<Example> train, heldout;
  for (std::size_t d = 0; d < spec.n_train_domains; ++d)
    for (std::size_t c = 0; c < spec.n_labels; ++c)
      for (std::size_t i = 0; i < spec.docs_per_domain_label; ++i)
        train.push_back({make_doc(spec, false, d, c, rng),
                         "label" + std::to_string(c), "d" + std::to_string(d)});
  for (std::size_t d = 0; d < spec.n_heldout_domains; ++d)
    for (std::size_t c = 0; c < spec.n_labels; ++c)
      for (std::size_t i = 0; i < spec.docs_per_domain_label; ++i)
        heldout.push_back({make_doc(spec, true, d, c, rng),
                           "label" + std::to_string(c),
                           "h" + std::to_string(d)});
  SynthResult out;
  out.train = make_corpus(std::move(train));
  if (!heldout.empty()) out.heldout = make_corpus(std::move(heldout));
  return out;
}

}  // namespace mdtc
