#pragma once

#include <cstddef>
#include <vector>

#include "mdtc/rng.hpp"
#include "mdtc/tensor.hpp"

namespace mdtc {

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// Embedding lookup

struct Embedding {
  Tensor table;  // V x e; row v is the embedding of token id v
  std::size_t vocab_size() const { return table.rows(); }
  std::size_t dim() const { return table.cols(); }
};

Embedding make_embedding(std::size_t vocab, std::size_t dim, Rng& rng);

// Stacks table rows ids[0..L) into an L x e tensor. Throws VocabError on an
// out-of-range id.
Tensor embed_forward(const std::vector<int>& ids, const Embedding& emb);

// Scatters grad rows back into a V x e gradient table, accumulating over
// repeated ids.
void embed_backward_accum(const std::vector<int>& ids, const Tensor& grad_out,
                          Tensor& dtable);
Tensor embed_backward(const std::vector<int>& ids, const Tensor& grad_out,
                      const Embedding& emb);

// ---------------------------------------------------------------------------
// Convolution bank with max-over-time pooling

struct ConvSpec {
  std::size_t width = 0;    // window length in tokens
  std::size_t filters = 0;  // output channels for this width
};

// One weight matrix (width*e) x filters plus a bias per spec. A window of
// `width` embedding rows is flattened, passed through the affine map and a
// ReLU, and max-pooled over all positions. Outputs of the specs are
// concatenated in declaration order.
struct ConvBank {
  std::vector<ConvSpec> specs;
  std::vector<Tensor> weights;  // per spec: (width*e) x filters
  std::vector<Tensor> biases;   // per spec: filters

  std::size_t output_dim() const {
    std::size_t n = 0;
    for (const auto& s : specs) n += s.filters;
    return n;
  }
  std::size_t max_width() const {
    std::size_t w = 0;
    for (const auto& s : specs) w = std::max(w, s.width);
    return w;
  }
};

ConvBank make_conv_bank(const std::vector<ConvSpec>& specs,
                        std::size_t embed_dim, Rng& rng);

struct ConvCache {
  // Per spec, per filter: winning position and its pre-activation value.
  std::vector<std::vector<std::size_t>> argmax;
  std::vector<std::vector<double>> best_pre;
};

// Throws ShapeError when the sequence is shorter than a filter width.
Tensor conv_forward(const Tensor& x, const ConvBank& bank,
                    ConvCache* cache = nullptr);

// Accumulates into dw/db (shaped like the bank's weights/biases) and, when dx
// is non-null, into dx (shaped like x). Only the winning window of each filter
// carries gradient, and only when its pre-activation was positive.
void conv_backward(const Tensor& x, const ConvBank& bank,
                   const ConvCache& cache, const double* grad_out,
                   std::vector<Tensor>& dw, std::vector<Tensor>& db,
                   Tensor* dx);

// ---------------------------------------------------------------------------
// Linear head

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // out
  std::size_t in_dim() const { return w.rows(); }
  std::size_t out_dim() const { return w.cols(); }
};

Linear make_linear(std::size_t in, std::size_t out, Rng& rng);

Tensor linear_forward(const Tensor& x, const Linear& lin);
void linear_backward(const Tensor& x, const Linear& lin,
                     const Tensor& grad_out, Tensor& dw, Tensor& db,
                     Tensor* dx);

// ---------------------------------------------------------------------------
// Gradient reversal

// Forward is the identity, bit for bit. Backward multiplies the incoming
// gradient by -lambda. The pair intentionally does not satisfy the usual
// derivative relationship; that is the whole trick.
Tensor grl_forward(const Tensor& x);
Tensor grl_backward(const Tensor& grad, double lambda);

// ---------------------------------------------------------------------------
// Inverted dropout

struct DropoutResult {
  Tensor output;
  Tensor mask;         // entries 0 or 1
  double scale = 1.0;  // 1/(1-p) in train mode, 1 in eval mode or at p == 0
};

// Train mode: each entry survives with probability 1-p and is scaled by
// 1/(1-p), so the expectation equals the input. Eval mode (or p == 0) is the
// identity and consumes no randomness. Draws exactly one uniform per entry,
// in flat order. Throws ConfigError unless 0 <= p < 1.
DropoutResult dropout_apply(const Tensor& x, double p, Rng& rng, Mode mode);
Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask,
                        double scale);

// ---------------------------------------------------------------------------
// Initialization

void init_uniform(Tensor& t, Rng& rng, double lo, double hi);
// Uniform in +/- sqrt(6 / (fan_in + fan_out)).
void init_glorot(Tensor& t, Rng& rng, std::size_t fan_in, std::size_t fan_out);

}  // namespace mdtc
