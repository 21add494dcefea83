#include "mdtc/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "mdtc/errors.hpp"

namespace mdtc {

Embedding make_embedding(std::size_t vocab, std::size_t dim, Rng& rng) {
  if (vocab == 0 || dim == 0)
    throw ConfigError("embedding needs vocab > 0 and dim > 0");
  Embedding emb{Tensor::zeros({vocab, dim})};
  init_uniform(emb.table, rng, -0.05, 0.05);
  return emb;
}

Tensor embed_forward(const std::vector<int>& ids, const Embedding& emb) {
  if (ids.empty()) throw ShapeError("embed_forward: empty id sequence");
  const std::size_t e = emb.dim();
  Tensor out = Tensor::zeros({ids.size(), e});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= emb.vocab_size())
      throw VocabError("token id " + std::to_string(id) +
                       " outside vocab of size " +
                       std::to_string(emb.vocab_size()));
    std::memcpy(out.data() + i * e,
                emb.table.data() + static_cast<std::size_t>(id) * e,
                e * sizeof(double));
  }
  return out;
}

void embed_backward_accum(const std::vector<int>& ids, const Tensor& grad_out,
                          Tensor& dtable) {
  if (grad_out.rows() != ids.size() || grad_out.cols() != dtable.cols())
    throw ShapeError("embed_backward: grad shape " +
                     Tensor::shape_str(grad_out.shape()) +
                     " does not match ids/table");
  const std::size_t e = dtable.cols();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto id = static_cast<std::size_t>(ids[i]);
    double* row = dtable.data() + id * e;
    const double* g = grad_out.data() + i * e;
    for (std::size_t j = 0; j < e; ++j) row[j] += g[j];
  }
}

Tensor embed_backward(const std::vector<int>& ids, const Tensor& grad_out,
                      const Embedding& emb) {
  Tensor dtable = Tensor::zeros(emb.table.shape());
  embed_backward_accum(ids, grad_out, dtable);
  return dtable;
}

ConvBank make_conv_bank(const std::vector<ConvSpec>& specs,
                        std::size_t embed_dim, Rng& rng) {
  if (specs.empty()) throw ConfigError("conv bank needs at least one spec");
  ConvBank bank;
  bank.specs = specs;
  for (const auto& s : specs) {
    if (s.width == 0 || s.filters == 0)
      throw ConfigError("conv spec needs width > 0 and filters > 0");
    const std::size_t in = s.width * embed_dim;
    Tensor w = Tensor::zeros({in, s.filters});
    init_glorot(w, rng, in, s.filters);
    bank.weights.push_back(std::move(w));
    bank.biases.push_back(Tensor::zeros({s.filters}));
  }
  return bank;
}

Tensor conv_forward(const Tensor& x, const ConvBank& bank, ConvCache* cache) {
  const std::size_t L = x.rows();
  const std::size_t e = x.cols();
  Tensor out = Tensor::zeros({bank.output_dim()});
  if (cache) {
    cache->argmax.assign(bank.specs.size(), {});
    cache->best_pre.assign(bank.specs.size(), {});
  }
  std::size_t off = 0;
  for (std::size_t s = 0; s < bank.specs.size(); ++s) {
    const auto& spec = bank.specs[s];
    if (L < spec.width)
      throw ShapeError("sequence of length " + std::to_string(L) +
                       " shorter than filter width " +
                       std::to_string(spec.width));
    const Tensor& w = bank.weights[s];
    const Tensor& b = bank.biases[s];
    const std::size_t win = spec.width * e;
    const std::size_t npos = L - spec.width + 1;
    std::vector<double> best(spec.filters,
                             -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> bestpos(spec.filters, 0);
    for (std::size_t p = 0; p < npos; ++p) {
      const double* xw = x.data() + p * e;  // flattened window, contiguous
      for (std::size_t f = 0; f < spec.filters; ++f) {
        double acc = b[f];
        const double* wcol = w.data() + f;
        for (std::size_t t = 0; t < win; ++t)
          acc += xw[t] * wcol[t * spec.filters];
        if (acc > best[f]) {  // ties keep the first position
          best[f] = acc;
          bestpos[f] = p;
        }
      }
    }
    for (std::size_t f = 0; f < spec.filters; ++f)
      out[off + f] = best[f] > 0.0 ? best[f] : 0.0;
    if (cache) {
      cache->argmax[s] = std::move(bestpos);
      cache->best_pre[s] = std::move(best);
    }
    off += spec.filters;
  }
  return out;
}

void conv_backward(const Tensor& x, const ConvBank& bank,
                   const ConvCache& cache, const double* grad_out,
                   std::vector<Tensor>& dw, std::vector<Tensor>& db,
                   Tensor* dx) {
  const std::size_t e = x.cols();
  std::size_t off = 0;
  for (std::size_t s = 0; s < bank.specs.size(); ++s) {
    const auto& spec = bank.specs[s];
    const Tensor& w = bank.weights[s];
    const std::size_t win = spec.width * e;
    for (std::size_t f = 0; f < spec.filters; ++f) {
      const double g = grad_out[off + f];
      if (g == 0.0 || cache.best_pre[s][f] <= 0.0) continue;  // ReLU gate
      const std::size_t p = cache.argmax[s][f];
      const double* xw = x.data() + p * e;
      double* dwcol = dw[s].data() + f;
      for (std::size_t t = 0; t < win; ++t) dwcol[t * spec.filters] += g * xw[t];
      db[s][f] += g;
      if (dx) {
        double* dxw = dx->data() + p * e;
        const double* wcol = w.data() + f;
        for (std::size_t t = 0; t < win; ++t)
          dxw[t] += g * wcol[t * spec.filters];
      }
    }
    off += spec.filters;
  }
}

Linear make_linear(std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw ConfigError("linear needs in > 0 and out > 0");
  Linear lin{Tensor::zeros({in, out}), Tensor::zeros({out})};
  init_glorot(lin.w, rng, in, out);
  return lin;
}

Tensor linear_forward(const Tensor& x, const Linear& lin) {
  if (x.ndim() != 1 || x.size() != lin.in_dim())
    throw ShapeError("linear_forward: input " + Tensor::shape_str(x.shape()) +
                     " vs weight " + Tensor::shape_str(lin.w.shape()));
  const std::size_t out = lin.out_dim();
  Tensor y = Tensor::zeros({out});
  for (std::size_t j = 0; j < out; ++j) y[j] = lin.b[j];
  for (std::size_t i = 0; i < lin.in_dim(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* wrow = lin.w.data() + i * out;
    for (std::size_t j = 0; j < out; ++j) y[j] += xi * wrow[j];
  }
  return y;
}

void linear_backward(const Tensor& x, const Linear& lin,
                     const Tensor& grad_out, Tensor& dw, Tensor& db,
                     Tensor* dx) {
  const std::size_t out = lin.out_dim();
  if (grad_out.size() != out)
    throw ShapeError("linear_backward: grad size mismatch");
  for (std::size_t j = 0; j < out; ++j) db[j] += grad_out[j];
  for (std::size_t i = 0; i < lin.in_dim(); ++i) {
    const double xi = x[i];
    double* dwrow = dw.data() + i * out;
    const double* wrow = lin.w.data() + i * out;
    double acc = 0.0;
    for (std::size_t j = 0; j < out; ++j) {
      dwrow[j] += xi * grad_out[j];
      acc += wrow[j] * grad_out[j];
    }
    if (dx) (*dx)[i] += acc;
  }
}

Tensor grl_forward(const Tensor& x) { return x; }

Tensor grl_backward(const Tensor& grad, double lambda) {
  Tensor out = grad;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -lambda * grad[i];
  return out;
}

DropoutResult dropout_apply(const Tensor& x, double p, Rng& rng, Mode mode) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("dropout rate must satisfy 0 <= p < 1, got " +
                      std::to_string(p));
  DropoutResult res{x, Tensor::zeros(x.shape()), 1.0};
  if (mode == Mode::Eval || p == 0.0) {
    res.mask.fill(1.0);
    return res;
  }
  res.scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (rng.uniform() < p) {
      res.output[i] = 0.0;
    } else {
      res.mask[i] = 1.0;
      res.output[i] = x[i] * res.scale;
    }
  }
  return res;
}

Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask,
                        double scale) {
  if (!grad_out.same_shape(mask))
    throw ShapeError("dropout_backward: grad and mask shapes differ");
  Tensor dx = Tensor::zeros(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i)
    dx[i] = grad_out[i] * mask[i] * scale;
  return dx;
}

void init_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
}

void init_glorot(Tensor& t, Rng& rng, std::size_t fan_in,
                 std::size_t fan_out) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  init_uniform(t, rng, -limit, limit);
}

}  // namespace mdtc
