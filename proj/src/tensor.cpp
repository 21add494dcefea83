#include "mdtc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdtc {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
    throw ShapeError("matmul: incompatible shapes " +
                     Tensor::shape_str(a.shape()) + " and " +
                     Tensor::shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a.at(i, t);
      const double* brow = b.data() + t * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Tensor softmax(const Tensor& logits) {
  if (logits.ndim() != 1 || logits.size() == 0)
    throw ShapeError("softmax: expected non-empty rank-1 tensor, got " +
                     Tensor::shape_str(logits.shape()));
  const double mx = *std::max_element(logits.data(),
                                      logits.data() + logits.size());
  Tensor out(logits.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sum;
  return out;
}

double cross_entropy(const Tensor& probs, std::size_t gold) {
  if (gold >= probs.size())
    throw std::out_of_range("cross_entropy: gold index " +
                            std::to_string(gold) + " out of range for " +
                            std::to_string(probs.size()) + " classes");
  return -std::log(std::max(probs[gold], kProbFloor));
}

}  // namespace mdtc
