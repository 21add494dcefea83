#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mdtc/errors.hpp"

namespace mdtc {

// Dense row-major tensor of doubles; the universal value carrier. Only ranks
// 1 and 2 are used in practice. Double precision throughout: the gradient
// checks depend on it.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }

  static Tensor from(std::vector<std::size_t> shape,
                     std::vector<double> values) {
    Tensor t;
    if (count(shape) != values.size())
      throw ShapeError("tensor: " + shape_str(shape) + " does not hold " +
                       std::to_string(values.size()) + " values");
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
  }

  static Tensor row(std::vector<double> values) {
    const std::size_t n = values.size();
    return from({n}, std::move(values));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const double& at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  // this += s * other
  void add_scaled(const Tensor& other, double s) {
    if (!same_shape(other))
      throw ShapeError("add_scaled: shape mismatch " + shape_str(shape_) +
                       " vs " + shape_str(other.shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other[i];
  }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

  static std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += "x";
      out += std::to_string(s[i]);
    }
    return out + "]";
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Floor applied inside cross_entropy so -log never sees an exact zero.
// Below every test tolerance used in the repository.
inline constexpr double kProbFloor = 1e-12;

Tensor matmul(const Tensor& a, const Tensor& b);

// Numerically stable softmax over a rank-1 tensor (max is subtracted before
// exponentiation). Output is positive and sums to 1.
Tensor softmax(const Tensor& logits);

// -log(probs[gold]) with the probability floor. gold must index into probs.
double cross_entropy(const Tensor& probs, std::size_t gold);

}  // namespace mdtc
