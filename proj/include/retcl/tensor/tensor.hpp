#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace retcl::tensor {

enum class TensorErrc { shape_mismatch, degenerate_batch, non_finite, invalid_argument };

class TensorError : public std::runtime_error {
 public:
  TensorError(TensorErrc code, const std::string& what)
      : std::runtime_error(name(code) + ": " + what), code_(code) {}

  TensorErrc code() const noexcept { return code_; }

 private:
  static std::string name(TensorErrc code) {
    switch (code) {
      case TensorErrc::shape_mismatch: return "ShapeMismatch";
      case TensorErrc::degenerate_batch: return "DegenerateBatch";
      case TensorErrc::non_finite: return "NonFinite";
      case TensorErrc::invalid_argument: return "InvalidArgument";
    }
    return "TensorError";
  }

  TensorErrc code_;
};

// Dense row-major matrix. Vectors are 1 x d, scalars 1 x 1.
template <std::floating_point T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw TensorError(TensorErrc::shape_mismatch, "data length does not match shape");
    }
  }
  Tensor(std::size_t rows, std::size_t cols, std::initializer_list<T> values)
      : Tensor(rows, cols, std::vector<T>(values)) {}

  static Tensor scalar(T v) { return Tensor(1, 1, v); }

  template <std::floating_point U>
  Tensor<U> cast() const {
    return Tensor<U>(rows_, cols_, std::vector<U>(data_.begin(), data_.end()));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T item() const { return data_.at(0); }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (const T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

namespace kernels {

// out += a * b, with a: n x k, b: k x m. Each output row accumulates over k in
// order, independent of the other rows.
template <class T>
void gemm_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
  const auto n = a.rows(), k = a.cols(), m = b.cols();
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* pc = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    T* crow = pc + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = pa[i * k + p];
      if (av == T{0}) continue;
      const T* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// out += a^T * b, with a: n x k, b: n x m, out: k x m.
template <class T>
void gemm_tn_acc(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
  const auto n = a.rows(), k = a.cols(), m = b.cols();
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* pc = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const T* brow = pb + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = pa[i * k + p];
      if (av == T{0}) continue;
      T* crow = pc + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  Tensor<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

}  // namespace kernels

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw TensorError(TensorErrc::shape_mismatch,
                      "matmul " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                          " by " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Tensor<T> out(a.rows(), b.cols());
  kernels::gemm_acc(a, b, out);
  return out;
}

// Cosine similarity accumulated in double; zero when either norm < 1e-12.
template <class A, class B>
double cosine(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) {
    throw TensorError(TensorErrc::shape_mismatch, "cosine of unequal lengths");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

// scores[target] - logsumexp(scores), with max subtraction.
template <class T>
double log_softmax_pick(std::span<const T> scores, std::size_t target) {
  if (scores.empty() || target >= scores.size()) {
    throw TensorError(TensorErrc::invalid_argument, "target outside score vector");
  }
  double mx = scores[0];
  for (const T s : scores) mx = std::max<double>(mx, s);
  double total = 0.0;
  for (const T s : scores) total += std::exp(static_cast<double>(s) - mx);
  return static_cast<double>(scores[target]) - mx - std::log(total);
}

}  // namespace retcl::tensor
