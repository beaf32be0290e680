#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retcl/tensor/tape.hpp"
#include "retcl/tensor/tensor.hpp"

namespace retcl::tensor {

namespace detail {

inline void require(bool ok, TensorErrc code, const char* what) {
  if (!ok) throw TensorError(code, what);
}

template <class T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace detail

// a * b (n x k times k x m).
template <class T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  auto out = matmul(av, bv);
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(
      std::move(out), rg,
      [a, b](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        if (t.requires_grad(a)) {
          kernels::gemm_acc(g, kernels::transpose(t.value(b)), t.grad_buffer(a));
        }
        if (t.requires_grad(b)) {
          kernels::gemm_tn_acc(t.value(a), g, t.grad_buffer(b));
        }
      },
      "matmul");
}

// a * b^T (n x d times m x d).
template <class T>
Var matmul_nt(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  detail::require(av.cols() == bv.cols(), TensorErrc::shape_mismatch, "matmul_nt");
  auto out = matmul(av, kernels::transpose(bv));
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(
      std::move(out), rg,
      [a, b](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        if (t.requires_grad(a)) kernels::gemm_acc(g, t.value(b), t.grad_buffer(a));
        if (t.requires_grad(b)) kernels::gemm_tn_acc(g, t.value(a), t.grad_buffer(b));
      },
      "matmul_nt");
}

template <class T>
Var add(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  detail::require(av.same_shape(bv), TensorErrc::shape_mismatch, "add");
  Tensor<T> out = av;
  detail::add_into(out, bv);
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(
      std::move(out), rg,
      [a, b](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        if (t.requires_grad(a)) detail::add_into(t.grad_buffer(a), g);
        if (t.requires_grad(b)) detail::add_into(t.grad_buffer(b), g);
      },
      "add");
}

// x + row, broadcasting a 1 x d row over every row of x.
template <class T>
Var add_row(Tape<T>& tape, Var x, Var row) {
  const auto& xv = tape.value(x);
  const auto& rv = tape.value(row);
  detail::require(rv.rows() == 1 && rv.cols() == xv.cols(), TensorErrc::shape_mismatch,
                  "add_row");
  Tensor<T> out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += rv(0, j);
  }
  const bool rg = tape.requires_grad(x) || tape.requires_grad(row);
  return tape.record(
      std::move(out), rg,
      [x, row](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        if (t.requires_grad(x)) detail::add_into(t.grad_buffer(x), g);
        if (t.requires_grad(row)) {
          auto& gr = t.grad_buffer(row);
          for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
          }
        }
      },
      "add_row");
}

template <class T>
Var scale(Tape<T>& tape, Var x, T c) {
  Tensor<T> out = tape.value(x);
  for (auto& v : out.data()) v *= c;
  return tape.record(
      std::move(out), tape.requires_grad(x),
      [x, c](Tape<T>& t, std::uint32_t self) {
        const auto g = t.upstream(self).data();
        auto d = t.grad_buffer(x).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += c * g[i];
      },
      "scale");
}

template <class T>
Var sub(Tape<T>& tape, Var a, Var b) {
  return add(tape, a, scale(tape, b, T{-1}));
}

// Elementwise product.
template <class T>
Var mul(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  detail::require(av.same_shape(bv), TensorErrc::shape_mismatch, "mul");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(
      std::move(out), rg,
      [a, b](Tape<T>& t, std::uint32_t self) {
        const auto g = t.upstream(self).data();
        if (t.requires_grad(a)) {
          auto d = t.grad_buffer(a).data();
          const auto o = t.value(b).data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * o[i];
        }
        if (t.requires_grad(b)) {
          auto d = t.grad_buffer(b).data();
          const auto o = t.value(a).data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * o[i];
        }
      },
      "mul");
}

// max(0, x); the gradient passes only where x > 0.
template <class T>
Var relu(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return tape.record(
      std::move(out), tape.requires_grad(x),
      [x](Tape<T>& t, std::uint32_t self) {
        const auto g = t.upstream(self).data();
        const auto in = t.value(x).data();
        auto d = t.grad_buffer(x).data();
        for (std::size_t i = 0; i < d.size(); ++i) {
          if (in[i] > T{0}) d[i] += g[i];
        }
      },
      "relu");
}

// Sum of all entries, as a 1 x 1 tensor.
template <class T>
Var sum(Tape<T>& tape, Var x) {
  T total{0};
  for (const T v : tape.value(x).data()) total += v;
  return tape.record(
      Tensor<T>::scalar(total), tape.requires_grad(x),
      [x](Tape<T>& t, std::uint32_t self) {
        const T g = t.upstream(self)(0, 0);
        for (auto& v : t.grad_buffer(x).data()) v += g;
      },
      "sum");
}

template <class T>
Var gather_rows(Tape<T>& tape, Var x, std::vector<std::uint32_t> indices) {
  const auto& xv = tape.value(x);
  Tensor<T> out(indices.size(), xv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    detail::require(indices[i] < xv.rows(), TensorErrc::invalid_argument,
                    "gather index out of range");
    auto src = xv.row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return tape.record(
      std::move(out), tape.requires_grad(x),
      [x, idx = std::move(indices)](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        auto& d = t.grad_buffer(x);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          auto dst = d.row(idx[i]);
          auto src = g.row(i);
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
      },
      "gather_rows");
}

// Row j of the result is the sum of the rows of x whose segment id is j;
// empty segments give zero rows. Rows are accumulated in input order.
template <class T>
Var segment_sum(Tape<T>& tape, Var x, std::shared_ptr<const std::vector<std::uint32_t>> segments,
                std::size_t count) {
  const auto& xv = tape.value(x);
  const auto& seg = *segments;
  detail::require(seg.size() == xv.rows(), TensorErrc::shape_mismatch, "segment_sum");
  Tensor<T> out(count, xv.cols());
  for (std::size_t i = 0; i < seg.size(); ++i) {
    detail::require(seg[i] < count, TensorErrc::invalid_argument, "segment id out of range");
    auto dst = out.row(seg[i]);
    auto src = xv.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  return tape.record(
      std::move(out), tape.requires_grad(x),
      [x, segments](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        auto& d = t.grad_buffer(x);
        const auto& s = *segments;
        for (std::size_t i = 0; i < s.size(); ++i) {
          auto dst = d.row(i);
          auto src = g.row(s[i]);
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
      },
      "segment_sum");
}

template <class T>
Var segment_sum(Tape<T>& tape, Var x, std::vector<std::uint32_t> segments, std::size_t count) {
  return segment_sum(tape, x,
                     std::make_shared<const std::vector<std::uint32_t>>(std::move(segments)),
                     count);
}

template <class T>
Var concat_rows(Tape<T>& tape, std::vector<Var> parts) {
  std::size_t rows = 0, cols = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& v = tape.value(parts[i]);
    if (i == 0) cols = v.cols();
    detail::require(v.cols() == cols, TensorErrc::shape_mismatch, "concat_rows");
    rows += v.rows();
  }
  Tensor<T> out(rows, cols);
  std::size_t at = 0;
  bool rg = false;
  for (const auto p : parts) {
    const auto& v = tape.value(p);
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + at * cols);
    at += v.rows();
    rg = rg || tape.requires_grad(p);
  }
  return tape.record(
      std::move(out), rg,
      [parts = std::move(parts)](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        std::size_t offset = 0;
        for (const auto p : parts) {
          const auto n = t.value(p).size();
          if (t.requires_grad(p)) {
            auto d = t.grad_buffer(p).data();
            for (std::size_t i = 0; i < n; ++i) d[i] += g.data()[offset + i];
          }
          offset += n;
        }
      },
      "concat_rows");
}

// Scales every row to unit L2 norm; rows with norm < 1e-12 become zero and
// pass no gradient.
template <class T>
Var normalize_rows(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  Tensor<T> out(xv.rows(), xv.cols());
  std::vector<T> inv_norm(xv.rows(), T{0});
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    T sq{0};
    for (const T v : xv.row(i)) sq += v * v;
    const T norm = std::sqrt(sq);
    if (norm < T(1e-12)) continue;
    inv_norm[i] = T{1} / norm;
    auto dst = out.row(i);
    auto src = xv.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = src[j] * inv_norm[i];
  }
  return tape.record(
      std::move(out), tape.requires_grad(x),
      [x, inv = std::move(inv_norm)](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        const auto& y = t.value(Var{self});
        auto& d = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          if (inv[i] == T{0}) continue;
          T dot{0};
          for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
          for (std::size_t j = 0; j < g.cols(); ++j) {
            d(i, j) += (g(i, j) - y(i, j) * dot) * inv[i];
          }
        }
      },
      "normalize_rows");
}

// Cosine similarity of two 1 x d rows as a 1 x 1 tensor.
template <class T>
Var cosine(Tape<T>& tape, Var a, Var b) {
  return matmul_nt(tape, normalize_rows(tape, a), normalize_rows(tape, b));
}

// For each row r: scores[r, target[r]] - logsumexp(scores[r, :]).
// Returns an R x 1 column of log-probabilities.
template <class T>
Var log_softmax_pick(Tape<T>& tape, Var scores, std::vector<std::uint32_t> targets,
                     std::shared_ptr<const std::vector<std::uint8_t>> allowed = nullptr) {
  const auto& s = tape.value(scores);
  detail::require(targets.size() == s.rows(), TensorErrc::shape_mismatch,
                  "one target per score row");
  detail::require(s.cols() >= 1, TensorErrc::invalid_argument, "empty class list");
  detail::require(!allowed || allowed->size() == s.size(), TensorErrc::shape_mismatch,
                  "class mask must match the score matrix");
  auto ok = [&](std::size_t r, std::size_t j) {
    return !allowed || (*allowed)[r * s.cols() + j] != 0;
  };
  Tensor<T> out(s.rows(), 1);
  auto probs = std::make_shared<Tensor<T>>(s.rows(), s.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    detail::require(targets[r] < s.cols() && ok(r, targets[r]), TensorErrc::invalid_argument,
                    "target outside class list");
    T mx = s(r, targets[r]);
    for (std::size_t j = 0; j < s.cols(); ++j) {
      if (ok(r, j)) mx = std::max(mx, s(r, j));
    }
    T total{0};
    for (std::size_t j = 0; j < s.cols(); ++j) {
      const T e = ok(r, j) ? std::exp(s(r, j) - mx) : T{0};
      (*probs)(r, j) = e;
      total += e;
    }
    for (std::size_t j = 0; j < s.cols(); ++j) (*probs)(r, j) /= total;
    out(r, 0) = s(r, targets[r]) - mx - std::log(total);
  }
  return tape.record(
      std::move(out), tape.requires_grad(scores),
      [scores, probs, tg = std::move(targets)](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        auto& d = t.grad_buffer(scores);
        for (std::size_t r = 0; r < d.rows(); ++r) {
          const T gr = g(r, 0);
          for (std::size_t j = 0; j < d.cols(); ++j) d(r, j) -= gr * (*probs)(r, j);
          d(r, tg[r]) += gr;
        }
      },
      "log_softmax_pick");
}

// x W (+ b).
template <class T>
Var linear(Tape<T>& tape, Var x, Var w, std::optional<Var> b = std::nullopt) {
  auto y = matmul(tape, x, w);
  return b ? add_row(tape, y, *b) : y;
}

struct BatchNormConfig {
  double momentum = 0.1;
  double epsilon = 1e-5;
};

// Training-mode batch normalization over the rows of x: biased batch
// variance for normalization, unbiased variance for the running estimate.
template <class T>
Var batchnorm_train(Tape<T>& tape, Var x, Var gamma, Var beta, Tensor<T>& running_mean,
                    Tensor<T>& running_var, BatchNormConfig cfg = {}) {
  const auto& xv = tape.value(x);
  const auto n = xv.rows(), d = xv.cols();
  if (n < 2) {
    throw TensorError(TensorErrc::degenerate_batch,
                      "batch norm in training mode needs at least two rows");
  }
  const auto& gv = tape.value(gamma);
  const auto& bv = tape.value(beta);
  detail::require(gv.cols() == d && bv.cols() == d && running_mean.cols() == d &&
                      running_var.cols() == d,
                  TensorErrc::shape_mismatch, "batchnorm width");
  std::vector<T> mean(d, T{0}), var(d, T{0});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += xv(i, j);
  }
  for (auto& m : mean) m /= static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const T c = xv(i, j) - mean[j];
      var[j] += c * c;
    }
  }
  for (auto& v : var) v /= static_cast<T>(n);
  auto xhat = std::make_shared<Tensor<T>>(n, d);
  auto inv_std = std::make_shared<std::vector<T>>(d);
  Tensor<T> out(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    (*inv_std)[j] = T{1} / std::sqrt(var[j] + static_cast<T>(cfg.epsilon));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xv(i, j) - mean[j]) * (*inv_std)[j];
      (*xhat)(i, j) = h;
      out(i, j) = gv(0, j) * h + bv(0, j);
    }
  }
  const T m = static_cast<T>(cfg.momentum);
  const T unbias = static_cast<T>(n) / static_cast<T>(n - 1);
  for (std::size_t j = 0; j < d; ++j) {
    running_mean(0, j) = (T{1} - m) * running_mean(0, j) + m * mean[j];
    running_var(0, j) = (T{1} - m) * running_var(0, j) + m * var[j] * unbias;
  }
  const bool rg = tape.requires_grad(x) || tape.requires_grad(gamma) || tape.requires_grad(beta);
  return tape.record(
      std::move(out), rg,
      [x, gamma, beta, xhat, inv_std](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        const auto n = g.rows(), d = g.cols();
        const auto& gv = t.value(gamma);
        std::vector<T> sum_g(d, T{0}), sum_gx(d, T{0});
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            sum_g[j] += g(i, j);
            sum_gx[j] += g(i, j) * (*xhat)(i, j);
          }
        }
        if (t.requires_grad(gamma)) {
          auto& dg = t.grad_buffer(gamma);
          for (std::size_t j = 0; j < d; ++j) dg(0, j) += sum_gx[j];
        }
        if (t.requires_grad(beta)) {
          auto& db = t.grad_buffer(beta);
          for (std::size_t j = 0; j < d; ++j) db(0, j) += sum_g[j];
        }
        if (t.requires_grad(x)) {
          auto& dx = t.grad_buffer(x);
          const T inv_n = T{1} / static_cast<T>(n);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
              // dxhat = g * gamma; sums of dxhat scale the same way.
              const T k = gv(0, j) * (*inv_std)[j] * inv_n;
              dx(i, j) += k * (static_cast<T>(n) * g(i, j) - sum_g[j] -
                               (*xhat)(i, j) * sum_gx[j]);
            }
          }
        }
      },
      "batchnorm_train");
}

// Inference-mode batch normalization: a fixed per-row affine map.
template <class T>
Var batchnorm_eval(Tape<T>& tape, Var x, Var gamma, Var beta, const Tensor<T>& running_mean,
                   const Tensor<T>& running_var, BatchNormConfig cfg = {}) {
  const auto& xv = tape.value(x);
  const auto n = xv.rows(), d = xv.cols();
  const auto& gv = tape.value(gamma);
  const auto& bv = tape.value(beta);
  detail::require(gv.cols() == d && bv.cols() == d && running_mean.cols() == d &&
                      running_var.cols() == d,
                  TensorErrc::shape_mismatch, "batchnorm width");
  auto inv_std = std::make_shared<std::vector<T>>(d);
  for (std::size_t j = 0; j < d; ++j) {
    (*inv_std)[j] = T{1} / std::sqrt(running_var(0, j) + static_cast<T>(cfg.epsilon));
  }
  Tensor<T> out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out(i, j) = (xv(i, j) - running_mean(0, j)) * (*inv_std)[j] * gv(0, j) + bv(0, j);
    }
  }
  auto mean = std::make_shared<Tensor<T>>(running_mean);
  const bool rg = tape.requires_grad(x) || tape.requires_grad(gamma) || tape.requires_grad(beta);
  return tape.record(
      std::move(out), rg,
      [x, gamma, beta, inv_std, mean](Tape<T>& t, std::uint32_t self) {
        const auto& g = t.upstream(self);
        const auto& xv = t.value(x);
        const auto& gv = t.value(gamma);
        const auto n = g.rows(), d = g.cols();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            const T gij = g(i, j);
            if (t.requires_grad(x)) t.grad_buffer(x)(i, j) += gij * (*inv_std)[j] * gv(0, j);
            if (t.requires_grad(gamma)) {
              t.grad_buffer(gamma)(0, j) += gij * (xv(i, j) - (*mean)(0, j)) * (*inv_std)[j];
            }
            if (t.requires_grad(beta)) t.grad_buffer(beta)(0, j) += gij;
          }
        }
      },
      "batchnorm_eval");
}

}  // namespace retcl::tensor
