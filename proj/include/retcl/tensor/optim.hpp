#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "retcl/tensor/param_store.hpp"

namespace retcl::tensor {

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  double clip_norm = 5.0;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
    if (momentum < 0.0 || weight_decay < 0.0) {
      throw std::invalid_argument("momentum and weight_decay must be >= 0");
    }
  }
};

template <std::floating_point T>
double global_norm(const GradientMap<T>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (const T v : g.data()) sq += static_cast<double>(v) * v;
  }
  return std::sqrt(sq);
}

// Rescales in place when the global L2 norm exceeds clip_norm. Returns the
// norm before clipping.
template <std::floating_point T>
double clip_global_norm(GradientMap<T>& grads, double clip_norm) {
  const double norm = global_norm(grads);
  if (norm > clip_norm) {
    const T factor = static_cast<T>(clip_norm / norm);
    for (auto& g : grads) {
      for (auto& v : g.data()) v *= factor;
    }
  }
  return norm;
}

// SGD with heavy-ball momentum. Velocity buffers are created on first use.
template <std::floating_point T>
class Sgd {
 public:
  explicit Sgd(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const SgdConfig& config() const { return cfg_; }

  void step(ParamStore<T>& store, const GradientMap<T>& grads) {
    if (grads.size() != store.size()) {
      throw TensorError(TensorErrc::shape_mismatch, "gradient map does not match store");
    }
    if (velocity_.size() != store.size()) velocity_.resize(store.size());
    const T lr = static_cast<T>(cfg_.learning_rate);
    const T mom = static_cast<T>(cfg_.momentum);
    const T wd = static_cast<T>(cfg_.weight_decay);
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto& p = store.params()[i];
      if (!trainable(p.kind)) continue;
      auto& vel = velocity_[i];
      if (vel.empty()) vel = Tensor<T>(p.value.rows(), p.value.cols());
      auto w = p.value.data();
      auto v = vel.data();
      const bool has_grad = !grads[i].empty();
      if (has_grad && !grads[i].same_shape(p.value)) {
        throw TensorError(TensorErrc::shape_mismatch, "gradient shape for " + p.name);
      }
      const T* g = has_grad ? grads[i].data().data() : nullptr;
      const T decay = decays(p.kind) ? wd : T{0};
      for (std::size_t j = 0; j < w.size(); ++j) {
        v[j] = mom * v[j] + (g ? g[j] : T{0}) + decay * w[j];
        w[j] -= lr * v[j];
      }
    }
    ++store.step;
  }

 private:
  SgdConfig cfg_;
  std::vector<Tensor<T>> velocity_;
};

}  // namespace retcl::tensor
