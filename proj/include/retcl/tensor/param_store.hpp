#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "retcl/tensor/tape.hpp"
#include "retcl/tensor/tensor.hpp"

namespace retcl::tensor {

// How the optimizer treats a tensor. Buffers (batch-norm running stats) are
// never trained; weight decay applies to `weight` only.
enum class ParamKind : std::uint8_t { weight, bias, norm_scale, norm_shift, embedding, buffer };

inline bool trainable(ParamKind k) { return k != ParamKind::buffer; }
inline bool decays(ParamKind k) { return k == ParamKind::weight; }

struct ParamId {
  std::uint32_t index = UINT32_MAX;
  friend bool operator==(ParamId, ParamId) = default;
};

template <std::floating_point T>
struct Parameter {
  std::string name;
  ParamKind kind;
  Tensor<T> value;
};

// Named tensors in insertion order, plus the optimizer step counter.
template <std::floating_point T>
class ParamStore {
 public:
  ParamId add(std::string name, ParamKind kind, Tensor<T> value) {
    if (by_name_.contains(name)) throw std::invalid_argument("duplicate parameter " + name);
    const ParamId id{static_cast<std::uint32_t>(params_.size())};
    by_name_.emplace(name, id.index);
    params_.push_back({std::move(name), kind, std::move(value)});
    return id;
  }

  std::size_t size() const { return params_.size(); }
  const std::vector<Parameter<T>>& params() const { return params_; }
  std::vector<Parameter<T>>& params() { return params_; }

  Parameter<T>& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter<T>& operator[](ParamId id) const { return params_.at(id.index); }

  std::optional<ParamId> find(const std::string& name) const {
    const auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return ParamId{it->second};
  }
  ParamId id(const std::string& name) const {
    auto r = find(name);
    if (!r) throw std::out_of_range("unknown parameter " + name);
    return *r;
  }
  Tensor<T>& value(ParamId id) { return params_.at(id.index).value; }
  const Tensor<T>& value(ParamId id) const { return params_.at(id.index).value; }

  // Number of scalars over trainable tensors.
  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) {
      if (trainable(p.kind)) n += p.value.size();
    }
    return n;
  }

  std::uint64_t step = 0;

  template <std::floating_point U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) out.add(p.name, p.kind, p.value.template cast<U>());
    out.step = step;
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.step != b.step || a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
      const auto& x = a.params_[i];
      const auto& y = b.params_[i];
      if (x.name != y.name || x.kind != y.kind || !(x.value == y.value)) return false;
    }
    return true;
  }

 private:
  std::vector<Parameter<T>> params_;
  std::map<std::string, std::uint32_t> by_name_;
};

// One gradient slot per parameter, aligned with the store. Empty slots mean
// zero gradient.
template <std::floating_point T>
using GradientMap = std::vector<Tensor<T>>;

// Binds store tensors into a tape lazily so only parameters that a loss
// actually touches become tape leaves.
template <std::floating_point T>
class ParamBinder {
 public:
  ParamBinder(Tape<T>& tape, ParamStore<T>& store, bool track = true)
      : tape_(tape), store_(store), vars_(store.size()), track_(track) {}

  Var operator()(ParamId id) {
    auto& v = vars_.at(id.index);
    if (!v.valid()) {
      const auto& p = store_[id];
      v = tape_.external(p.value, track_ && trainable(p.kind));
    }
    return v;
  }

  Tape<T>& tape() { return tape_; }
  ParamStore<T>& store() { return store_; }
  bool tracking() const { return track_; }

  // Gradients of the last backward pass; zero tensors for unreached entries.
  GradientMap<T> gradients() const {
    GradientMap<T> out(store_.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      const auto& p = store_.params()[i];
      if (!trainable(p.kind)) continue;
      out[i] = vars_[i].valid() ? tape_.grad(vars_[i])
                                : Tensor<T>(p.value.rows(), p.value.cols());
    }
    return out;
  }

 private:
  Tape<T>& tape_;
  ParamStore<T>& store_;
  std::vector<Var> vars_;
  bool track_;
};

}  // namespace retcl::tensor
