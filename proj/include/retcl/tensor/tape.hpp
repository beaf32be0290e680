#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "retcl/tensor/tensor.hpp"

namespace retcl::tensor {

template <std::floating_point T>
class Tape;

struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// vector is already topologically sorted and backward walks it once in reverse.
template <std::floating_point T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value) { return push(std::move(value), false, {}); }

  // Leaf whose gradient is tracked.
  Var variable(Tensor<T> value) { return push(std::move(value), true, {}); }

  // Leaf referring to storage owned elsewhere (parameters). The referenced
  // tensor must outlive the tape.
  Var external(const Tensor<T>& value, bool requires_grad) {
    Node node;
    node.ref = &value;
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  // Records an op result. `fn` runs during backward only if some input
  // requires a gradient, which the caller signals through `requires_grad`.
  Var record(Tensor<T> value, bool requires_grad, BackwardFn fn,
             const char* op_name) {
    if (check_finite_ && !value.all_finite()) {
      throw TensorError(TensorErrc::non_finite, std::string("output of ") + op_name);
    }
    return push(std::move(value), requires_grad, requires_grad ? std::move(fn) : BackwardFn{});
  }

  const Tensor<T>& value(Var v) const {
    const auto& n = nodes_.at(v.id);
    return n.ref ? *n.ref : n.value;
  }

  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  bool has_grad(Var v) const { return !nodes_.at(v.id).grad.empty() || value(v).empty(); }

  // Gradient of the last backward pass; zeros if the node was not reached.
  Tensor<T> grad(Var v) const {
    const auto& n = nodes_.at(v.id);
    if (!n.grad.empty()) return n.grad;
    const auto& val = value(v);
    return Tensor<T>(val.rows(), val.cols());
  }

  // Accumulation buffer for a node, allocated on first use.
  Tensor<T>& grad_buffer(std::uint32_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) {
      const auto& val = n.ref ? *n.ref : n.value;
      n.grad = Tensor<T>(val.rows(), val.cols());
    }
    return n.grad;
  }
  Tensor<T>& grad_buffer(Var v) { return grad_buffer(v.id); }

  const Tensor<T>& upstream(std::uint32_t id) const { return nodes_[id].grad; }

  void backward(Var loss) {
    const auto& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw TensorError(TensorErrc::shape_mismatch, "backward needs a scalar loss");
    }
    for (auto& n : nodes_) n.grad = Tensor<T>();
    grad_buffer(loss)(0, 0) = T{1};
    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
      auto& n = nodes_[id];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Tensor<T> value, bool requires_grad, BackwardFn fn) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  // deque keeps references returned by value() valid while nodes are appended.
  std::deque<Node> nodes_;
  bool check_finite_ = true;
};

}  // namespace retcl::tensor
