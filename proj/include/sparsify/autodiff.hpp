// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

// Reverse-mode automatic differentiation over a per-forward tape.
//
// Nodes are appended in creation order, which is already a topological order,
// so backward is a single reverse sweep. The tape is cleared after backward;
// Var handles into it are invalid afterwards. Leaf nodes created from a
// Tensor parameter forward their accumulated gradient into Tensor::grad().
//
// Convolution follows the cross-correlation convention (no kernel flip).

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sparsify/tensor.hpp"

namespace sparsify::ad {

template <typename T>
class Tape;

template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Shape& shape() const { return tape->shape(id); }
  std::span<const T> value() const { return tape->value(id); }
  std::size_t numel() const { return tape->value(id).size(); }
  T item() const { return tape->value(id)[0]; }
  bool requires_grad() const { return tape->requires_grad(id); }
};

template <typename T>
class Tape {
 public:
  /// Receives the upstream gradient of the node; accumulates into inputs via
  /// grad_buffer().
  using BackwardFn = std::function<void(Tape&, std::span<const T>)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a parameter. Its value is snapshotted; gradients reaching this
  /// node are added to param.grad() after backward when requires_grad is set.
  Var<T> leaf(Tensor<T>& param);
  Var<T> constant(const Tensor<T>& value);
  Var<T> constant(Shape shape, std::vector<T> value);

  /// Appends a computed node. It requires grad iff any input does; `fn` is
  /// dropped otherwise.
  Var<T> record(Shape shape, std::vector<T> value,
                std::vector<std::size_t> inputs, BackwardFn fn);

  const Shape& shape(std::size_t id) const { return nodes_.at(id).shape; }
  std::span<const T> value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const {
    return nodes_.at(id).requires_grad;
  }

  /// Gradient accumulator of node `id`, zero-initialized on first access.
  /// Empty when the node does not require grad.
  std::span<T> grad_buffer(std::size_t id);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, then clears it.
  /// Throws ContractError if `loss` is not a single-element node.
  void backward(Var<T> loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor<T>* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Core ops. All throw DimensionError on incompatible shapes.

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);
template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> a, T factor);
template <typename T>
Var<T> relu(Var<T> a);
/// x: [B, C, ...], bias: [C], broadcast over all other axes.
template <typename T>
Var<T> bias_add(Var<T> x, Var<T> bias);
/// x: [B, Cin, H, W], w: [Cout, Cin, kh, kw].
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, std::size_t stride, std::size_t padding);
/// [B, C, H, W] -> [B, C]
template <typename T>
Var<T> global_avg_pool(Var<T> x);
template <typename T>
Var<T> reshape(Var<T> x, Shape shape);
template <typename T>
Var<T> sum(Var<T> x);
template <typename T>
Var<T> mean(Var<T> x);
/// Mean softmax cross-entropy of logits [B, C] against integer labels.
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> labels);

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalization over every axis but 1. In training mode batch
/// statistics are used and the running estimates updated in place.
template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta,
                  std::vector<T>& running_mean, std::vector<T>& running_var,
                  const BatchNormOptions& options);

}  // namespace sparsify::ad
