// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sparsify/autodiff.hpp"
#include "sparsify/network_spec.hpp"
#include "sparsify/prune.hpp"

namespace sparsify {

struct ForwardOptions {
  bool training = true;
  /// When false, prunable layers use their raw weights.
  bool prune = true;
  prune::GradientMode gradient = prune::GradientMode::StraightThrough;
};

/// Applies a conv or linear layer with weights pruned by `p`. The bias, when
/// given, is added unpruned. Linear layers take [B, fan_in] (or [B, C, 1, 1])
/// inputs and hold their weights as [fan_in, fan_out].
template <typename T>
ad::Var<T> prunable_forward(ad::Tape<T>& tape, const LayerSpec& layer,
                            ad::Var<T> x, prune::PrunableParam<T>& p,
                            Tensor<T>* bias, const ForwardOptions& options);

/// Kind of a registered trainable tensor, which decides its optimizer
/// treatment (weight decay only applies to Weight).
enum class ParamKind { Weight, Bias, Norm, Bound };

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor;
  ParamKind kind;
};

template <typename T>
struct BufferRef {
  std::string name;
  std::vector<T>* values;
};

/// Executable network materialized from a NetworkSpec.
template <typename T>
class Network {
 public:
  /// Kaiming fan-in normal weights, zero biases, unit BN scale; all bounds 0.
  Network(NetworkSpec spec, std::mt19937_64& rng,
          prune::MeanMode mean_mode = prune::MeanMode::AssumeZero);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  const NetworkSpec& spec() const { return spec_; }

  /// Logits for a batch. `input` is [B, C, H, W] for image networks and
  /// [B, features] otherwise.
  ad::Var<T> forward(ad::Tape<T>& tape, const Tensor<T>& input,
                     const ForwardOptions& options);

  /// Prunable layers in network order.
  std::vector<prune::PrunableParam<T>*> prunable();
  std::vector<const prune::PrunableParam<T>*> prunable() const;

  /// Weight holder of layer `index` (conv/linear only).
  prune::PrunableParam<T>& layer_weights(std::size_t index);

  /// Every trainable tensor in a stable order, including the bounds of
  /// prunable layers.
  std::vector<ParamRef<T>> parameters();
  /// Non-trainable state (batch-norm running statistics).
  std::vector<BufferRef<T>> buffers();

  /// Re-derives sigma and masks of every prunable layer from the current
  /// weights and bounds without touching a tape.
  void refresh_masks();

  void set_bounds_trainable(bool on);
  void zero_grad();

 private:
  struct LayerState {
    prune::PrunableParam<T> weight;
    Tensor<T> bias;
    Tensor<T> gamma;
    Tensor<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
  };

  NetworkSpec spec_;
  std::vector<LayerState> state_;
};

struct LayerReport {
  std::string name;
  bool prunable = false;
  std::size_t weights = 0;  // dense #W
  double sparsity = 0.0;    // exact zero fraction of the pruned tensor
  double bound = 0.0;       // relative bound
  std::size_t kept_params = 0;
  double dense_flops = 0.0;
  double kept_flops = 0.0;
};

/// Attained sparsity per weighted layer plus aggregates over the prunable
/// ones. The parameter and FLOP sparsities weight each layer by its share of
/// the prunable weights and FLOPs respectively.
struct SparsityReport {
  std::vector<LayerReport> layers;
  double param_sparsity = 0.0;
  double flop_sparsity = 0.0;
  std::size_t total_params = 0;  // dense, all layers
  std::size_t kept_params = 0;   // total minus pruned weights
  double total_flops = 0.0;
  double kept_flops = 0.0;

  double param_density() const { return 1.0 - param_sparsity; }
  std::vector<double> layer_sparsity() const;
};

/// Reads the current masks; call refresh_masks() first if weights or bounds
/// changed since the last forward.
template <typename T>
SparsityReport attained_sparsity(const Network<T>& net);

}  // namespace sparsify
