// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sparsify {

enum class LayerKind { Linear, Conv2d, BatchNorm, Activation, Pool, ResidualAdd };

std::string to_string(LayerKind kind);

/// One node of the layer graph. Activation is ReLU, Pool is global average
/// pooling and ResidualAdd sums its two inputs.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Activation;
  std::vector<int> inputs{-1};  // producer indices; -1 is the network input
  std::size_t in_channels = 0;  // fan-in for linear layers
  std::size_t out_channels = 0; // fan-out for linear layers
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool prunable = false;
  bool has_bias = false;

  // Filled in by NetworkSpec::finalize().
  std::size_t in_h = 1, in_w = 1, out_h = 1, out_w = 1;
  std::size_t param_count = 0;
  std::size_t flop_count = 0;

  bool has_weights() const {
    return kind == LayerKind::Linear || kind == LayerKind::Conv2d;
  }
  /// Dense weight-tensor size (biases excluded); 0 for weightless layers.
  std::size_t weight_count() const;
};

struct NetworkSpec {
  std::string arch;
  std::size_t input_channels = 1;  // features for flat inputs
  std::size_t input_h = 1;
  std::size_t input_w = 1;
  std::size_t classes = 2;
  std::vector<LayerSpec> layers;  // the last layer produces the logits

  /// Infers spatial extents and channel counts of weightless layers, checks
  /// that producers and consumers agree, and computes per-layer parameter and
  /// FLOP counts. Throws ContractError / DimensionError.
  void finalize();

  std::vector<std::size_t> prunable_layers() const;
  std::size_t index_of(const std::string& name) const;
  bool image_input() const { return input_h > 1 || input_w > 1; }
};

/// Weights of conv/linear layers, their biases and batch-norm affine terms.
std::size_t count_params(const NetworkSpec& spec);

/// 2 * MACs of every conv and linear layer at full density.
std::size_t count_flops(const NetworkSpec& spec);

/// FLOPs when prunable layer i (prunable-layer order) has sparsity[i]; dense
/// layers count fully. Linear in each density.
double count_flops(const NetworkSpec& spec, std::span<const double> sparsity);

/// Marks the named layers as not prunable. Throws ContractError for unknown
/// names or weightless layers.
void exempt_layers(NetworkSpec& spec, std::span<const std::string> names);

/// Fully-connected ReLU network: in -> hidden... -> classes, biased.
NetworkSpec build_mlp(std::size_t inputs, std::span<const std::size_t> hidden,
                      std::size_t classes);

struct SmallCnnOptions {
  std::size_t in_channels = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  std::size_t conv2_stride = 2;
  std::size_t classes = 10;
};

/// conv3x3 -> relu -> conv3x3 -> relu -> global pool -> linear, biased.
NetworkSpec build_cnn_small(const SmallCnnOptions& options);

/// Pre-activation Wide ResNet WRN-depth-k: a 3x3 stem of 16 channels, three
/// groups of (depth - 4) / 6 basic blocks of widths 16k, 32k, 64k (strides
/// 1, 2, 2) with 1x1 projection shortcuts where the shape changes, a final
/// BN-ReLU, global pooling and a linear classifier. Convolutions carry no
/// bias. Throws ContractError if (depth - 4) is not a positive multiple of 6.
NetworkSpec build_wrn(std::size_t depth, std::size_t width_multiplier,
                      std::size_t classes, std::size_t in_channels = 3,
                      std::size_t height = 32, std::size_t width = 32);

}  // namespace sparsify
