// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sparsify/network_spec.hpp"

namespace sparsify {

struct ChannelMap {
  std::string layer;
  std::size_t in_channels;   // scaled
  std::size_t out_channels;  // scaled
};

struct EquivSpec {
  NetworkSpec spec;
  double ratio = 1.0;
  std::vector<ChannelMap> channels;  // one entry per conv/linear layer
};

/// Thinner network with every conv/linear width scaled to floor(sqrt(r) * C).
/// The network input channels and the class count keep their size; batch
/// norms follow the width of their producer. Throws ContractError when r is
/// outside (0, 1] or a scaled width would be 0 (the message names the layer).
EquivSpec make_dense_equivalent(const NetworkSpec& base, double ratio);

inline NetworkSpec dense_equivalent(const NetworkSpec& base, double ratio) {
  return make_dense_equivalent(base, ratio).spec;
}

/// Parameters of the conv and linear weight tensors only (no biases or BN).
std::size_t count_weight_params(const NetworkSpec& spec);

}  // namespace sparsify
