// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/equiv.hpp"

#include <cmath>

#include "sparsify/errors.hpp"

namespace sparsify {

EquivSpec make_dense_equivalent(const NetworkSpec& base, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw ContractError("compression ratio must lie in (0, 1], got " +
                        std::to_string(ratio));
  const double f = std::sqrt(ratio);
  auto scaled = [&](std::size_t c, const std::string& layer) {
    // The epsilon keeps exact squares (r = 0.25 -> 0.5 C) from flooring down.
    const auto v = static_cast<std::size_t>(std::floor(f * double(c) + 1e-9));
    if (v == 0)
      throw ContractError("ratio " + std::to_string(ratio) + " leaves layer '" +
                          layer + "' with no channels");
    return v;
  };

  EquivSpec out;
  out.ratio = ratio;
  out.spec = base;
  out.spec.arch = base.arch + "-equiv";
  const std::size_t last = base.layers.size() - 1;
  for (std::size_t i = 0; i < out.spec.layers.size(); ++i) {
    LayerSpec& l = out.spec.layers[i];
    if (!l.has_weights()) continue;
    if (l.inputs.front() >= 0) l.in_channels = scaled(l.in_channels, l.name);
    if (i != last) l.out_channels = scaled(l.out_channels, l.name);
    out.channels.push_back({l.name, l.in_channels, l.out_channels});
  }
  out.spec.finalize();
  return out;
}

std::size_t count_weight_params(const NetworkSpec& spec) {
  std::size_t total = 0;
  for (const LayerSpec& l : spec.layers) total += l.weight_count();
  return total;
}

}  // namespace sparsify
