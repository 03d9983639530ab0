// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sparsify {

struct GradCheckResult {
  std::string name;
  double error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double tolerance = 0.0;
  bool passed = false;
};

/// Central finite-difference checks at 64-bit precision for every tape op,
/// the straight-through bound gradient, every sparsity loss and the combined
/// loss through a two-layer network. Bound gradients are differenced with the
/// mask held fixed, where the pruned weights follow w (1 - b' / b): the
/// function whose derivative the straight-through rule defines.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed = 0);

}  // namespace sparsify
