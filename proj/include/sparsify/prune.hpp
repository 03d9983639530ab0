// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

// Magnitude pruning: the hard-shrink rule, bound solvers for a requested
// sparsity, and the straight-through pruning op used during training.
//
// A layer's bound is stored relative to the standard deviation of its
// weights: a weight is pruned when |w - mu| < bound * sigma. This makes the
// fixed-mode Gaussian bound a constant (sqrt(2) * erfinv(s)) and keeps a
// trainable bound on a scale-free footing.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparsify/autodiff.hpp"
#include "sparsify/special.hpp"
#include "sparsify/tensor.hpp"

namespace sparsify::prune {

enum class MeanMode { AssumeZero, Center };

/// Requested layer sparsity s with approximation margin epsilon.
struct SparsityTarget {
  double s = 0.0;
  double epsilon = 1e-3;
  int max_iters = 50;

  /// Throws ContractError unless 0 <= s, epsilon > 0, s + epsilon < 1 and
  /// max_iters > 0.
  void validate() const;
};

/// Largest relative bound the optimizer may reach; sparsity_of_bound at this
/// value is 0.9999.
inline double max_relative_bound() { return std::sqrt(2.0) * erf_inv_scalar(0.9999); }

template <typename T>
struct PrunableParam {
  std::string name;
  Tensor<T> weights;
  Tensor<T> bound{Shape{1}};  // relative to sigma
  T sigma = T(0);
  T mean = T(0);
  std::vector<std::uint8_t> mask;  // 1 where pruned
  MeanMode mean_mode = MeanMode::AssumeZero;

  double relative_bound() const { return static_cast<double>(bound[0]); }
  T center() const { return mean_mode == MeanMode::Center ? mean : T(0); }
  T threshold() const { return bound[0] * sigma; }
  std::size_t pruned_count() const;
  double attained_sparsity() const;
};

/// out[i] = 0 if |w[i]| < b else w[i]. Entries with |w| == b are kept.
template <typename T>
Tensor<T> hard_shrink(const Tensor<T>& w, T b);

struct BoundSolution {
  double bound = 0.0;      // absolute threshold
  double attained = 0.0;   // #{|w - center| < bound} / #W
  double residual = 0.0;   // |attained - s|
  int iterations = 0;
  bool converged = false;  // residual < epsilon
};

/// Bisection on [0, max|w|(1 + 1e-6)] for a bound whose pruned fraction is
/// within epsilon of s. When no bound qualifies within max_iters (ties), the
/// closest one is returned with converged = false, preferring the lower
/// attained sparsity among equally close candidates.
template <typename T>
BoundSolution solve_bound_binary_search(std::span<const T> weights,
                                        const SparsityTarget& target,
                                        T center = T(0));

/// b = sigma * sqrt(2) * erfinv(s).
double solve_bound_gaussian(double sigma, double s);

/// s = erf(b / (sigma * sqrt(2))).
double sparsity_of_bound(double b, double sigma);

/// Recomputes sigma (population std) and mean from the live weights.
template <typename T>
void refresh_statistics(PrunableParam<T>& p);

/// Refreshes sigma, applies hard-shrink at bound * sigma around the centre and
/// updates the mask. With sigma == 0 the weights pass through unpruned and a
/// warning is emitted.
template <typename T>
Tensor<T> ste_prune_forward(PrunableParam<T>& p);

template <typename T>
struct PruneGrads {
  std::vector<T> weights;
  T bound = T(0);
};

/// Straight-through gradients: d(loss)/dW is the upstream gradient unchanged,
/// d(loss)/db = sum over pruned i of (-w_i / b) * g_i, and 0 when b == 0.
template <typename T>
PruneGrads<T> ste_prune_backward(std::span<const T> upstream,
                                 const PrunableParam<T>& p);

enum class GradientMode {
  StraightThrough,
  // Back-propagates through the hard threshold itself: pruned weights get no
  // gradient and the bound none either.
  Masked,
};

/// Tape op producing the pruned weight tensor from p.weights and p.bound
/// (both registered as leaves). The bound receives gradient only when
/// p.bound.requires_grad() is set.
template <typename T>
ad::Var<T> prune(ad::Tape<T>& tape, PrunableParam<T>& p, GradientMode mode);

}  // namespace sparsify::prune
