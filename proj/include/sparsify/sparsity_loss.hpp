// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

// Differentiable density losses over per-layer pruning bounds. Under a
// zero-mean Gaussian model a layer with bound b and weight spread sigma has
// sparsity erf(b / (sigma * sqrt(2))); the losses below combine those
// per-layer densities into network-level objectives.
//
// All functions here take absolute bounds and return gradients with respect
// to them. sigma is treated as a constant.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sparsify/autodiff.hpp"

namespace sparsify {
struct NetworkSpec;
}

namespace sparsify::sparsity {

enum class Variant { Avg, Weighted, BudgetQuadratic, BudgetHinge };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct SparsityObjective {
  Variant variant = Variant::Avg;
  double lambda = 1.0;      // avg / weighted
  double lambda_p = 10.0;   // budget forms, parameter term
  double lambda_f = 10.0;   // budget forms, FLOP term
  double budget_p = 1.0;    // kept fraction of parameters
  double budget_f = 1.0;    // kept fraction of FLOPs
  std::vector<double> contrib_p;
  std::vector<double> contrib_f;

  /// Checks coefficient ranges and that every contribution vector the variant
  /// reads has `layers` entries, is non-negative and sums to 1.
  void validate(std::size_t layers) const;
};

struct LayerSparsityState {
  std::vector<double> bounds;  // absolute
  std::vector<double> sigmas;

  std::size_t size() const { return bounds.size(); }
  /// erf(b_i / (sigma_i sqrt 2)); throws DegenerateError on sigma_i <= 0.
  double sparsity(std::size_t i) const;
  /// d sparsity(i) / d b_i
  double sparsity_slope(std::size_t i) const;
};

struct LossValue {
  double value = 0.0;
  std::vector<double> grad;  // d value / d bounds
};

/// 1 - (1/N) sum_i erf(b_i / (sigma_i sqrt 2))
LossValue avg_density_loss(const LayerSparsityState& state);

/// 1 - sum_i c_i erf(b_i / (sigma_i sqrt 2)) with sum c_i = 1.
LossValue weighted_density_loss(const LayerSparsityState& state,
                                std::span<const double> contrib);

/// lambda_p (D_p - B_p)^2 + lambda_f (D_f - B_f)^2, D_* weighted densities.
LossValue budget_quadratic_loss(const LayerSparsityState& state,
                                const SparsityObjective& obj);

/// lambda_p max(D_p - B_p, 0) + lambda_f max(D_f - B_f, 0). The subgradient at
/// the kink is 0.
LossValue budget_hinge_loss(const LayerSparsityState& state,
                            const SparsityObjective& obj);

/// The penalty term the objective adds to the task loss (lambda-scaled for
/// avg/weighted, the budget loss otherwise).
LossValue sparsity_penalty(const LayerSparsityState& state,
                           const SparsityObjective& obj);

enum class Resource { Params, Flops };

/// Share of each prunable layer's dense weight count (or FLOPs) in the
/// network total, in prunable-layer order.
std::vector<double> contribution_weights(const NetworkSpec& spec,
                                         Resource resource);

/// task + penalty on the tape. `bounds` are the layers' relative-bound leaves
/// (threshold = b * sigma); their gradient is sigma_i times the absolute-bound
/// gradient. Returns the total and reports the penalty value through
/// `penalty_out` when non-null.
template <typename T>
ad::Var<T> total_loss(ad::Var<T> task, std::span<const ad::Var<T>> bounds,
                      std::span<const T> sigmas, const SparsityObjective& obj,
                      double* penalty_out = nullptr);

}  // namespace sparsify::sparsity
