// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/sparsity_loss.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "sparsify/errors.hpp"
#include "sparsify/network_spec.hpp"
#include "sparsify/special.hpp"

namespace sparsify::sparsity {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Avg: return "avg";
    case Variant::Weighted: return "weighted";
    case Variant::BudgetQuadratic: return "budget_quadratic";
    case Variant::BudgetHinge: return "budget_hinge";
  }
  return "avg";
}

Variant parse_variant(const std::string& name) {
  if (name == "avg") return Variant::Avg;
  if (name == "weighted") return Variant::Weighted;
  if (name == "budget_quadratic") return Variant::BudgetQuadratic;
  if (name == "budget_hinge") return Variant::BudgetHinge;
  throw ContractError("unknown sparsity loss variant '" + name + "'");
}

namespace {

constexpr double kNormTolerance = 1e-9;

void check_contrib(std::span<const double> c, std::size_t layers,
                   const char* what) {
  if (c.size() != layers)
    throw ContractError(std::string(what) + " has " + std::to_string(c.size()) +
                        " entries for " + std::to_string(layers) + " layers");
  double total = 0.0;
  for (double v : c) {
    if (!(v >= 0.0)) throw ContractError(std::string(what) + " must be non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > kNormTolerance)
    throw ContractError(std::string(what) + " must sum to 1, got " +
                        std::to_string(total));
}

bool uses_flop_term(const SparsityObjective& obj) {
  return obj.lambda_f > 0.0;
}

}  // namespace

void SparsityObjective::validate(std::size_t layers) const {
  if (layers == 0) throw ContractError("sparsity objective needs at least one layer");
  switch (variant) {
    case Variant::Avg:
      if (!(lambda >= 0.0)) throw ContractError("lambda must be non-negative");
      break;
    case Variant::Weighted:
      if (!(lambda >= 0.0)) throw ContractError("lambda must be non-negative");
      check_contrib(contrib_p, layers, "contrib_p");
      break;
    case Variant::BudgetQuadratic:
    case Variant::BudgetHinge:
      if (!(lambda_p >= 0.0 && lambda_f >= 0.0))
        throw ContractError("lambda_p and lambda_f must be non-negative");
      if (!(budget_p > 0.0 && budget_p <= 1.0))
        throw ContractError("budget_p must lie in (0, 1]");
      if (!(budget_f > 0.0 && budget_f <= 1.0))
        throw ContractError("budget_f must lie in (0, 1]");
      check_contrib(contrib_p, layers, "contrib_p");
      if (uses_flop_term(*this)) check_contrib(contrib_f, layers, "contrib_f");
      break;
  }
}

double LayerSparsityState::sparsity(std::size_t i) const {
  if (!(sigmas.at(i) > 0.0))
    throw DegenerateError("layer " + std::to_string(i) + " has sigma <= 0");
  if (!(bounds.at(i) >= 0.0))
    throw ContractError("layer " + std::to_string(i) + " has a negative bound");
  return erf_scalar(bounds[i] / (sigmas[i] * std::numbers::sqrt2));
}

double LayerSparsityState::sparsity_slope(std::size_t i) const {
  const double sigma = sigmas.at(i);
  if (!(sigma > 0.0))
    throw DegenerateError("layer " + std::to_string(i) + " has sigma <= 0");
  const double b = bounds.at(i);
  return 2.0 * std::exp(-b * b / (2.0 * sigma * sigma)) /
         (sigma * std::sqrt(2.0 * std::numbers::pi));
}

LossValue weighted_density_loss(const LayerSparsityState& state,
                                std::span<const double> contrib) {
  if (state.bounds.size() != state.sigmas.size())
    throw ContractError("layer state has mismatched bounds and sigmas");
  check_contrib(contrib, state.size(), "contribution weights");
  LossValue out;
  out.value = 1.0;
  out.grad.resize(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    out.value -= contrib[i] * state.sparsity(i);
    out.grad[i] = -contrib[i] * state.sparsity_slope(i);
  }
  return out;
}

LossValue avg_density_loss(const LayerSparsityState& state) {
  const std::vector<double> uniform(
      state.size(), state.size() ? 1.0 / static_cast<double>(state.size()) : 0.0);
  if (state.size() == 0) throw ContractError("avg_density_loss: no layers");
  return weighted_density_loss(state, uniform);
}

LossValue budget_quadratic_loss(const LayerSparsityState& state,
                                const SparsityObjective& obj) {
  obj.validate(state.size());
  LossValue out;
  out.grad.assign(state.size(), 0.0);
  auto term = [&](std::span<const double> c, double lambda, double budget) {
    const LossValue d = weighted_density_loss(state, c);
    const double gap = d.value - budget;
    out.value += lambda * gap * gap;
    for (std::size_t i = 0; i < state.size(); ++i)
      out.grad[i] += 2.0 * lambda * gap * d.grad[i];
  };
  term(obj.contrib_p, obj.lambda_p, obj.budget_p);
  if (uses_flop_term(obj)) term(obj.contrib_f, obj.lambda_f, obj.budget_f);
  return out;
}

LossValue budget_hinge_loss(const LayerSparsityState& state,
                            const SparsityObjective& obj) {
  obj.validate(state.size());
  LossValue out;
  out.grad.assign(state.size(), 0.0);
  auto term = [&](std::span<const double> c, double lambda, double budget) {
    const LossValue d = weighted_density_loss(state, c);
    if (d.value <= budget) return;
    out.value += lambda * (d.value - budget);
    for (std::size_t i = 0; i < state.size(); ++i)
      out.grad[i] += lambda * d.grad[i];
  };
  term(obj.contrib_p, obj.lambda_p, obj.budget_p);
  if (uses_flop_term(obj)) term(obj.contrib_f, obj.lambda_f, obj.budget_f);
  return out;
}

LossValue sparsity_penalty(const LayerSparsityState& state,
                           const SparsityObjective& obj) {
  switch (obj.variant) {
    case Variant::Avg:
    case Variant::Weighted: {
      obj.validate(state.size());
      LossValue d = obj.variant == Variant::Avg
                        ? avg_density_loss(state)
                        : weighted_density_loss(state, obj.contrib_p);
      d.value *= obj.lambda;
      for (double& g : d.grad) g *= obj.lambda;
      return d;
    }
    case Variant::BudgetQuadratic: return budget_quadratic_loss(state, obj);
    case Variant::BudgetHinge: return budget_hinge_loss(state, obj);
  }
  return {};
}

std::vector<double> contribution_weights(const NetworkSpec& spec,
                                         Resource resource) {
  std::vector<double> c;
  double total = 0.0;
  for (const LayerSpec& layer : spec.layers) {
    if (!layer.prunable) continue;
    const double v = resource == Resource::Params
                         ? static_cast<double>(layer.weight_count())
                         : static_cast<double>(layer.flop_count);
    c.push_back(v);
    total += v;
  }
  if (c.empty()) throw ContractError("contribution_weights: no prunable layers");
  if (!(total > 0.0))
    throw ContractError("contribution_weights: total resource is zero");
  for (double& v : c) v /= total;
  return c;
}

template <typename T>
ad::Var<T> total_loss(ad::Var<T> task, std::span<const ad::Var<T>> bounds,
                      std::span<const T> sigmas, const SparsityObjective& obj,
                      double* penalty_out) {
  if (task.numel() != 1) throw ContractError("total_loss: task loss must be scalar");
  if (bounds.size() != sigmas.size())
    throw ContractError("total_loss: one sigma per bound required");
  LayerSparsityState state;
  std::vector<std::size_t> inputs{task.id};
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (bounds[i].tape != task.tape || bounds[i].numel() != 1)
      throw ContractError("total_loss: bounds must be scalar nodes on the task tape");
    state.bounds.push_back(static_cast<double>(bounds[i].item()) *
                           static_cast<double>(sigmas[i]));
    state.sigmas.push_back(static_cast<double>(sigmas[i]));
    inputs.push_back(bounds[i].id);
  }
  const LossValue penalty = sparsity_penalty(state, obj);
  if (penalty_out) *penalty_out = penalty.value;
  std::vector<T> rel_grad(bounds.size());
  for (std::size_t i = 0; i < bounds.size(); ++i)
    rel_grad[i] = static_cast<T>(penalty.grad[i] * state.sigmas[i]);
  const T value = task.item() + static_cast<T>(penalty.value);
  return task.tape->record(
      {1}, {value}, inputs,
      [inputs, rel_grad](ad::Tape<T>& t, std::span<const T> g) {
        if (auto gt = t.grad_buffer(inputs[0]); !gt.empty()) gt[0] += g[0];
        for (std::size_t i = 1; i < inputs.size(); ++i)
          if (auto gb = t.grad_buffer(inputs[i]); !gb.empty())
            gb[0] += g[0] * rel_grad[i - 1];
      });
}

template ad::Var<float> total_loss(ad::Var<float>, std::span<const ad::Var<float>>,
                                   std::span<const float>,
                                   const SparsityObjective&, double*);
template ad::Var<double> total_loss(ad::Var<double>,
                                    std::span<const ad::Var<double>>,
                                    std::span<const double>,
                                    const SparsityObjective&, double*);

}  // namespace sparsify::sparsity
