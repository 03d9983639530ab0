// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparsify/kernels.hpp"
#include "sparsify/log.hpp"

namespace sparsify::prune {

void SparsityTarget::validate() const {
  if (!(s >= 0.0 && s < 1.0))
    throw ContractError("sparsity target must lie in [0, 1), got " +
                        std::to_string(s));
  if (!(epsilon > 0.0))
    throw ContractError("approximation margin must be positive");
  if (!(s + epsilon < 1.0))
    throw ContractError("sparsity target plus margin must stay below 1");
  if (max_iters <= 0) throw ContractError("max_iters must be positive");
}

template <typename T>
std::size_t PrunableParam<T>::pruned_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

template <typename T>
double PrunableParam<T>::attained_sparsity() const {
  if (mask.empty()) return 0.0;
  return static_cast<double>(pruned_count()) / static_cast<double>(mask.size());
}

template <typename T>
Tensor<T> hard_shrink(const Tensor<T>& w, T b) {
  if (!(b >= T(0)))
    throw ContractError("hard_shrink: bound must be non-negative");
  Tensor<T> out(w.shape());
  std::vector<std::uint8_t> mask(w.size());
  kernels::active<T>().hard_shrink(w.size(), w.values().data(), T(0), b,
                                   out.values().data(), mask.data());
  return out;
}

template <typename T>
BoundSolution solve_bound_binary_search(std::span<const T> weights,
                                        const SparsityTarget& target,
                                        T center) {
  target.validate();
  if (weights.empty())
    throw ContractError("solve_bound_binary_search: empty weight tensor");
  const auto& kt = kernels::active<T>();
  const double n = static_cast<double>(weights.size());

  BoundSolution best;
  best.residual = target.s;
  if (target.s == 0.0) {
    best.converged = true;
    return best;
  }

  double spread = 0.0;
  for (T w : weights)
    spread = std::max(spread, std::abs(static_cast<double>(w - center)));
  double lo = 0.0;
  double hi = spread * (1.0 + 1e-6);
  if (hi == 0.0) return best;

  for (int it = 1; it <= target.max_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double attained =
        static_cast<double>(kt.count_below(weights.size(), weights.data(),
                                           center, static_cast<T>(mid))) /
        n;
    const double residual = std::abs(attained - target.s);
    if (residual < best.residual ||
        (residual == best.residual && attained < best.attained)) {
      best.bound = mid;
      best.attained = attained;
      best.residual = residual;
    }
    best.iterations = it;
    if (residual < target.epsilon) {
      best = {mid, attained, residual, it, true};
      return best;
    }
    if (attained < target.s)
      lo = mid;
    else
      hi = mid;
  }
  return best;
}

double solve_bound_gaussian(double sigma, double s) {
  if (!(s >= 0.0 && s < 1.0))
    throw ContractError("solve_bound_gaussian: sparsity must lie in [0, 1)");
  if (!(sigma > 0.0))
    throw DegenerateError("solve_bound_gaussian: sigma must be positive");
  return sigma * std::sqrt(2.0) * erf_inv_scalar(s);
}

double sparsity_of_bound(double b, double sigma) {
  if (!(b >= 0.0))
    throw ContractError("sparsity_of_bound: bound must be non-negative");
  if (!(sigma > 0.0))
    throw DegenerateError("sparsity_of_bound: sigma must be positive");
  return erf_scalar(b / (sigma * std::sqrt(2.0)));
}

template <typename T>
void refresh_statistics(PrunableParam<T>& p) {
  const auto mv = kernels::active<T>().mean_var(p.weights.size(),
                                                p.weights.values().data());
  p.mean = static_cast<T>(mv.mean);
  p.sigma = static_cast<T>(std::sqrt(mv.variance));
}

template <typename T>
Tensor<T> ste_prune_forward(PrunableParam<T>& p) {
  if (!(p.bound[0] >= T(0)))
    throw ContractError("prune '" + p.name + "': bound must be non-negative");
  refresh_statistics(p);
  p.mask.assign(p.weights.size(), 0);
  if (p.sigma == T(0)) {
    warn("layer '" + p.name +
         "' has identical weights (sigma = 0); passing through unpruned");
    return Tensor<T>(p.weights.shape(), p.weights.storage());
  }
  Tensor<T> out(p.weights.shape());
  kernels::active<T>().hard_shrink(p.weights.size(), p.weights.values().data(),
                                   p.center(), p.threshold(),
                                   out.values().data(), p.mask.data());
  return out;
}

template <typename T>
PruneGrads<T> ste_prune_backward(std::span<const T> upstream,
                                 const PrunableParam<T>& p) {
  if (upstream.size() != p.weights.size() || p.mask.size() != p.weights.size())
    throw DimensionError("ste_prune_backward: gradient/mask/weights disagree");
  PruneGrads<T> grads;
  grads.weights.assign(upstream.begin(), upstream.end());
  const double b = p.relative_bound();
  if (b > 0.0) {
    const auto w = p.weights.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < upstream.size(); ++i)
      if (p.mask[i]) acc += -static_cast<double>(w[i]) / b * upstream[i];
    grads.bound = static_cast<T>(acc);
  }
  return grads;
}

template <typename T>
ad::Var<T> prune(ad::Tape<T>& tape, PrunableParam<T>& p, GradientMode mode) {
  const auto w = tape.leaf(p.weights);
  const auto b = tape.leaf(p.bound);
  Tensor<T> pruned = ste_prune_forward(p);
  const std::size_t iw = w.id, ib = b.id;
  PrunableParam<T>* param = &p;
  return tape.record(
      p.weights.shape(), std::move(pruned.storage()), {iw, ib},
      [=](ad::Tape<T>& t, std::span<const T> g) {
        auto gw = t.grad_buffer(iw);
        if (mode == GradientMode::Masked) {
          for (std::size_t i = 0; i < gw.size(); ++i)
            if (!param->mask[i]) gw[i] += g[i];
          return;
        }
        const PruneGrads<T> grads = ste_prune_backward(g, *param);
        for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += grads.weights[i];
        if (auto gb = t.grad_buffer(ib); !gb.empty()) gb[0] += grads.bound;
      });
}

#define SPARSIFY_INSTANTIATE_PRUNE(T)                                         \
  template struct PrunableParam<T>;                                           \
  template Tensor<T> hard_shrink(const Tensor<T>&, T);                        \
  template BoundSolution solve_bound_binary_search(                           \
      std::span<const T>, const SparsityTarget&, T);                          \
  template void refresh_statistics(PrunableParam<T>&);                        \
  template Tensor<T> ste_prune_forward(PrunableParam<T>&);                    \
  template PruneGrads<T> ste_prune_backward(std::span<const T>,               \
                                            const PrunableParam<T>&);         \
  template ad::Var<T> prune(ad::Tape<T>&, PrunableParam<T>&, GradientMode);

SPARSIFY_INSTANTIATE_PRUNE(float)
SPARSIFY_INSTANTIATE_PRUNE(double)

#undef SPARSIFY_INSTANTIATE_PRUNE

}  // namespace sparsify::prune
