// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sparsify/errors.hpp"
#include "sparsify/kernels.hpp"

namespace sparsify {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Dense: return "dense";
    case TrainMode::FixedBS: return "fixed_bs";
    case TrainMode::FixedGA: return "fixed_ga";
    case TrainMode::Adaptive: return "adaptive";
  }
  return "dense";
}

TrainMode parse_mode(const std::string& name) {
  if (name == "dense") return TrainMode::Dense;
  if (name == "fixed_bs") return TrainMode::FixedBS;
  if (name == "fixed_ga") return TrainMode::FixedGA;
  if (name == "adaptive") return TrainMode::Adaptive;
  throw ValidationError("mode", "unknown mode '" + name +
                                    "' (dense, fixed_bs, fixed_ga, adaptive)");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr))
    throw ValidationError("train.lr", "must be finite and non-negative");
  if (!(lr_min >= 0.0 && lr_min <= lr))
    throw ValidationError("train.lr_min", "must lie in [0, train.lr]");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ValidationError("train.momentum", "must lie in [0, 1)");
  if (!(weight_decay >= 0.0 && weight_decay < 1.0))
    throw ValidationError("train.weight_decay", "must lie in [0, 1)");
  if (epochs <= 0) throw ValidationError("train.epochs", "must be positive");
  if (batch_size < 2) throw ValidationError("train.batch_size", "must be at least 2");
  if (restart_period < 0)
    throw ValidationError("train.restart_period", "must be non-negative");
  if (recompute_period <= 0)
    throw ValidationError("train.recompute_period", "must be positive");
  if (log_interval <= 0) throw ValidationError("train.log_interval", "must be positive");
  if (!(bound_lr_scale >= 0.0))
    throw ValidationError("train.bound_lr_scale", "must be non-negative");
  if (mode == TrainMode::FixedBS || mode == TrainMode::FixedGA) {
    if (!(target.s >= 0.0 && target.s < 1.0))
      throw ValidationError("target.s", "must lie in [0, 1)");
    if (!(target.epsilon > 0.0) || target.s + target.epsilon >= 1.0)
      throw ValidationError("target.epsilon", "must be positive with s + epsilon < 1");
    if (target.max_iters <= 0)
      throw ValidationError("target.max_iters", "must be positive");
  }
  if (mode == TrainMode::Adaptive) {
    if (!(bound_init_sparsity >= 0.0 && bound_init_sparsity < 0.9999))
      throw ValidationError("train.bound_init_sparsity", "must lie in [0, 0.9999)");
    const auto& o = objective;
    if (!(o.lambda >= 0.0)) throw ValidationError("objective.lambda", "must be non-negative");
    if (!(o.lambda_p >= 0.0))
      throw ValidationError("objective.lambda_p", "must be non-negative");
    if (!(o.lambda_f >= 0.0))
      throw ValidationError("objective.lambda_f", "must be non-negative");
    if (!(o.budget_p > 0.0 && o.budget_p <= 1.0))
      throw ValidationError("objective.budget_p", "must lie in (0, 1]");
    if (!(o.budget_f > 0.0 && o.budget_f <= 1.0))
      throw ValidationError("objective.budget_f", "must lie in (0, 1]");
  }
}

double cosine_lr(std::size_t iter, std::size_t iters_per_restart, double lr_max,
                 double lr_min) {
  if (iters_per_restart == 0)
    throw ContractError("cosine_lr: iters_per_restart must be positive");
  const double t = static_cast<double>(iter % iters_per_restart) /
                   static_cast<double>(iters_per_restart);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

std::size_t iterations_per_epoch(std::size_t n, std::size_t batch_size) {
  std::size_t it = n / batch_size;
  if (n % batch_size >= 2) ++it;
  return it;
}

namespace {

bool is_fixed(TrainMode m) {
  return m == TrainMode::FixedBS || m == TrainMode::FixedGA;
}

sparsity::SparsityObjective prepared_objective(const NetworkSpec& spec,
                                               const TrainConfig& cfg) {
  sparsity::SparsityObjective o = cfg.objective;
  using sparsity::Resource;
  using sparsity::Variant;
  if (o.contrib_p.empty() && o.variant != Variant::Avg)
    o.contrib_p = sparsity::contribution_weights(
        spec, o.variant == Variant::Weighted ? cfg.weighting : Resource::Params);
  if (o.contrib_f.empty() && o.lambda_f > 0.0 &&
      (o.variant == Variant::BudgetQuadratic || o.variant == Variant::BudgetHinge))
    o.contrib_f = sparsity::contribution_weights(spec, Resource::Flops);
  return o;
}

}  // namespace

template <typename T>
TrainState<T> make_train_state(Network<T>& net, const TrainConfig& cfg) {
  TrainState<T> s;
  for (const auto& ref : net.parameters())
    s.velocity.emplace_back(ref.tensor->size(), T(0));
  s.rng.seed(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  return s;
}

template <typename T>
void solve_fixed_bounds(Network<T>& net, const TrainConfig& cfg) {
  for (auto* p : net.prunable()) {
    prune::refresh_statistics(*p);
    double rel = 0.0;
    if (cfg.mode == TrainMode::FixedGA) {
      rel = prune::solve_bound_gaussian(1.0, cfg.target.s);
    } else if (cfg.mode == TrainMode::FixedBS && p->sigma > T(0)) {
      const auto sol = prune::solve_bound_binary_search<T>(
          p->weights.values(), cfg.target, p->center());
      rel = sol.bound / static_cast<double>(p->sigma);
    }
    p->bound[0] = static_cast<T>(rel);
  }
}

template <typename T>
void initialize_bounds(Network<T>& net, const TrainConfig& cfg) {
  if (cfg.mode == TrainMode::Adaptive) {
    const T b = static_cast<T>(std::numbers::sqrt2 *
                               erf_inv_scalar(cfg.bound_init_sparsity));
    for (auto* p : net.prunable()) p->bound[0] = b;
    net.set_bounds_trainable(true);
  } else {
    net.set_bounds_trainable(false);
    solve_fixed_bounds(net, cfg);
  }
  for (auto* p : net.prunable()) p->mean_mode = cfg.mean_mode;
  net.refresh_masks();
}

template <typename T>
StepMetrics train_step(Network<T>& net, TrainState<T>& state,
                       const Batch<T>& batch, const TrainConfig& cfg, double lr) {
  if (is_fixed(cfg.mode) || cfg.mode == TrainMode::Dense) {
    if (state.iteration % static_cast<std::size_t>(cfg.recompute_period) == 0)
      solve_fixed_bounds(net, cfg);
  }
  net.zero_grad();
  ad::Tape<T> tape;
  ForwardOptions fo;
  fo.training = true;
  fo.gradient = cfg.gradient;
  const ad::Var<T> logits = net.forward(tape, batch.x, fo);
  const ad::Var<T> task = ad::cross_entropy(logits, std::span<const int>(batch.y));
  StepMetrics m;
  m.iter = state.iteration;
  m.epoch = state.epoch;
  m.lr = lr;
  m.task_loss = static_cast<double>(task.item());
  if (!std::isfinite(m.task_loss))
    throw DivergenceError("non-finite task loss at iteration " +
                          std::to_string(state.iteration) + " (epoch " +
                          std::to_string(state.epoch + 1) + ")");

  if (cfg.mode == TrainMode::Adaptive) {
    const auto obj = prepared_objective(net.spec(), cfg);
    std::vector<ad::Var<T>> bounds;
    std::vector<T> sigmas;
    for (auto* p : net.prunable()) {
      bounds.push_back(tape.leaf(p->bound));
      // A layer with constant weights has no spread; any positive value keeps
      // the density well-defined (its pruned set is empty either way).
      sigmas.push_back(p->sigma > T(0) ? p->sigma : T(1));
    }
    double penalty = 0.0;
    const ad::Var<T> total = sparsity::total_loss<T>(
        task, std::span<const ad::Var<T>>(bounds), std::span<const T>(sigmas), obj,
        &penalty);
    m.sparsity_loss = penalty;
    if (!std::isfinite(static_cast<double>(total.item())))
      throw DivergenceError("non-finite total loss at iteration " +
                            std::to_string(state.iteration));
    tape.backward(total);
  } else {
    tape.backward(task);
  }

  const auto& k = kernels::active<T>();
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& t = *params[i].tensor;
    if (!t.requires_grad() || !t.has_grad()) continue;
    for (T g : t.grad())
      if (!std::isfinite(static_cast<double>(g)))
        throw DivergenceError("non-finite gradient for '" + params[i].name +
                              "' at iteration " + std::to_string(state.iteration));
    const bool bound = params[i].kind == ParamKind::Bound;
    const T step_lr = static_cast<T>(bound ? lr * cfg.bound_lr_scale : lr);
    const T decay =
        static_cast<T>(params[i].kind == ParamKind::Weight ? cfg.weight_decay : 0.0);
    k.sgd_update(t.size(), t.values().data(), t.grad().data(),
                 state.velocity[i].data(), step_lr, static_cast<T>(cfg.momentum),
                 decay);
    if (bound)
      t[0] = std::clamp(t[0], T(0), static_cast<T>(prune::max_relative_bound()));
  }
  ++state.iteration;
  return m;
}

template <typename T>
Evaluation evaluate(Network<T>& net, const Dataset& data, bool train_split,
                    std::size_t batch_size) {
  const std::size_t n = train_split ? data.train_size() : data.test_size();
  if (n == 0) throw ContractError("evaluate: empty split");
  ForwardOptions fo;
  fo.training = false;
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch<T> b = gather<T>(data, train_split, idx);
    ad::Tape<T> tape;
    const ad::Var<T> logits = net.forward(tape, b.x, fo);
    const ad::Var<T> ce = ad::cross_entropy(logits, std::span<const int>(b.y));
    loss += static_cast<double>(ce.item()) * double(idx.size());
    const auto v = logits.value();
    const std::size_t c = logits.shape()[1];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = v.subspan(i * c, c);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      if (best == b.y[i]) ++correct;
    }
  }
  return {loss / double(n), double(correct) / double(n)};
}

template <typename T>
TrainLog train(Network<T>& net, const Dataset& data, const TrainConfig& cfg,
               TrainState<T>& state, const TrainCallbacks& callbacks,
               const std::function<void(const TrainState<T>&)>& after_epoch) {
  cfg.validate();
  const std::size_t n = data.train_size();
  const std::size_t per_epoch = iterations_per_epoch(n, cfg.batch_size);
  if (per_epoch == 0) throw ContractError("training split smaller than two samples");
  const std::size_t cycle_epochs =
      cfg.restart_period > 0 ? std::size_t(cfg.restart_period) : std::size_t(cfg.epochs);
  const std::size_t per_restart = cycle_epochs * per_epoch;

  TrainLog log;
  std::vector<std::size_t> order(n);
  while (state.epoch < static_cast<std::size_t>(cfg.epochs)) {
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::shuffle(order.begin(), order.end(), state.rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    double lr = cfg.lr;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t start = b * cfg.batch_size;
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Batch<T> batch = gather<T>(data, true, idx);
      lr = cosine_lr(state.iteration, per_restart, cfg.lr, cfg.lr_min);
      StepMetrics m = train_step(net, state, batch, cfg, lr);
      loss_sum += m.task_loss * double(idx.size());
      seen += idx.size();
      if (m.iter % static_cast<std::size_t>(cfg.log_interval) == 0 ||
          b + 1 == per_epoch) {
        const SparsityReport r = attained_sparsity(net);
        m.param_sparsity = r.param_sparsity;
        m.layer_sparsity = r.layer_sparsity();
        if (callbacks.on_step) callbacks.on_step(m);
        log.steps.push_back(std::move(m));
      }
    }
    ++state.epoch;
    EpochSummary e;
    e.epoch = state.epoch;
    e.train_loss = loss_sum / double(seen);
    e.lr = lr;
    const Evaluation tr = evaluate(net, data, true);
    const Evaluation te = evaluate(net, data, false);
    e.train_accuracy = tr.accuracy;
    e.test_loss = te.loss;
    e.test_accuracy = te.accuracy;
    e.param_sparsity = attained_sparsity(net).param_sparsity;
    if (callbacks.on_epoch) callbacks.on_epoch(e);
    log.epochs.push_back(e);
    if (after_epoch) after_epoch(state);
  }
  return log;
}

#define SPARSIFY_INSTANTIATE_TRAIN(T)                                          \
  template TrainState<T> make_train_state(Network<T>&, const TrainConfig&);    \
  template void solve_fixed_bounds(Network<T>&, const TrainConfig&);           \
  template void initialize_bounds(Network<T>&, const TrainConfig&);            \
  template StepMetrics train_step(Network<T>&, TrainState<T>&,                 \
                                  const Batch<T>&, const TrainConfig&, double); \
  template Evaluation evaluate(Network<T>&, const Dataset&, bool, std::size_t); \
  template TrainLog train(Network<T>&, const Dataset&, const TrainConfig&,     \
                          TrainState<T>&, const TrainCallbacks&,               \
                          const std::function<void(const TrainState<T>&)>&);

SPARSIFY_INSTANTIATE_TRAIN(float)
SPARSIFY_INSTANTIATE_TRAIN(double)

#undef SPARSIFY_INSTANTIATE_TRAIN

}  // namespace sparsify
