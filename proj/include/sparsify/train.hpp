// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

// Online-pruning training loop. Every iteration prunes in the forward pass,
// back-propagates with the straight-through estimator and updates the dense
// weights, so pruned weights can come back later.
//
// Optimizer: SGD with momentum and decoupled weight decay,
//   v <- momentum * v + g
//   w <- (1 - weight_decay) * w - lr * v
// Decay applies to conv/linear weights only; bounds, biases and batch-norm
// terms are not decayed. Relative bounds are clamped to
// [0, max_relative_bound()] after each step.

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sparsify/dataset.hpp"
#include "sparsify/network.hpp"
#include "sparsify/prune.hpp"
#include "sparsify/sparsity_loss.hpp"

namespace sparsify {

enum class TrainMode { Dense, FixedBS, FixedGA, Adaptive };

std::string to_string(TrainMode mode);
/// Accepts dense, fixed_bs, fixed_ga, adaptive.
TrainMode parse_mode(const std::string& name);

struct TrainConfig {
  double lr = 0.1;
  double lr_min = 0.0;
  double momentum = 0.9;
  double weight_decay = 5e-5;  // per step, decoupled
  int epochs = 10;
  std::size_t batch_size = 64;
  int restart_period = 0;  // epochs per cosine cycle; 0 means one cycle
  TrainMode mode = TrainMode::Dense;
  prune::SparsityTarget target;            // fixed modes
  sparsity::SparsityObjective objective;   // adaptive mode
  sparsity::Resource weighting = sparsity::Resource::Params;  // weighted variant
  prune::GradientMode gradient = prune::GradientMode::StraightThrough;
  prune::MeanMode mean_mode = prune::MeanMode::AssumeZero;
  int recompute_period = 1;          // fixed modes: iterations between solves
  double bound_init_sparsity = 0.05;  // adaptive mode
  double bound_lr_scale = 1.0;        // bound learning rate = lr * scale
  int log_interval = 50;
  std::uint64_t seed = 0;

  /// Throws ValidationError naming the offending key (e.g. "train.lr").
  void validate() const;
};

/// lr_min + (lr_max - lr_min) (1 + cos(pi t)) / 2 with
/// t = (iter mod iters_per_restart) / iters_per_restart.
double cosine_lr(std::size_t iter, std::size_t iters_per_restart, double lr_max,
                 double lr_min);

struct StepMetrics {
  std::size_t epoch = 0;
  std::size_t iter = 0;
  double task_loss = 0.0;
  double sparsity_loss = 0.0;
  double param_sparsity = 0.0;
  std::vector<double> layer_sparsity;
  double lr = 0.0;
};

struct EpochSummary {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double param_sparsity = 0.0;
  double lr = 0.0;
};

/// Everything besides the network needed to continue a run.
template <typename T>
struct TrainState {
  std::size_t epoch = 0;      // completed epochs
  std::size_t iteration = 0;  // completed steps
  std::vector<std::vector<T>> velocity;  // parallel to Network::parameters()
  std::mt19937_64 rng;
};

/// Zero momentum buffers and a shuffling stream derived from cfg.seed.
template <typename T>
TrainState<T> make_train_state(Network<T>& net, const TrainConfig& cfg);

/// Sets bounds for the mode: adaptive starts every layer at
/// sqrt(2) erfinv(bound_init_sparsity) and makes the bounds trainable; the
/// other modes freeze them (dense at 0, fixed modes at the solved value).
template <typename T>
void initialize_bounds(Network<T>& net, const TrainConfig& cfg);

/// Fixed modes: sets each prunable layer's bound for cfg.target from its
/// current weights (binary search or Gaussian rule). Dense: bounds 0.
template <typename T>
void solve_fixed_bounds(Network<T>& net, const TrainConfig& cfg);

/// One forward / backward / update on a batch. Throws DivergenceError on a
/// non-finite loss.
template <typename T>
StepMetrics train_step(Network<T>& net, TrainState<T>& state,
                       const Batch<T>& batch, const TrainConfig& cfg, double lr);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Inference-mode loss and accuracy over a whole split.
template <typename T>
Evaluation evaluate(Network<T>& net, const Dataset& data, bool train_split,
                    std::size_t batch_size = 256);

struct TrainLog {
  std::vector<StepMetrics> steps;    // every log_interval iterations
  std::vector<EpochSummary> epochs;
};

struct TrainCallbacks {
  std::function<void(const StepMetrics&)> on_step;
  std::function<void(const EpochSummary&)> on_epoch;
};

/// Trains from state.epoch up to cfg.epochs. `after_epoch` runs after each
/// completed epoch (checkpointing hook).
template <typename T>
TrainLog train(Network<T>& net, const Dataset& data, const TrainConfig& cfg,
               TrainState<T>& state, const TrainCallbacks& callbacks = {},
               const std::function<void(const TrainState<T>&)>& after_epoch = {});

/// Steps per epoch for a split of n samples (batches smaller than 2 are
/// skipped so batch statistics stay defined).
std::size_t iterations_per_epoch(std::size_t n, std::size_t batch_size);

}  // namespace sparsify
