// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

// Experiment configuration: a JSON document with the sections below. Every
// key is optional unless noted; unknown keys are rejected by dotted name.
//
//   seed, precision (32 | 64), mode (dense | fixed_bs | fixed_ga | adaptive)
//   dataset   kind (two_gaussians | rings | patterns | manifest), path,
//             train_size, test_size, noise, separation, dims, classes,
//             image_shape [C, H, W], seed
//   arch      kind (mlp | cnn-small | wrn-<depth>-<k>), hidden [..],
//             conv1, conv2, conv2_stride, exempt [layer names]
//   train     lr, lr_min, momentum, weight_decay, epochs, batch_size,
//             restart_period, recompute_period, log_interval, gradient
//             (ste | masked), mean_mode (assume_zero | center),
//             bound_init_sparsity, bound_lr_scale
//   target    s (required by the fixed modes), epsilon, max_iters
//   objective variant (required by adaptive: avg | weighted |
//             budget_quadratic | budget_hinge), lambda, lambda_p, lambda_f,
//             budget_p (required by the budget variants), budget_f,
//             weighting (params | flops)
//   output    dir, checkpoint_every (epochs between checkpoint_e<N>.bin
//             files; 0 writes only the final checkpoint.bin)
//
// lambda_f defaults to 0 unless budget_f is given.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sparsify/dataset.hpp"
#include "sparsify/network_spec.hpp"
#include "sparsify/train.hpp"

namespace sparsify {

struct DatasetConfig {
  std::string kind = "two_gaussians";
  std::string path;
  std::size_t train_size = 1000;
  std::size_t test_size = 1000;
  double noise = 1.0;
  double separation = 2.0;
  std::size_t dims = 2;
  std::size_t classes = 4;
  std::vector<std::size_t> image_shape;
  std::optional<std::uint64_t> seed;  // defaults to the experiment seed
};

struct ArchConfig {
  std::string kind = "mlp";
  std::vector<std::size_t> hidden{64, 64};
  std::size_t conv1 = 16;
  std::size_t conv2 = 32;
  std::size_t conv2_stride = 2;
  std::vector<std::string> exempt;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int precision = 32;
  TrainConfig train;
  DatasetConfig dataset;
  ArchConfig arch;
  std::string out_dir = "out";
  int checkpoint_every = 0;
  bool has_target = false;
  bool has_objective = false;

  /// Cross-field checks; throws ValidationError naming the key.
  void validate() const;
};

/// Throws ConfigSyntaxError (with line and column), UnknownKeyError or
/// ValidationError.
ExperimentConfig parse_config_text(const std::string& text);
/// As above; an unreadable file is an IoError.
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Complete JSON rendering with every default filled in. Parsing it yields
/// the same configuration.
std::string to_json(const ExperimentConfig& cfg);

/// Writes to_json(cfg) to <dir>/config.json.
void write_config_echo(const ExperimentConfig& cfg, const std::filesystem::path& dir);

Dataset load_dataset(const ExperimentConfig& cfg);

/// Architecture for the dataset's input and class count, with exemptions
/// applied.
NetworkSpec build_network_spec(const ArchConfig& arch, const Dataset& data);

}  // namespace sparsify
