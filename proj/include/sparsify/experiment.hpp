// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sparsify/config.hpp"
#include "sparsify/network.hpp"
#include "sparsify/report.hpp"
#include "sparsify/train.hpp"

namespace sparsify {

struct RunOptions {
  /// Write config.json, CSVs, summary.txt and checkpoint.bin into out_dir
  /// (plus checkpoint_e<epoch>.bin every cfg.checkpoint_every epochs).
  bool write_outputs = true;
  /// Continue from this checkpoint instead of starting fresh.
  std::optional<std::filesystem::path> resume;
  /// Progress lines (one per epoch); null for silence.
  std::ostream* progress = nullptr;
};

struct RunOutcome {
  SparsityReport report;
  double test_accuracy = 0.0;
  TrainLog log;
};

/// Trains the configured architecture on `data`, dispatching on
/// cfg.precision.
RunOutcome run_experiment(const ExperimentConfig& cfg, const Dataset& data,
                          const RunOptions& options = {});

/// Same, for an explicit network (used for dense equivalents).
RunOutcome run_experiment(const ExperimentConfig& cfg, const NetworkSpec& spec,
                          const Dataset& data, const RunOptions& options = {});

/// Budget-matched comparison. For every ratio r one dense-equivalent row
/// (channels scaled by sqrt(r), trained dense) plus one row per mode at
/// density r: fixed_bs / fixed_ga with s = 1 - r, budget_quadratic /
/// budget_hinge with budget_p = r. A failing row records its error in the
/// status column and the remaining rows still run. Rows are distributed over
/// `threads` workers; the result order does not depend on it.
std::vector<TradeoffRow> tradeoff_curve(const ExperimentConfig& base,
                                        const Dataset& data,
                                        const std::vector<double>& ratios,
                                        const std::vector<std::string>& modes,
                                        unsigned threads = 1);

/// The configuration a sweep row trains with.
ExperimentConfig sweep_config(const ExperimentConfig& base, double ratio,
                              const std::string& mode);

/// Sparse (CSR) rendering of every conv/linear layer in a checkpoint.
std::vector<CsrMatrix> sparse_layers(const Checkpoint& ckpt);

/// Sparsity report and test accuracy of a checkpoint, re-evaluated on the
/// dataset its configuration names.
RunOutcome evaluate_checkpoint(const Checkpoint& ckpt, ExperimentConfig* cfg_out = nullptr);

}  // namespace sparsify
