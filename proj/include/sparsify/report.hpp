// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sparsify/checkpoint.hpp"
#include "sparsify/network.hpp"
#include "sparsify/train.hpp"

namespace sparsify {

/// iter,epoch,task_loss,sparsity_loss,param_sparsity,lr,s_<layer>...
void write_convergence_csv(const std::filesystem::path& path,
                           const std::vector<StepMetrics>& steps,
                           const std::vector<std::string>& layer_names,
                           bool append = false);

/// epoch,train_loss,train_accuracy,test_loss,test_accuracy,param_sparsity,lr
void write_epochs_csv(const std::filesystem::path& path,
                      const std::vector<EpochSummary>& epochs, bool append = false);

/// layer,prunable,weights,sparsity,bound,kept_params,dense_flops,kept_flops
void write_layers_csv(const std::filesystem::path& path, const SparsityReport& r);

struct TradeoffRow {
  double ratio = 1.0;
  std::string mode;
  std::size_t params = 0;  // kept parameters of the trained model
  double density = 1.0;    // kept fraction of prunable weights
  double error = 1.0;      // test error
  std::string status = "ok";
};

/// ratio,mode,params,density,error,status
void write_tradeoff_csv(const std::filesystem::path& path,
                        const std::vector<TradeoffRow>& rows);

/// Table-style text: architecture, dense and kept parameters, sparsity, FLOPs
/// and accuracy.
std::string format_summary(const std::string& arch, const std::string& mode,
                           const SparsityReport& r, double test_accuracy);

void write_text(const std::filesystem::path& path, const std::string& text);

/// One pruned layer in compressed-sparse-row form. Rows follow the leading
/// weight dimension (output channels for convolutions, fan-in for linear).
struct CsrMatrix {
  std::string name;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint32_t> row_ptr;  // rows + 1
  std::vector<std::uint32_t> col_idx;
  std::vector<float> values;

  std::size_t bytes() const;
};

/// Weights that survive the mask (mask bit clear) of every conv/linear
/// layer; exempt layers are exported with all entries.
CsrMatrix to_csr(const std::string& name, const Shape& shape,
                 const std::vector<double>& weights,
                 const std::vector<std::uint8_t>& pruned);

/// File layout: "SPRSCSR1", u32 layer count, then per layer the name
/// (u32 length + bytes), rows, cols, nnz, row_ptr, col_idx (u32 each) and
/// values (f32). Returns the file size.
std::size_t write_csr_file(const std::filesystem::path& path,
                           const std::vector<CsrMatrix>& layers);
std::vector<CsrMatrix> read_csr_file(const std::filesystem::path& path);

}  // namespace sparsify
