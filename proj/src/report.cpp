// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/report.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sparsify/errors.hpp"

namespace sparsify {

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool append) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

bool needs_header(const std::filesystem::path& path, bool append) {
  std::error_code ec;
  return !append || !std::filesystem::exists(path, ec) ||
         std::filesystem::file_size(path, ec) == 0;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void write_convergence_csv(const std::filesystem::path& path,
                           const std::vector<StepMetrics>& steps,
                           const std::vector<std::string>& layer_names,
                           bool append) {
  const bool header = needs_header(path, append);
  auto out = open_out(path, append);
  if (header) {
    out << "iter,epoch,task_loss,sparsity_loss,param_sparsity,lr";
    for (const auto& n : layer_names) out << ",s_" << n;
    out << "\n";
  }
  for (const StepMetrics& m : steps) {
    out << m.iter << "," << m.epoch << "," << m.task_loss << "," << m.sparsity_loss
        << "," << m.param_sparsity << "," << m.lr;
    for (double s : m.layer_sparsity) out << "," << s;
    out << "\n";
  }
  finish(out, path);
}

void write_epochs_csv(const std::filesystem::path& path,
                      const std::vector<EpochSummary>& epochs, bool append) {
  const bool header = needs_header(path, append);
  auto out = open_out(path, append);
  if (header)
    out << "epoch,train_loss,train_accuracy,test_loss,test_accuracy,param_sparsity,lr\n";
  for (const EpochSummary& e : epochs)
    out << e.epoch << "," << e.train_loss << "," << e.train_accuracy << ","
        << e.test_loss << "," << e.test_accuracy << "," << e.param_sparsity << ","
        << e.lr << "\n";
  finish(out, path);
}

void write_layers_csv(const std::filesystem::path& path, const SparsityReport& r) {
  auto out = open_out(path, false);
  out << "layer,prunable,weights,sparsity,bound,kept_params,dense_flops,kept_flops\n";
  for (const LayerReport& l : r.layers)
    out << l.name << "," << (l.prunable ? 1 : 0) << "," << l.weights << ","
        << l.sparsity << "," << l.bound << "," << l.kept_params << ","
        << l.dense_flops << "," << l.kept_flops << "\n";
  finish(out, path);
}

void write_tradeoff_csv(const std::filesystem::path& path,
                        const std::vector<TradeoffRow>& rows) {
  auto out = open_out(path, false);
  out << "ratio,mode,params,density,error,status\n";
  for (const TradeoffRow& r : rows) {
    std::string status = r.status;
    for (char& ch : status)
      if (ch == ',' || ch == '\n') ch = ';';
    out << r.ratio << "," << r.mode << "," << r.params << "," << r.density << ","
        << r.error << "," << status << "\n";
  }
  finish(out, path);
}

std::string format_summary(const std::string& arch, const std::string& mode,
                           const SparsityReport& r, double test_accuracy) {
  std::ostringstream s;
  s << std::fixed;
  s << "architecture      " << arch << "\n";
  s << "mode              " << mode << "\n";
  s << "dense params      " << r.total_params << " (" << std::setprecision(3)
    << double(r.total_params) / 1e6 << "M)\n";
  s << "kept params       " << r.kept_params << " (" << std::setprecision(3)
    << double(r.kept_params) / 1e6 << "M)\n";
  s << "param sparsity    " << std::setprecision(2) << 100.0 * r.param_sparsity << "%\n";
  s << "flop sparsity     " << std::setprecision(2) << 100.0 * r.flop_sparsity << "%\n";
  s << "dense flops       " << std::setprecision(0) << r.total_flops << "\n";
  s << "kept flops        " << std::setprecision(0) << r.kept_flops << "\n";
  if (test_accuracy >= 0.0)
    s << "test accuracy     " << std::setprecision(2) << 100.0 * test_accuracy << "%\n";
  s << "\nlayer                     #W    sparsity   kept\n";
  for (const LayerReport& l : r.layers) {
    s << std::left << std::setw(20) << l.name << std::right << std::setw(12)
      << l.weights << std::setw(10) << std::setprecision(2) << 100.0 * l.sparsity
      << "%" << std::setw(11) << l.kept_params << (l.prunable ? "" : "  (exempt)")
      << "\n";
  }
  return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path, false);
  out << text;
  finish(out, path);
}

std::size_t CsrMatrix::bytes() const {
  return 4 * (row_ptr.size() + col_idx.size() + values.size());
}

CsrMatrix to_csr(const std::string& name, const Shape& shape,
                 const std::vector<double>& weights,
                 const std::vector<std::uint8_t>& pruned) {
  if (shape.empty() || numel(shape) != weights.size())
    throw ContractError("to_csr: shape does not match the weights of '" + name + "'");
  if (!pruned.empty() && pruned.size() != weights.size())
    throw ContractError("to_csr: mask length mismatch for '" + name + "'");
  CsrMatrix m;
  m.name = name;
  m.rows = static_cast<std::uint32_t>(shape[0]);
  m.cols = static_cast<std::uint32_t>(weights.size() / shape[0]);
  m.row_ptr.push_back(0);
  for (std::uint32_t r = 0; r < m.rows; ++r) {
    for (std::uint32_t c = 0; c < m.cols; ++c) {
      const std::size_t i = std::size_t(r) * m.cols + c;
      if ((!pruned.empty() && pruned[i]) || weights[i] == 0.0) continue;
      m.col_idx.push_back(c);
      m.values.push_back(static_cast<float>(weights[i]));
    }
    m.row_ptr.push_back(static_cast<std::uint32_t>(m.values.size()));
  }
  return m;
}

namespace {

void put32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 4);
}

std::uint32_t get32(std::ifstream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw IoError("sparse export " + path.string() + " is truncated");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

}  // namespace

std::size_t write_csr_file(const std::filesystem::path& path,
                           const std::vector<CsrMatrix>& layers) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("SPRSCSR1", 8);
  put32(out, static_cast<std::uint32_t>(layers.size()));
  for (const CsrMatrix& m : layers) {
    put32(out, static_cast<std::uint32_t>(m.name.size()));
    out.write(m.name.data(), static_cast<std::streamsize>(m.name.size()));
    put32(out, m.rows);
    put32(out, m.cols);
    put32(out, static_cast<std::uint32_t>(m.values.size()));
    for (auto v : m.row_ptr) put32(out, v);
    for (auto v : m.col_idx) put32(out, v);
    for (float v : m.values) put32(out, std::bit_cast<std::uint32_t>(v));
  }
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
  return static_cast<std::size_t>(out.tellp());
}

std::vector<CsrMatrix> read_csr_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, "SPRSCSR1", 8) != 0)
    throw IoError(path.string() + " is not a sparse export");
  std::vector<CsrMatrix> layers(get32(in, path));
  for (CsrMatrix& m : layers) {
    m.name.resize(get32(in, path));
    if (!in.read(m.name.data(), static_cast<std::streamsize>(m.name.size())))
      throw IoError("sparse export " + path.string() + " is truncated");
    m.rows = get32(in, path);
    m.cols = get32(in, path);
    const std::uint32_t nnz = get32(in, path);
    m.row_ptr.resize(std::size_t(m.rows) + 1);
    for (auto& v : m.row_ptr) v = get32(in, path);
    m.col_idx.resize(nnz);
    for (auto& v : m.col_idx) v = get32(in, path);
    m.values.resize(nnz);
    for (auto& v : m.values) v = std::bit_cast<float>(get32(in, path));
  }
  return layers;
}

}  // namespace sparsify
