// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

// sparsify: experiment runner.
//
//   sparsify run <config.json> [--resume <checkpoint>]
//   sparsify sweep <config.json> --ratios 0.5,0.25,0.1 [--modes fixed_bs,...]
//   sparsify report <checkpoint>
//   sparsify export-sparse <checkpoint>
//   sparsify gradcheck
//
// Common flags: --seed, --out, --precision {32,64}, --threads.
// Exit codes: 0 ok, 1 failed checks or internal error, 2 configuration or
// usage error, 3 numeric divergence, 4 I/O error.

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "sparsify/checkpoint.hpp"
#include "sparsify/config.hpp"
#include "sparsify/errors.hpp"
#include "sparsify/experiment.hpp"
#include "sparsify/gradcheck.hpp"
#include "sparsify/report.hpp"

namespace {

using namespace sparsify;

constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> precision;
  unsigned threads = 1;
};

ExperimentConfig load_config(const std::string& path, const Common& common) {
  ExperimentConfig cfg = parse_config_file(path);
  if (common.seed) {
    cfg.seed = *common.seed;
    cfg.train.seed = *common.seed;
  }
  if (common.out) cfg.out_dir = *common.out;
  if (common.precision) cfg.precision = *common.precision;
  cfg.validate();
  return cfg;
}

int cmd_run(const std::string& config, const std::string& resume, const Common& c) {
  const ExperimentConfig cfg = load_config(config, c);
  const Dataset data = load_dataset(cfg);
  RunOptions opt;
  opt.progress = &std::cerr;
  if (!resume.empty()) opt.resume = resume;
  const RunOutcome out = run_experiment(cfg, data, opt);
  std::cout << format_summary(build_network_spec(cfg.arch, data).arch,
                              to_string(cfg.train.mode), out.report, out.test_accuracy);
  return 0;
}

int cmd_sweep(const std::string& config, const std::vector<double>& ratios,
              const std::vector<std::string>& modes, const Common& c) {
  const ExperimentConfig cfg = load_config(config, c);
  const Dataset data = load_dataset(cfg);
  write_config_echo(cfg, cfg.out_dir);
  const auto rows = tradeoff_curve(cfg, data, ratios, modes, c.threads);
  const auto path = std::filesystem::path(cfg.out_dir) / "tradeoff.csv";
  write_tradeoff_csv(path, rows);
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& r : rows)
    std::cout << r.ratio << "  " << std::setw(16) << std::left << r.mode << std::right
              << std::setw(10) << r.params << "  error " << r.error << "  " << r.status
              << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_report(const std::string& ckpt_path, const Common& c) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  ExperimentConfig cfg;
  const RunOutcome out = evaluate_checkpoint(ckpt, &cfg);
  const std::filesystem::path dir =
      c.out ? std::filesystem::path(*c.out)
            : std::filesystem::path(ckpt_path).parent_path();
  const std::string summary =
      format_summary(cfg.arch.kind, to_string(cfg.train.mode), out.report,
                     out.test_accuracy);
  write_layers_csv(dir / "layers.csv", out.report);
  write_text(dir / "summary.txt", summary);
  std::cout << summary;
  return 0;
}

int cmd_export(const std::string& ckpt_path, const Common& c) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto layers = sparse_layers(ckpt);
  const std::filesystem::path dir =
      c.out ? std::filesystem::path(*c.out)
            : std::filesystem::path(ckpt_path).parent_path();
  const auto path = dir / "sparse.bin";
  const std::size_t file_bytes = write_csr_file(path, layers);
  std::size_t dense = 0, nnz = 0;
  std::cout << "layer                 shape        nnz      density\n";
  for (const auto& m : layers) {
    const std::size_t n = std::size_t(m.rows) * m.cols;
    dense += 4 * n;
    nnz += m.values.size();
    std::cout << std::left << std::setw(20) << m.name << std::right << std::setw(6)
              << m.rows << "x" << std::left << std::setw(6) << m.cols << std::right
              << std::setw(10) << m.values.size() << std::setw(10) << std::fixed
              << std::setprecision(4) << double(m.values.size()) / double(n) << "\n";
  }
  std::cout << "dense float32 weights  " << dense << " bytes\n"
            << "sparse export          " << file_bytes << " bytes ("
            << std::setprecision(2) << 100.0 * double(file_bytes) / double(dense)
            << "%), nnz " << nnz << "\n"
            << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_gradcheck(const Common& c) {
  const auto results = run_gradcheck_suite(c.seed.value_or(0));
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-4s %-24s rel_err %.3e  tol %.0e\n", r.passed ? "ok" : "FAIL",
                r.name.c_str(), r.error, r.tolerance);
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online magnitude pruning experiments"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed = 0;
  std::string out;
  int precision = 32;
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed");
  auto* out_opt = app.add_option("--out", out, "Output directory");
  auto* prec_opt = app.add_option("--precision", precision, "Floating-point width")
                       ->check(CLI::IsMember({32, 64}));
  app.add_option("--threads", common.threads, "Worker threads (sweep rows)")
      ->check(CLI::PositiveNumber);

  std::string config, checkpoint, resume;
  std::vector<double> ratios;
  std::vector<std::string> modes{"budget_hinge"};

  auto* run = app.add_subcommand("run", "Train one configuration")->fallthrough();
  run->add_option("config", config, "JSON configuration")->required();
  run->add_option("--resume", resume, "Checkpoint to continue from");

  auto* sweep = app.add_subcommand("sweep", "Trade-off curve against dense equivalents")
                    ->fallthrough();
  sweep->add_option("config", config, "JSON configuration")->required();
  sweep->add_option("--ratios", ratios, "Kept-parameter ratios in (0, 1]")
      ->required()
      ->delimiter(',');
  sweep->add_option("--modes", modes,
                    "fixed_bs, fixed_ga, budget_quadratic, budget_hinge")
      ->delimiter(',');

  auto* report = app.add_subcommand("report", "Sparsity report of a checkpoint")
                     ->fallthrough();
  report->add_option("checkpoint", checkpoint)->required();

  auto* exp = app.add_subcommand("export-sparse", "Write pruned layers as CSR")
                  ->fallthrough();
  exp->add_option("checkpoint", checkpoint)->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite")
                   ->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  if (*seed_opt) common.seed = seed;
  if (*out_opt) common.out = out;
  if (*prec_opt) common.precision = precision;

  try {
    if (*run) return cmd_run(config, resume, common);
    if (*sweep) return cmd_sweep(config, ratios, modes, common);
    if (*report) return cmd_report(checkpoint, common);
    if (*exp) return cmd_export(checkpoint, common);
    if (*grad) return cmd_gradcheck(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitFailed;
}
