// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/experiment.hpp"

#include <atomic>
#include <functional>
#include <mutex>
#include <ostream>
#include <thread>

#include "sparsify/checkpoint.hpp"
#include "sparsify/equiv.hpp"
#include "sparsify/errors.hpp"

namespace sparsify {

namespace {

std::vector<std::string> prunable_names(const NetworkSpec& spec) {
  std::vector<std::string> names;
  for (std::size_t i : spec.prunable_layers()) names.push_back(spec.layers[i].name);
  return names;
}

template <typename T>
RunOutcome run_typed(const ExperimentConfig& cfg, const NetworkSpec& spec,
                     const Dataset& data, const RunOptions& opt) {
  cfg.validate();
  std::mt19937_64 init(cfg.seed);
  Network<T> net(spec, init, cfg.train.mean_mode);
  initialize_bounds(net, cfg.train);
  TrainState<T> state = make_train_state(net, cfg.train);
  const std::string echo = to_json(cfg);
  const std::filesystem::path dir = cfg.out_dir;
  if (opt.resume) restore(load_checkpoint(*opt.resume), net, state);
  if (opt.write_outputs) write_config_echo(cfg, dir);

  const auto names = prunable_names(net.spec());
  const bool append = opt.resume.has_value();
  if (opt.write_outputs && !append) {
    write_convergence_csv(dir / "convergence.csv", {}, names);
    write_epochs_csv(dir / "epochs.csv", {});
  }
  std::vector<StepMetrics> pending_steps;
  std::vector<EpochSummary> pending_epochs;
  TrainCallbacks cb;
  cb.on_step = [&](const StepMetrics& m) { pending_steps.push_back(m); };
  cb.on_epoch = [&](const EpochSummary& e) {
    pending_epochs.push_back(e);
    if (opt.progress)
      *opt.progress << "epoch " << e.epoch << "/" << cfg.train.epochs
                    << "  loss " << e.train_loss << "  test_acc " << e.test_accuracy
                    << "  sparsity " << e.param_sparsity << "  lr " << e.lr << std::endl;
  };
  auto after_epoch = [&](const TrainState<T>& s) {
    if (!opt.write_outputs) return;
    write_convergence_csv(dir / "convergence.csv", pending_steps, names, true);
    write_epochs_csv(dir / "epochs.csv", pending_epochs, true);
    pending_steps.clear();
    pending_epochs.clear();
    if (cfg.checkpoint_every > 0 &&
        s.epoch % static_cast<std::size_t>(cfg.checkpoint_every) == 0)
      save_checkpoint(capture(net, s, echo),
                      dir / ("checkpoint_e" + std::to_string(s.epoch) + ".bin"));
  };

  RunOutcome out;
  out.log = train(net, data, cfg.train, state, cb,
                  std::function<void(const TrainState<T>&)>(after_epoch));
  net.refresh_masks();
  out.report = attained_sparsity(net);
  out.test_accuracy = evaluate(net, data, false).accuracy;
  if (opt.write_outputs) {
    write_layers_csv(dir / "layers.csv", out.report);
    write_text(dir / "summary.txt",
               format_summary(net.spec().arch, to_string(cfg.train.mode), out.report,
                              out.test_accuracy));
    save_checkpoint(capture(net, state, echo), dir / "checkpoint.bin");
  }
  return out;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, const NetworkSpec& spec,
                          const Dataset& data, const RunOptions& options) {
  if (cfg.precision == 64) return run_typed<double>(cfg, spec, data, options);
  return run_typed<float>(cfg, spec, data, options);
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const Dataset& data,
                          const RunOptions& options) {
  return run_experiment(cfg, build_network_spec(cfg.arch, data), data, options);
}

ExperimentConfig sweep_config(const ExperimentConfig& base, double ratio,
                              const std::string& mode) {
  ExperimentConfig c = base;
  c.has_target = false;
  c.has_objective = false;
  if (mode == "dense") {
    c.train.mode = TrainMode::Dense;
  } else if (mode == "fixed_bs" || mode == "fixed_ga") {
    c.train.mode = parse_mode(mode);
    c.has_target = true;
    c.train.target.s = 1.0 - ratio;
  } else if (mode == "budget_quadratic" || mode == "budget_hinge") {
    c.train.mode = TrainMode::Adaptive;
    c.has_objective = true;
    c.train.objective.variant = sparsity::parse_variant(mode);
    c.train.objective.budget_p = ratio;
    if (!base.has_objective) c.train.objective.lambda_f = 0.0;
  } else {
    throw ValidationError("modes", "unknown sweep mode '" + mode +
                                       "' (fixed_bs, fixed_ga, budget_quadratic, "
                                       "budget_hinge)");
  }
  return c;
}

std::vector<TradeoffRow> tradeoff_curve(const ExperimentConfig& base,
                                        const Dataset& data,
                                        const std::vector<double>& ratios,
                                        const std::vector<std::string>& modes,
                                        unsigned threads) {
  struct Job {
    double ratio;
    std::string mode;  // "dense_equiv" or a pruning mode
  };
  std::vector<Job> jobs;
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0))
      throw ValidationError("ratios", "every ratio must lie in (0, 1]");
    jobs.push_back({r, "dense_equiv"});
    for (const auto& m : modes) {
      (void)sweep_config(base, r, m);  // reject unknown modes before training
      jobs.push_back({r, m});
    }
  }
  const NetworkSpec base_spec = build_network_spec(base.arch, data);
  const double base_weights = static_cast<double>(count_weight_params(base_spec));
  std::vector<TradeoffRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  RunOptions quiet;
  quiet.write_outputs = false;

  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      TradeoffRow& row = rows[i];
      row.ratio = job.ratio;
      row.mode = job.mode;
      try {
        if (job.mode == "dense_equiv") {
          const NetworkSpec spec = dense_equivalent(base_spec, job.ratio);
          const RunOutcome o =
              run_experiment(sweep_config(base, job.ratio, "dense"), spec, data, quiet);
          row.params = count_params(spec);
          row.density = double(count_weight_params(spec)) / base_weights;
          row.error = 1.0 - o.test_accuracy;
        } else {
          const RunOutcome o = run_experiment(sweep_config(base, job.ratio, job.mode),
                                              base_spec, data, quiet);
          row.params = o.report.kept_params;
          row.density = o.report.param_density();
          row.error = 1.0 - o.test_accuracy;
        }
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        row.error = 1.0;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, unsigned(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

std::vector<CsrMatrix> sparse_layers(const Checkpoint& ckpt) {
  std::vector<CsrMatrix> out;
  for (const TensorRecord& p : ckpt.params) {
    const std::string suffix = ".weight";
    if (p.name.size() <= suffix.size() ||
        p.name.compare(p.name.size() - suffix.size(), suffix.size(), suffix) != 0)
      continue;
    const std::string layer = p.name.substr(0, p.name.size() - suffix.size());
    std::vector<std::uint8_t> mask;
    for (const LayerRecord& l : ckpt.layers)
      if (l.name == layer) mask = unpack_bits(l.mask, l.count);
    out.push_back(to_csr(layer, p.shape, p.values, mask));
  }
  return out;
}

namespace {

template <typename T>
RunOutcome evaluate_typed(const Checkpoint& ckpt, const ExperimentConfig& cfg) {
  const Dataset data = load_dataset(cfg);
  std::mt19937_64 init(cfg.seed);
  Network<T> net(build_network_spec(cfg.arch, data), init, cfg.train.mean_mode);
  initialize_bounds(net, cfg.train);
  TrainState<T> state = make_train_state(net, cfg.train);
  restore(ckpt, net, state);
  RunOutcome out;
  out.test_accuracy = evaluate(net, data, false).accuracy;
  net.refresh_masks();
  out.report = attained_sparsity(net);
  return out;
}

}  // namespace

RunOutcome evaluate_checkpoint(const Checkpoint& ckpt, ExperimentConfig* cfg_out) {
  const ExperimentConfig cfg = parse_config_text(ckpt.config_json);
  if (cfg_out) *cfg_out = cfg;
  if (ckpt.precision == 64) return evaluate_typed<double>(ckpt, cfg);
  return evaluate_typed<float>(ckpt, cfg);
}

}  // namespace sparsify
