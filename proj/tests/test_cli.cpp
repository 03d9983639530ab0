// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

// Configuration, datasets, persistence, reports and the command-line front
// end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sparsify/checkpoint.hpp"
#include "sparsify/config.hpp"
#include "sparsify/errors.hpp"
#include "sparsify/experiment.hpp"
#include "sparsify/report.hpp"

namespace sparsify {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / "sparsify_tests" /
               (std::string(info->test_suite_name()) + "." + info->name()) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

const char* kToyJson = R"({
  "seed": 3,
  "mode": "fixed_ga",
  "target": {"s": 0.85},
  "dataset": {"kind": "two_gaussians", "train_size": 300, "test_size": 200},
  "arch": {"kind": "mlp", "hidden": [16, 16]},
  "train": {"epochs": 4, "batch_size": 32, "lr": 0.05, "log_interval": 3}
})";

ExperimentConfig toy(const fs::path& dir, const std::string& text = kToyJson) {
  ExperimentConfig c = parse_config_text(text);
  c.out_dir = dir.string();
  return c;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(SPARSIFY_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------- config

TEST(Config, MinimalDenseDefaults) {
  const auto c = parse_config_text(
      R"({"mode": "dense", "dataset": {"kind": "rings"}, "arch": {"kind": "mlp"}})");
  EXPECT_EQ(c.train.mode, TrainMode::Dense);
  EXPECT_EQ(c.precision, 32);
  EXPECT_DOUBLE_EQ(c.train.lr, 0.1);
  EXPECT_DOUBLE_EQ(c.train.momentum, 0.9);
  EXPECT_DOUBLE_EQ(c.train.weight_decay, 5e-5);
  EXPECT_DOUBLE_EQ(c.train.target.epsilon, 1e-3);
  EXPECT_EQ(c.train.recompute_period, 1);
  EXPECT_EQ(c.arch.hidden, (std::vector<std::size_t>{64, 64}));
  EXPECT_EQ(c.out_dir, "out");
}

TEST(Config, FixedModeNeedsTargetS) {
  try {
    parse_config_text(R"({"mode": "fixed_ga"})");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.key(), "target.s");
  }
  try {
    parse_config_text(R"({"mode": "fixed_bs", "target": {"epsilon": 0.01}})");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.key(), "target.s");
  }
}

TEST(Config, ModeParameterInconsistency) {
  EXPECT_THROW(parse_config_text(R"({"mode": "dense", "target": {"s": 0.5}})"),
               ValidationError);
  EXPECT_THROW(parse_config_text(R"({"mode": "fixed_bs", "target": {"s": 0.5},
                                    "objective": {"variant": "avg"}})"),
               ValidationError);
  EXPECT_THROW(parse_config_text(R"({"mode": "adaptive",
                                    "objective": {"variant": "budget_hinge"}})"),
               ValidationError);
  EXPECT_THROW(parse_config_text(R"({"precision": 16})"), ValidationError);
  EXPECT_THROW(parse_config_text(R"({"train": {"lr": -1}})"), ValidationError);
  EXPECT_THROW(parse_config_text(R"({"train": {"lr": "fast"}})"), ValidationError);
}

TEST(Config, UnknownKeyNamed) {
  try {
    parse_config_text(R"({"train": {"lr": 0.1, "lrr": 1}})");
    FAIL() << "expected UnknownKeyError";
  } catch (const UnknownKeyError& e) {
    EXPECT_EQ(e.key(), "train.lrr");
  }
  try {
    parse_config_text(R"({"colour": "red"})");
    FAIL() << "expected UnknownKeyError";
  } catch (const UnknownKeyError& e) {
    EXPECT_EQ(e.key(), "colour");
  }
}

TEST(Config, SyntaxErrorCarriesPosition) {
  try {
    parse_config_text("{\n  \"seed\": 1,\n  \"mode\": ]\n}");
    FAIL() << "expected ConfigSyntaxError";
  } catch (const ConfigSyntaxError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_GE(e.column(), 10u);
  }
}

TEST(Config, ErrorClassesAreDistinct) {
  auto kind = [](const std::string& text) -> std::string {
    try {
      parse_config_text(text);
    } catch (const ConfigSyntaxError&) {
      return "syntax";
    } catch (const UnknownKeyError&) {
      return "unknown";
    } catch (const ValidationError&) {
      return "validation";
    }
    return "none";
  };
  EXPECT_EQ(kind("{"), "syntax");
  EXPECT_EQ(kind(R"({"nope": 1})"), "unknown");
  EXPECT_EQ(kind(R"({"mode": "fixed_ga"})"), "validation");
  EXPECT_EQ(kind(R"({})"), "none");
}

TEST(Config, BudgetEchoRoundTrip) {
  const auto c = parse_config_text(R"({"mode": "adaptive",
      "objective": {"variant": "budget_quadratic", "budget_p": 0.15}})");
  EXPECT_DOUBLE_EQ(c.train.objective.budget_p, 0.15);
  EXPECT_DOUBLE_EQ(c.train.objective.lambda_f, 0.0);
  const std::string echo = to_json(c);
  const auto again = parse_config_text(echo);
  EXPECT_EQ(to_json(again), echo);
  EXPECT_DOUBLE_EQ(again.train.objective.budget_p, 0.15);
  EXPECT_EQ(again.train.objective.variant, sparsity::Variant::BudgetQuadratic);
}

TEST(Config, LambdaFFollowsBudgetF) {
  const auto c = parse_config_text(R"({"mode": "adaptive",
      "objective": {"variant": "budget_hinge", "budget_p": 0.3, "budget_f": 0.5}})");
  EXPECT_DOUBLE_EQ(c.train.objective.lambda_f, 10.0);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(parse_config_file("/nonexistent/config.json"), IoError);
}

// ---------------------------------------------------------------- datasets

TEST(Datasets, SyntheticDeterminism) {
  SyntheticOptions o;
  o.seed = 7;
  o.train_size = 1000;
  const auto a = make_two_gaussians(o), b = make_two_gaussians(o);
  EXPECT_EQ(a.train_x, b.train_x);
  EXPECT_EQ(a.train_y, b.train_y);
  EXPECT_EQ(a.test_x, b.test_x);
  o.seed = 8;
  EXPECT_NE(make_two_gaussians(o).train_x, a.train_x);

  o.noise = 0.2;
  EXPECT_EQ(make_rings(o).train_x, make_rings(o).train_x);
  o.image_shape = {1, 8, 8};
  o.classes = 5;
  const auto p = make_patterns(o);
  EXPECT_EQ(p.train_x, make_patterns(o).train_x);
  EXPECT_EQ(p.sample_shape, (Shape{1, 8, 8}));
  EXPECT_EQ(p.classes, 5u);
}

struct ManifestFixture {
  fs::path dir;
  std::string manifest = "file,label,split\n";
  void image(const std::string& name, int label, const std::string& split,
             std::size_t bytes, std::uint8_t fill) {
    fs::create_directories((dir / name).parent_path());
    spit(dir / name, std::string(bytes, char(fill)));
    manifest += name + "," + std::to_string(label) + "," + split + "\n";
  }
  fs::path write() {
    spit(dir / "manifest.csv", manifest);
    return dir / "manifest.csv";
  }
};

TEST(Datasets, ManifestLoadsAndNormalizesOnTrain) {
  ManifestFixture m{scratch("data")};
  m.image("a/0.bin", 0, "train", 4, 10);
  m.image("a/1.bin", 0, "train", 4, 30);
  m.image("b/0.bin", 1, "train", 4, 50);
  m.image("b/1.bin", 1, "test", 4, 250);
  const auto d = load_manifest(m.write(), {1, 2, 2});
  EXPECT_EQ(d.train_size(), 3u);
  EXPECT_EQ(d.test_size(), 1u);
  EXPECT_EQ(d.classes, 2u);
  double mean = 0, sq = 0;
  for (float v : d.train_x) mean += v;
  mean /= double(d.train_x.size());
  for (float v : d.train_x) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.0, 1e-6);
  EXPECT_NEAR(sq / double(d.train_x.size()), 1.0, 1e-5);
  // Test pixels use the train statistics: 250 is far outside the train range.
  EXPECT_GT(d.test_x[0], 3.0f);
}

TEST(Datasets, ManifestErrorsNameTheFile) {
  ManifestFixture m{scratch("missing")};
  m.image("x.bin", 0, "train", 4, 1);
  m.manifest += "ghost.bin,1,test\n";
  try {
    load_manifest(m.write(), {1, 2, 2});
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost.bin"), std::string::npos) << e.what();
  }

  ManifestFixture s{scratch("short")};
  s.image("x.bin", 0, "train", 4, 1);
  s.image("y.bin", 1, "test", 3, 1);
  try {
    load_manifest(s.write(), {1, 2, 2});
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("y.bin"), std::string::npos) << e.what();
  }

  ManifestFixture o{scratch("overlap")};
  o.image("x.bin", 0, "train", 4, 1);
  o.image("z.bin", 1, "train", 4, 1);
  o.manifest += "x.bin,0,test\n";
  EXPECT_THROW(load_manifest(o.write(), {1, 2, 2}), DatasetError);

  ManifestFixture h{scratch("header")};
  h.manifest = "path,label,split\n";
  EXPECT_THROW(load_manifest(h.write(), {1, 2, 2}), DatasetError);
}

TEST(Datasets, SplitsAreDisjoint) {
  ManifestFixture m{scratch("disjoint")};
  for (int i = 0; i < 6; ++i)
    m.image("img" + std::to_string(i) + ".bin", i % 2, i < 4 ? "train" : "test", 4, 10 * i);
  EXPECT_NO_THROW(load_manifest(m.write(), {1, 2, 2}));
}

// ---------------------------------------------------------------- checkpoints

TEST(Checkpoint, BitPacking) {
  std::vector<std::uint8_t> flags(77);
  for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = (i * 7) % 3 == 0;
  const auto packed = pack_bits(flags);
  EXPECT_EQ(packed.size(), 10u);
  EXPECT_EQ(unpack_bits(packed, flags.size()), flags);
}

Checkpoint trained_checkpoint(const fs::path& dir, int precision = 32) {
  auto c = toy(dir);
  c.precision = precision;
  run_experiment(c, load_dataset(c));
  return load_checkpoint(dir / "checkpoint.bin");
}

TEST(Checkpoint, EncodeDecodeRoundTrip) {
  const auto ck = trained_checkpoint(scratch("run"));
  const auto bytes = encode_checkpoint(ck);
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  ASSERT_EQ(back.params.size(), ck.params.size());
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    EXPECT_EQ(back.params[i].name, ck.params[i].name);
    EXPECT_EQ(back.params[i].values, ck.params[i].values);
  }
  ASSERT_EQ(back.layers.size(), ck.layers.size());
  for (std::size_t i = 0; i < ck.layers.size(); ++i) {
    EXPECT_EQ(back.layers[i].bound, ck.layers[i].bound);
    EXPECT_EQ(back.layers[i].mask, ck.layers[i].mask);
  }
  EXPECT_EQ(back.rng_state, ck.rng_state);
  EXPECT_EQ(back.epoch, 4u);
}

template <typename T>
void expect_network_round_trip(const Checkpoint& ck) {
  ExperimentConfig c = parse_config_text(ck.config_json);
  const auto data = load_dataset(c);
  std::mt19937_64 rng(999);
  Network<T> net(build_network_spec(c.arch, data), rng);
  TrainState<T> state = make_train_state(net, c.train);
  restore(ck, net, state);
  EXPECT_EQ(encode_checkpoint(capture(net, state, ck.config_json)), encode_checkpoint(ck));
}

TEST(Checkpoint, NetworkRoundTripIsBitIdentical) {
  const auto c32 = trained_checkpoint(scratch("p32"), 32);
  EXPECT_EQ(c32.precision, 32u);
  expect_network_round_trip<float>(c32);
  const auto c64 = trained_checkpoint(scratch("p64"), 64);
  EXPECT_EQ(c64.precision, 64u);
  expect_network_round_trip<double>(c64);
  // A checkpoint only restores into a network of its own precision.
  ExperimentConfig c = parse_config_text(c32.config_json);
  const auto data = load_dataset(c);
  std::mt19937_64 rng(1);
  Network<double> net(build_network_spec(c.arch, data), rng);
  auto state = make_train_state(net, c.train);
  EXPECT_THROW(restore(c32, net, state), CheckpointError);
}

TEST(Checkpoint, CorruptionTruncationVersion) {
  const auto dir = scratch("run");
  const auto ck = trained_checkpoint(dir);
  auto bytes = encode_checkpoint(ck);

  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x40;
  EXPECT_THROW(decode_checkpoint(flipped), CheckpointChecksumError);

  std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 3);
  EXPECT_THROW(decode_checkpoint(cut), CheckpointTruncatedError);
  std::vector<std::uint8_t> tiny(bytes.begin(), bytes.begin() + 5);
  EXPECT_THROW(decode_checkpoint(tiny), CheckpointTruncatedError);

  // Version 2 with a valid checksum.
  auto v2 = bytes;
  v2[8] = 2;
  const std::size_t body = v2.size() - 4;
  const std::uint32_t crc = [&] {
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < body; ++i) {
      c ^= v2[i];
      for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
    }
    return ~c;
  }();
  for (int k = 0; k < 4; ++k) v2[body + k] = std::uint8_t(crc >> (8 * k));
  EXPECT_THROW(decode_checkpoint(v2), CheckpointVersionError);

  auto foreign = bytes;
  foreign[0] = 'X';
  EXPECT_THROW(decode_checkpoint(foreign), CheckpointError);

  spit(dir / "bad.bin", std::string(flipped.begin(), flipped.end()));
  EXPECT_THROW(load_checkpoint(dir / "bad.bin"), CheckpointChecksumError);
  EXPECT_THROW(load_checkpoint(dir / "absent.bin"), IoError);
}

TEST(Checkpoint, MismatchedRestoreLeavesStateUntouched) {
  const auto ck = trained_checkpoint(scratch("run"));
  const std::vector<std::size_t> hidden{16, 8};
  std::mt19937_64 rng(5);
  Network<float> net(build_mlp(2, hidden, 2), rng);
  TrainConfig tc;
  auto state = make_train_state(net, tc);
  std::vector<std::vector<float>> before;
  for (const auto& p : net.parameters()) before.push_back(p.tensor->storage());
  EXPECT_THROW(restore(ck, net, state), CheckpointError);
  const auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    EXPECT_EQ(params[i].tensor->storage(), before[i]);
  EXPECT_EQ(state.epoch, 0u);
}

TEST(Checkpoint, ResumeMatchesUninterrupted) {
  for (const char* mode : {"fixed_ga", "adaptive"}) {
    std::string text = kToyJson;
    if (std::string(mode) == "adaptive") {
      text = R"({"seed": 3, "mode": "adaptive",
        "objective": {"variant": "budget_hinge", "budget_p": 0.2},
        "dataset": {"kind": "two_gaussians", "train_size": 300, "test_size": 200},
        "arch": {"kind": "mlp", "hidden": [16, 16]},
        "train": {"epochs": 4, "batch_size": 32, "lr": 0.05, "log_interval": 3}})";
    }
    const auto full_dir = scratch(std::string(mode) + "_full");
    auto full_cfg = toy(full_dir, text);
    full_cfg.checkpoint_every = 2;
    const auto data = load_dataset(full_cfg);
    const auto full = run_experiment(full_cfg, data);
    ASSERT_TRUE(fs::exists(full_dir / "checkpoint_e2.bin"));

    const auto resumed_dir = scratch(std::string(mode) + "_resumed");
    auto resumed_cfg = toy(resumed_dir, text);
    RunOptions opt;
    opt.resume = full_dir / "checkpoint_e2.bin";
    const auto resumed = run_experiment(resumed_cfg, data, opt);

    EXPECT_EQ(resumed.test_accuracy, full.test_accuracy) << mode;
    EXPECT_EQ(resumed.report.param_sparsity, full.report.param_sparsity) << mode;
    ASSERT_EQ(resumed.log.epochs.size(), 2u);
    EXPECT_EQ(resumed.log.epochs.back().train_loss, full.log.epochs.back().train_loss);
    const auto a = load_checkpoint(full_dir / "checkpoint.bin");
    const auto b = load_checkpoint(resumed_dir / "checkpoint.bin");
    ASSERT_EQ(a.params.size(), b.params.size());
    for (std::size_t i = 0; i < a.params.size(); ++i)
      EXPECT_EQ(a.params[i].values, b.params[i].values) << a.params[i].name;
    for (std::size_t i = 0; i < a.layers.size(); ++i)
      EXPECT_EQ(a.layers[i].mask, b.layers[i].mask);
  }
}

// ---------------------------------------------------------------- reports

TEST(Reports, ArtifactsReproduceFromEcho) {
  const auto dir = scratch("run");
  auto c = toy(dir);
  run_experiment(c, load_dataset(c));
  const std::vector<std::string> files{"config.json", "convergence.csv", "epochs.csv",
                                       "layers.csv", "summary.txt", "checkpoint.bin"};
  std::vector<std::string> first;
  for (const auto& f : files) first.push_back(slurp(dir / f));
  const auto echo = parse_config_file(dir / "config.json");
  run_experiment(echo, load_dataset(echo));
  for (std::size_t i = 0; i < files.size(); ++i)
    EXPECT_EQ(slurp(dir / files[i]), first[i]) << files[i];
}

TEST(Reports, DenseLayersHaveZeroSparsity) {
  const auto dir = scratch("dense");
  auto c = toy(dir, R"({"mode": "dense",
    "dataset": {"kind": "two_gaussians", "train_size": 200, "test_size": 100},
    "arch": {"kind": "mlp", "hidden": [8]}, "train": {"epochs": 1}})");
  run_experiment(c, load_dataset(c));
  std::istringstream csv(slurp(dir / "layers.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "layer,prunable,weights,sparsity,bound,kept_params,dense_flops,kept_flops");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) cols.push_back(f);
    ASSERT_EQ(cols.size(), 8u);
    EXPECT_EQ(std::stod(cols[3]), 0.0) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 2);
}

TEST(Reports, FixedBinarySearchSummaryNearTarget) {
  const auto dir = scratch("bs");
  auto c = toy(dir, R"({"mode": "fixed_bs", "target": {"s": 0.85},
    "dataset": {"kind": "two_gaussians", "train_size": 300, "test_size": 100},
    "arch": {"kind": "mlp", "hidden": [64, 64]}, "train": {"epochs": 2}})");
  const auto out = run_experiment(c, load_dataset(c));
  EXPECT_LT(std::abs(out.report.param_sparsity - 0.85), 1e-3 + 1.0 / 128);
  const std::string summary = slurp(dir / "summary.txt");
  EXPECT_NE(summary.find("param sparsity"), std::string::npos) << summary;
  EXPECT_NE(summary.find("test accuracy"), std::string::npos);
}

TEST(Reports, ConvergenceColumns) {
  const auto dir = scratch("conv");
  auto c = toy(dir);
  run_experiment(c, load_dataset(c));
  std::istringstream csv(slurp(dir / "convergence.csv"));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "iter,epoch,task_loss,sparsity_loss,param_sparsity,lr,s_fc1,s_fc2,s_fc3");
}

TEST(Tradeoff, RowCountAndDenseBaseline) {
  auto base = toy(scratch("sweep"));
  base.train.epochs = 1;
  const auto data = load_dataset(base);
  const std::vector<double> ratios{0.5, 0.25};
  const std::vector<std::string> modes{"fixed_bs", "budget_hinge"};
  const auto rows = tradeoff_curve(base, data, ratios, modes, 2);
  EXPECT_EQ(rows.size(), ratios.size() * modes.size() + ratios.size());
  for (const auto& r : rows) EXPECT_EQ(r.status, "ok") << r.mode;

  auto dense = base;
  dense.train.mode = TrainMode::Dense;
  dense.has_target = false;
  RunOptions quiet;
  quiet.write_outputs = false;
  const auto baseline = run_experiment(dense, data, quiet);
  const auto single = tradeoff_curve(base, data, {1.0}, {}, 1);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].mode, "dense_equiv");
  EXPECT_DOUBLE_EQ(single[0].error, 1.0 - baseline.test_accuracy);
}

TEST(Tradeoff, FailingRowDoesNotStopOthers) {
  auto base = toy(scratch("fail"));
  base.arch.hidden = {2, 16};
  base.train.epochs = 1;
  const auto data = load_dataset(base);
  const auto rows = tradeoff_curve(base, data, {0.1}, {"fixed_ga"}, 1);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NE(rows[0].status, "ok");
  EXPECT_EQ(rows[1].status, "ok");
  EXPECT_THROW(tradeoff_curve(base, data, {0.5}, {"bogus"}, 1), ValidationError);
}

TEST(Csr, RoundTripAndSize) {
  const std::vector<double> w{1, 0, 2, 0, 0, 3, 4, 5, 0, 0, 0, 6};
  const std::vector<std::uint8_t> pruned{0, 1, 0, 1, 1, 0, 0, 0, 1, 1, 1, 0};
  const auto m = to_csr("conv", {3, 4}, w, pruned);
  EXPECT_EQ(m.row_ptr, (std::vector<std::uint32_t>{0, 2, 5, 6}));
  EXPECT_EQ(m.col_idx, (std::vector<std::uint32_t>{0, 2, 1, 2, 3, 3}));
  EXPECT_EQ(m.values, (std::vector<float>{1, 2, 3, 4, 5, 6}));
  const auto path = scratch("csr") / "sparse.bin";
  const std::size_t bytes = write_csr_file(path, {m, m});
  EXPECT_EQ(bytes, fs::file_size(path));
  const auto back = read_csr_file(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].name, "conv");
  EXPECT_EQ(back[1].rows, 3u);
  EXPECT_EQ(back[1].cols, 4u);
  EXPECT_EQ(back[1].row_ptr, m.row_ptr);
  EXPECT_EQ(back[1].col_idx, m.col_idx);
  EXPECT_EQ(back[1].values, m.values);
}

TEST(Csr, CheckpointExportMatchesMasks) {
  const auto ck = trained_checkpoint(scratch("run"));
  const auto layers = sparse_layers(ck);
  ASSERT_EQ(layers.size(), ck.layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto mask = unpack_bits(ck.layers[i].mask, ck.layers[i].count);
    std::size_t kept = 0;
    for (auto b : mask) kept += !b;
    EXPECT_EQ(layers[i].values.size(), kept) << layers[i].name;
  }
}

// ---------------------------------------------------------------- command line

TEST(Cli, ExitCodesAndOutputs) {
  const auto dir = scratch("cli");
  const auto log = dir / "log.txt";
  spit(dir / "ok.json", kToyJson);
  EXPECT_EQ(run_cli("run " + (dir / "ok.json").string() + " --out " + (dir / "out").string(),
                    log), 0)
      << slurp(log);
  for (const char* f : {"config.json", "convergence.csv", "epochs.csv", "layers.csv",
                        "summary.txt", "checkpoint.bin"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;

  const auto ckpt = (dir / "out" / "checkpoint.bin").string();
  EXPECT_EQ(run_cli("report " + ckpt, log), 0) << slurp(log);
  EXPECT_NE(slurp(log).find("param sparsity"), std::string::npos);
  EXPECT_EQ(run_cli("export-sparse " + ckpt, log), 0) << slurp(log);
  EXPECT_TRUE(fs::exists(dir / "out" / "sparse.bin"));

  spit(dir / "unknown.json", R"({"mode": "dense", "colour": 1})");
  EXPECT_EQ(run_cli("run " + (dir / "unknown.json").string(), log), 2);
  EXPECT_NE(slurp(log).find("colour"), std::string::npos);
  spit(dir / "syntax.json", "{\"mode\": ");
  EXPECT_EQ(run_cli("run " + (dir / "syntax.json").string(), log), 2);
  EXPECT_EQ(run_cli("run " + (dir / "ok.json").string() + " --precision 16", log), 2);
  EXPECT_EQ(run_cli("frobnicate", log), 2);
  EXPECT_EQ(run_cli("run " + (dir / "missing.json").string(), log), 4);

  auto bytes = slurp(ckpt);
  bytes[bytes.size() / 2] ^= 0x10;
  spit(dir / "corrupt.bin", bytes);
  EXPECT_EQ(run_cli("report " + (dir / "corrupt.bin").string(), log), 4);
  EXPECT_NE(slurp(log).find("checksum"), std::string::npos) << slurp(log);

  spit(dir / "diverge.json", R"({"mode": "dense",
    "dataset": {"kind": "two_gaussians", "train_size": 200, "test_size": 100},
    "arch": {"kind": "mlp", "hidden": [8]}, "train": {"epochs": 2, "lr": 1e30}})");
  EXPECT_EQ(run_cli("run " + (dir / "diverge.json").string() + " --out " +
                        (dir / "div").string(), log), 3);
}

TEST(Cli, GlobalFlagsOverrideConfig) {
  const auto dir = scratch("flags");
  const auto log = dir / "log.txt";
  spit(dir / "ok.json", kToyJson);
  ASSERT_EQ(run_cli("run " + (dir / "ok.json").string() + " --seed 11 --precision 64 --out " +
                        (dir / "o").string(), log), 0)
      << slurp(log);
  const auto echo = parse_config_file(dir / "o" / "config.json");
  EXPECT_EQ(echo.seed, 11u);
  EXPECT_EQ(echo.precision, 64);
  EXPECT_EQ(load_checkpoint(dir / "o" / "checkpoint.bin").precision, 64u);
}

TEST(Cli, SweepWritesTradeoffAndGradcheckPasses) {
  const auto dir = scratch("sweep");
  const auto log = dir / "log.txt";
  spit(dir / "base.json", R"({"seed": 2, "mode": "dense",
    "dataset": {"kind": "two_gaussians", "train_size": 200, "test_size": 100},
    "arch": {"kind": "mlp", "hidden": [16, 16]}, "train": {"epochs": 1}})");
  ASSERT_EQ(run_cli("sweep " + (dir / "base.json").string() +
                        " --ratios 0.5,0.25 --modes fixed_ga,budget_hinge --threads 2 --out " +
                        (dir / "o").string(), log), 0)
      << slurp(log);
  std::istringstream csv(slurp(dir / "o" / "tradeoff.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 2 * 2 + 2);
  EXPECT_EQ(run_cli("gradcheck", log), 0) << slurp(log);
}

}  // namespace
}  // namespace sparsify
