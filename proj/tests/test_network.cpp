// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "sparsify/errors.hpp"
#include "sparsify/network.hpp"
#include "sparsify/network_spec.hpp"

namespace sparsify {
namespace {

LayerSpec make_layer(std::string name, LayerKind kind, int input, std::size_t cin,
                     std::size_t cout, std::size_t kernel = 1, bool bias = true) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = kind;
  l.inputs = {input};
  l.in_channels = cin;
  l.out_channels = cout;
  l.kernel = kernel;
  l.padding = kernel / 2;
  l.has_bias = bias && (kind == LayerKind::Linear || kind == LayerKind::Conv2d);
  l.prunable = kind == LayerKind::Linear || kind == LayerKind::Conv2d;
  return l;
}

// Pre-activation WRN-16-k parameter count written out block by block.
std::size_t wrn16_params(std::size_t k, std::size_t classes) {
  std::size_t total = 3 * 16 * 9;
  std::size_t cin = 16;
  for (std::size_t width : {16 * k, 32 * k, 64 * k}) {
    for (int b = 0; b < 2; ++b) {
      total += 2 * cin + cin * width * 9 + 2 * width + width * width * 9;
      if (b == 0 && (cin != width || width != 16 * k)) total += cin * width;
      cin = width;
    }
  }
  return total + 2 * cin + cin * classes + classes;
}

Tensor<double> random_input(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor<double> t(shape);
  for (auto& x : t.storage()) x = d(rng);
  return t;
}

TEST(CountParams, SingleConv) {
  NetworkSpec s;
  s.arch = "one-conv";
  s.input_channels = 16;
  s.input_h = s.input_w = 5;
  s.classes = 2;
  s.layers.push_back(make_layer("conv", LayerKind::Conv2d, -1, 16, 32, 3));
  s.layers.push_back(make_layer("pool", LayerKind::Pool, 0, 0, 0));
  s.layers.push_back(make_layer("fc", LayerKind::Linear, 1, 32, 2));
  s.finalize();
  EXPECT_EQ(s.layers[0].param_count, 16u * 32u * 9u + 32u);
  EXPECT_EQ(s.layers[0].param_count, 4640u);
}

TEST(CountFlops, PointwiseConv) {
  NetworkSpec s;
  s.arch = "pointwise";
  s.input_channels = 1;
  s.input_h = s.input_w = 4;
  s.classes = 1;
  s.layers.push_back(make_layer("conv", LayerKind::Conv2d, -1, 1, 1, 1, false));
  s.layers.push_back(make_layer("pool", LayerKind::Pool, 0, 0, 0));
  s.layers.push_back(make_layer("fc", LayerKind::Linear, 1, 1, 1, 1, false));
  s.finalize();
  EXPECT_EQ(s.layers[0].flop_count, 32u);
}

TEST(CountFlops, LinearInDensity) {
  auto s = build_cnn_small({});
  const std::vector<double> zero(3, 0.0), half(3, 0.5), mixed{0.25, 0.5, 1.0};
  EXPECT_DOUBLE_EQ(count_flops(s, zero), double(count_flops(s)));
  EXPECT_DOUBLE_EQ(count_flops(s, half), 0.5 * double(count_flops(s)));
  double want = 0;
  std::size_t i = 0;
  for (const auto& l : s.layers)
    if (l.has_weights()) want += (1 - mixed[i++]) * double(l.flop_count);
  EXPECT_DOUBLE_EQ(count_flops(s, mixed), want);
}

TEST(CountFlops, SmallCnnRecount) {
  SmallCnnOptions o;
  o.height = o.width = 8;
  auto s = build_cnn_small(o);
  // conv1 3x3 1->16 at 8x8, conv2 3x3 16->32 stride 2 to 4x4, fc 32->10.
  const std::size_t conv1 = 2 * 9 * 1 * 16 * 64;
  const std::size_t conv2 = 2 * 9 * 16 * 32 * 16;
  const std::size_t fc = 2 * 32 * 10;
  EXPECT_EQ(count_flops(s), conv1 + conv2 + fc);
  EXPECT_EQ(count_params(s), (9 * 16 + 16) + (9 * 16 * 32 + 32) + (32 * 10 + 10));
  std::size_t sum = 0;
  for (const auto& l : s.layers) sum += l.param_count;
  EXPECT_EQ(sum, count_params(s));
}

TEST(BuildWrn, ClosedFormCounts) {
  for (std::size_t k : {1u, 2u, 3u, 4u, 8u}) {
    for (std::size_t classes : {10u, 100u}) {
      EXPECT_EQ(count_params(build_wrn(16, k, classes)), wrn16_params(k, classes))
          << "k=" << k;
    }
  }
}

TEST(BuildWrn, MonotoneInWidth) {
  EXPECT_LT(count_params(build_wrn(16, 1, 10)), count_params(build_wrn(16, 2, 10)));
  EXPECT_LT(count_params(build_wrn(16, 2, 10)), count_params(build_wrn(16, 3, 10)));
  EXPECT_LT(count_params(build_wrn(16, 3, 10)), count_params(build_wrn(22, 3, 10)));
}

TEST(BuildWrn, RejectsBadDepth) {
  EXPECT_THROW(build_wrn(15, 2, 10), ContractError);
  EXPECT_THROW(build_wrn(4, 2, 10), ContractError);
}

TEST(BuildWrn, PrunabilityDefaults) {
  auto s = build_wrn(16, 2, 10);
  std::size_t prunable = 0;
  for (const auto& l : s.layers) {
    if (l.kind == LayerKind::BatchNorm) EXPECT_FALSE(l.prunable);
    if (l.has_weights()) EXPECT_TRUE(l.prunable) << l.name;
    prunable += l.prunable;
  }
  // stem, 12 block convs, 2 projections (groups 2 and 3) plus the first, fc
  EXPECT_EQ(prunable, 1u + 12u + 3u + 1u);
  const std::vector<std::string> names{"fc", "conv0"};
  exempt_layers(s, names);
  EXPECT_FALSE(s.layers[s.index_of("fc")].prunable);
  const std::vector<std::string> bad{"bn_final"};
  EXPECT_THROW(exempt_layers(s, bad), ContractError);
  const std::vector<std::string> unknown{"nope"};
  EXPECT_THROW(exempt_layers(s, unknown), ContractError);
}

TEST(Network, InitializationAndNames) {
  std::mt19937_64 rng(1);
  Network<double> net(build_cnn_small({}), rng);
  std::set<std::string> names;
  for (const auto& p : net.parameters()) names.insert(p.name);
  for (const char* n : {"conv1.weight", "conv1.bias", "conv1.bound", "fc.weight"})
    EXPECT_TRUE(names.count(n)) << n;
  for (auto* p : net.prunable()) {
    EXPECT_EQ(p->relative_bound(), 0.0);
    double ss = 0;
    for (double w : p->weights.storage()) ss += w * w;
    const double fan_in = double(p->weights.size()) /
                          double(p->name == "fc" ? p->weights.shape()[1] : p->weights.shape()[0]);
    const double expected_var = 2.0 / fan_in;
    EXPECT_NEAR(ss / double(p->weights.size()), expected_var, 0.5 * expected_var) << p->name;
  }
}

TEST(Network, ForwardRejectsWrongShape) {
  std::mt19937_64 rng(1);
  Network<double> net(build_cnn_small({}), rng);
  ad::Tape<double> tape;
  EXPECT_THROW(net.forward(tape, Tensor<double>({2, 1, 7, 8}), {}), DimensionError);
}

TEST(PrunableForward, ZeroBoundMatchesVanillaLayer) {
  std::mt19937_64 rng(2);
  const std::vector<std::size_t> hidden{5};
  Network<double> net(build_mlp(4, hidden, 3), rng);
  auto x = random_input({6, 4}, 3);
  ad::Tape<double> tape;
  ForwardOptions pruned, raw;
  raw.prune = false;
  auto a = net.forward(tape, x, pruned);
  auto b = net.forward(tape, x, raw);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.value()[i], b.value()[i]);
}

TEST(PrunableForward, ZeroBoundFloatMatchesReference) {
  std::mt19937_64 rng(2);
  Network<float> net(build_cnn_small({}), rng);
  Tensor<float> x({3, 1, 8, 8});
  std::mt19937_64 r2(4);
  std::normal_distribution<float> d;
  for (auto& v : x.storage()) v = d(r2);
  ad::Tape<float> tape;
  ForwardOptions raw;
  raw.prune = false;
  auto a = net.forward(tape, x, {});
  auto b = net.forward(tape, x, raw);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.value()[i], b.value()[i], 1e-6);
}

TEST(PrunableForward, LinearEqualsMatmulWithShrunkWeights) {
  std::mt19937_64 rng(5);
  const std::vector<std::size_t> none;
  NetworkSpec spec = build_mlp(6, none, 4);
  Network<double> net(spec, rng);
  auto& p = net.layer_weights(0);
  p.bound[0] = 0.8;
  auto x = random_input({3, 6}, 6);
  ad::Tape<double> tape;
  auto y = net.forward(tape, x, {});
  prune::refresh_statistics(p);
  const auto ws = prune::hard_shrink(p.weights, static_cast<double>(p.threshold()));
  // Bias is zero-initialized: y = x W~.
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t j = 0; j < 4; ++j) {
      double want = 0;
      for (std::size_t i = 0; i < 6; ++i) want += x[b * 6 + i] * ws[i * 4 + j];
      EXPECT_NEAR(y.value()[b * 4 + j], want, 1e-12);
    }
}

TEST(PrunableForward, FullyPrunedGivesBias) {
  std::mt19937_64 rng(7);
  const std::vector<std::size_t> none;
  Network<double> net(build_mlp(5, none, 3), rng);
  for (auto& ref : net.parameters())
    if (ref.name == "fc1.bias" || ref.name == "fc.bias")
      for (std::size_t i = 0; i < ref.tensor->size(); ++i) (*ref.tensor)[i] = 0.1 * (i + 1);
  net.layer_weights(0).bound[0] = 100.0;
  auto x = random_input({2, 5}, 8);
  ad::Tape<double> tape;
  auto y = net.forward(tape, x, {});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(y.value()[b * 3 + j], 0.1 * (j + 1));
}

TEST(AttainedSparsity, Examples) {
  std::mt19937_64 rng(9);
  Network<double> net(build_cnn_small({}), rng);
  net.refresh_masks();
  auto r = attained_sparsity(net);
  for (const auto& l : r.layers) EXPECT_EQ(l.sparsity, 0.0);
  EXPECT_EQ(r.param_sparsity, 0.0);
  EXPECT_EQ(r.total_params, count_params(net.spec()));

  for (auto* p : net.prunable())
    for (std::size_t i = 0; i < p->mask.size(); ++i) p->mask[i] = i % 2;
  r = attained_sparsity(net);
  EXPECT_DOUBLE_EQ(r.param_sparsity, 0.5);
  EXPECT_DOUBLE_EQ(r.flop_sparsity, 0.5);
  EXPECT_EQ(r.total_params, count_params(net.spec()));
  std::size_t pruned = 0;
  for (const auto& l : r.layers) pruned += l.weights - l.kept_params;
  EXPECT_EQ(r.kept_params, r.total_params - pruned);
  EXPECT_DOUBLE_EQ(r.kept_flops, 0.5 * r.total_flops);
}

TEST(AttainedSparsity, BinarySearchBoundsPerLayer) {
  std::mt19937_64 rng(10);
  SmallCnnOptions o;
  o.conv1_channels = 32;
  o.conv2_channels = 64;
  Network<double> net(build_cnn_small(o), rng);
  for (auto* p : net.prunable()) {
    prune::refresh_statistics(*p);
    const auto sol = prune::solve_bound_binary_search<double>(p->weights.storage(),
                                                              {0.85, 1e-3, 50});
    p->bound[0] = sol.bound / p->sigma;
  }
  net.refresh_masks();
  for (const auto& l : attained_sparsity(net).layers)
    EXPECT_LT(std::abs(l.sparsity - 0.85), 1e-3 + 1e-12) << l.name;
}

}  // namespace
}  // namespace sparsify
