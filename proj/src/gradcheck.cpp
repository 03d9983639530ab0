// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "sparsify/autodiff.hpp"
#include "sparsify/prune.hpp"
#include "sparsify/sparsity_loss.hpp"

namespace sparsify {

namespace {

using V = ad::Var<double>;
using Fn = std::function<V(ad::Tape<double>&, const std::vector<V>&)>;

constexpr double kStep = 1e-6;
constexpr double kOpTol = 1e-5;
constexpr double kLossTol = 1e-6;

double rel_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
  return std::sqrt(diff) / scale;
}

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor<double>(std::move(shape), std::move(v));
}

// Values in +-[0.2, 1] so a small step never crosses the ReLU kink.
Tensor<double> away_from_zero(Shape shape, std::mt19937_64& rng) {
  Tensor<double> t = random_tensor(std::move(shape), rng, 0.2, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (double& x : t.values()) x = sign(rng) ? x : -x;
  return t;
}

// Scalarizes f with a fixed random projection and compares the tape gradient
// of every input with central differences.
GradCheckResult check(const std::string& name, std::vector<Tensor<double>> inputs,
                      const Fn& f, std::mt19937_64& rng, double tol = kOpTol) {
  std::vector<double> projection;
  auto scalar = [&](ad::Tape<double>& tape, const std::vector<V>& vars) {
    V out = f(tape, vars);
    if (out.numel() == 1) return out;
    if (projection.empty()) projection = random_tensor(out.shape(), rng).storage();
    return ad::sum(ad::mul(out, tape.constant(out.shape(), projection)));
  };

  std::vector<double> analytic;
  {
    ad::Tape<double> tape;
    std::vector<V> vars;
    for (auto& t : inputs) {
      t.set_requires_grad(true);
      t.zero_grad();
      vars.push_back(tape.leaf(t));
    }
    tape.backward(scalar(tape, vars));
    for (auto& t : inputs)
      analytic.insert(analytic.end(), t.grad().begin(), t.grad().end());
  }
  auto eval = [&]() {
    ad::Tape<double> tape;
    std::vector<V> vars;
    for (auto& t : inputs) vars.push_back(tape.constant(t));
    return scalar(tape, vars).item();
  };
  std::vector<double> numeric;
  for (auto& t : inputs)
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x = t[i];
      t[i] = x + kStep;
      const double up = eval();
      t[i] = x - kStep;
      const double down = eval();
      t[i] = x;
      numeric.push_back((up - down) / (2.0 * kStep));
    }
  GradCheckResult r{name, rel_error(analytic, numeric), tol, false};
  r.passed = r.error <= tol;
  return r;
}

// Pruned weights for relative bound b2 when the mask was fixed at bound b.
std::vector<double> surrogate(const prune::PrunableParam<double>& p, double b2) {
  std::vector<double> w(p.weights.storage());
  const double b = p.bound[0];
  for (std::size_t i = 0; i < w.size(); ++i)
    if (p.mask[i]) w[i] *= 1.0 - b2 / b;
  return w;
}

prune::PrunableParam<double> make_layer(const std::string& name, Shape shape,
                                        double sparsity, std::mt19937_64& rng) {
  prune::PrunableParam<double> p;
  p.name = name;
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> w(numel(shape));
  for (double& x : w) x = n01(rng);
  p.weights = Tensor<double>(shape, std::move(w));
  p.weights.set_requires_grad(true);
  p.bound[0] = std::numbers::sqrt2 * erf_inv_scalar(sparsity);
  p.bound.set_requires_grad(true);
  p.mask.assign(p.weights.size(), 0);
  return p;
}

GradCheckResult check_ste_bound(std::mt19937_64& rng) {
  auto p = make_layer("fc", {5, 4}, 0.5, rng);
  const Tensor<double> x = random_tensor({3, 5}, rng);
  const std::vector<int> labels{0, 3, 1};
  double analytic = 0.0;
  {
    ad::Tape<double> tape;
    const V w = prune::prune(tape, p, prune::GradientMode::StraightThrough);
    const V loss = ad::cross_entropy(ad::matmul(tape.constant(x), w),
                                     std::span<const int>(labels));
    p.bound.zero_grad();
    tape.backward(loss);
    analytic = p.bound.grad()[0];
  }
  auto eval = [&](double b2) {
    ad::Tape<double> tape;
    const V w = tape.constant(p.weights.shape(), surrogate(p, b2));
    return ad::cross_entropy(ad::matmul(tape.constant(x), w),
                             std::span<const int>(labels))
        .item();
  };
  const double b = p.bound[0];
  const double numeric = (eval(b + kStep) - eval(b - kStep)) / (2.0 * kStep);
  GradCheckResult r{"ste_bound", rel_error({analytic}, {numeric}), kOpTol, false};
  r.passed = r.error <= kOpTol;
  return r;
}

GradCheckResult check_loss(const std::string& name,
                           const sparsity::SparsityObjective& obj,
                           const sparsity::LayerSparsityState& state) {
  const auto value = sparsity::sparsity_penalty(state, obj);
  std::vector<double> numeric;
  for (std::size_t i = 0; i < state.size(); ++i) {
    auto up = state, down = state;
    up.bounds[i] += kStep;
    down.bounds[i] -= kStep;
    numeric.push_back((sparsity::sparsity_penalty(up, obj).value -
                       sparsity::sparsity_penalty(down, obj).value) /
                      (2.0 * kStep));
  }
  GradCheckResult r{name, rel_error(value.grad, numeric), kLossTol, false};
  r.passed = r.error <= kLossTol;
  return r;
}

GradCheckResult check_total_loss(std::mt19937_64& rng) {
  auto p1 = make_layer("fc1", {6, 8}, 0.4, rng);
  auto p2 = make_layer("fc2", {8, 3}, 0.6, rng);
  const Tensor<double> x = random_tensor({4, 6}, rng);
  const std::vector<int> labels{0, 2, 1, 2};
  sparsity::SparsityObjective obj;
  obj.variant = sparsity::Variant::BudgetQuadratic;
  obj.lambda_p = 3.0;
  obj.lambda_f = 2.0;
  obj.budget_p = 0.3;
  obj.budget_f = 0.4;
  obj.contrib_p = {48.0 / 72.0, 24.0 / 72.0};
  obj.contrib_f = {0.5, 0.5};

  std::vector<double> analytic;
  std::vector<double> sigmas;
  {
    ad::Tape<double> tape;
    const V w1 = prune::prune(tape, p1, prune::GradientMode::StraightThrough);
    const V w2 = prune::prune(tape, p2, prune::GradientMode::StraightThrough);
    const V h = ad::relu(ad::matmul(tape.constant(x), w1));
    const V task = ad::cross_entropy(ad::matmul(h, w2), std::span<const int>(labels));
    const std::vector<V> bounds{tape.leaf(p1.bound), tape.leaf(p2.bound)};
    sigmas = {p1.sigma, p2.sigma};
    p1.bound.zero_grad();
    p2.bound.zero_grad();
    tape.backward(sparsity::total_loss<double>(task, bounds, sigmas, obj));
    analytic = {p1.bound.grad()[0], p2.bound.grad()[0]};
  }
  auto eval = [&](double b1, double b2) {
    ad::Tape<double> tape;
    const V w1 = tape.constant(p1.weights.shape(), surrogate(p1, b1));
    const V w2 = tape.constant(p2.weights.shape(), surrogate(p2, b2));
    const V h = ad::relu(ad::matmul(tape.constant(x), w1));
    const double task =
        ad::cross_entropy(ad::matmul(h, w2), std::span<const int>(labels)).item();
    sparsity::LayerSparsityState st;
    st.bounds = {b1 * sigmas[0], b2 * sigmas[1]};
    st.sigmas = sigmas;
    return task + sparsity::sparsity_penalty(st, obj).value;
  };
  const double b1 = p1.bound[0], b2 = p2.bound[0];
  const std::vector<double> numeric{
      (eval(b1 + kStep, b2) - eval(b1 - kStep, b2)) / (2.0 * kStep),
      (eval(b1, b2 + kStep) - eval(b1, b2 - kStep)) / (2.0 * kStep)};
  GradCheckResult r{"total_loss_network", rel_error(analytic, numeric), kOpTol, false};
  r.passed = r.error <= kOpTol;
  return r;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> out;
  const auto arg = [](const std::vector<V>& v, std::size_t i) { return v[i]; };

  out.push_back(check("matmul", {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)},
                      [&](auto&, const auto& v) { return ad::matmul(arg(v, 0), arg(v, 1)); },
                      rng));
  out.push_back(check("add", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)},
                      [&](auto&, const auto& v) { return ad::add(arg(v, 0), arg(v, 1)); },
                      rng));
  out.push_back(check("mul", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)},
                      [&](auto&, const auto& v) { return ad::mul(arg(v, 0), arg(v, 1)); },
                      rng));
  out.push_back(check("scale", {random_tensor({5}, rng)},
                      [&](auto&, const auto& v) { return ad::scale(arg(v, 0), 1.7); }, rng));
  out.push_back(check("relu", {away_from_zero({3, 4}, rng)},
                      [&](auto&, const auto& v) { return ad::relu(arg(v, 0)); }, rng));
  out.push_back(check("bias_add_2d", {random_tensor({4, 5}, rng), random_tensor({5}, rng)},
                      [&](auto&, const auto& v) { return ad::bias_add(arg(v, 0), arg(v, 1)); },
                      rng));
  out.push_back(check("bias_add_4d",
                      {random_tensor({2, 3, 4, 4}, rng), random_tensor({3}, rng)},
                      [&](auto&, const auto& v) { return ad::bias_add(arg(v, 0), arg(v, 1)); },
                      rng));
  out.push_back(check("conv2d_3x3_s1_p1",
                      {random_tensor({2, 3, 8, 8}, rng), random_tensor({4, 3, 3, 3}, rng)},
                      [&](auto&, const auto& v) { return ad::conv2d(arg(v, 0), arg(v, 1), 1, 1); },
                      rng));
  out.push_back(check("conv2d_3x3_s2_p1",
                      {random_tensor({2, 2, 7, 7}, rng), random_tensor({3, 2, 3, 3}, rng)},
                      [&](auto&, const auto& v) { return ad::conv2d(arg(v, 0), arg(v, 1), 2, 1); },
                      rng));
  out.push_back(check("conv2d_1x1_s2_p0",
                      {random_tensor({2, 3, 6, 6}, rng), random_tensor({5, 3, 1, 1}, rng)},
                      [&](auto&, const auto& v) { return ad::conv2d(arg(v, 0), arg(v, 1), 2, 0); },
                      rng));
  out.push_back(check("global_avg_pool", {random_tensor({2, 3, 4, 5}, rng)},
                      [&](auto&, const auto& v) { return ad::global_avg_pool(arg(v, 0)); },
                      rng));
  out.push_back(check("reshape", {random_tensor({2, 6}, rng)},
                      [&](auto&, const auto& v) { return ad::reshape(arg(v, 0), {3, 4}); },
                      rng));
  out.push_back(check("sum", {random_tensor({3, 3}, rng)},
                      [&](auto&, const auto& v) { return ad::sum(arg(v, 0)); }, rng));
  out.push_back(check("mean", {random_tensor({3, 3}, rng)},
                      [&](auto&, const auto& v) { return ad::mean(arg(v, 0)); }, rng));
  const std::vector<int> labels{1, 0, 4, 2};
  out.push_back(check("cross_entropy", {random_tensor({4, 5}, rng, -2.0, 2.0)},
                      [&](auto&, const auto& v) {
                        return ad::cross_entropy(arg(v, 0), std::span<const int>(labels));
                      },
                      rng));
  for (bool training : {true, false}) {
    const std::vector<double> rm0{0.1, -0.2, 0.3}, rv0{0.9, 1.2, 0.7};
    out.push_back(check(training ? "batch_norm_train" : "batch_norm_eval",
                        {random_tensor({4, 3, 2, 2}, rng), random_tensor({3}, rng, 0.5, 1.5),
                         random_tensor({3}, rng)},
                        [&, training](auto&, const auto& v) {
                          std::vector<double> rm = rm0, rv = rv0;
                          ad::BatchNormOptions o;
                          o.training = training;
                          return ad::batch_norm(arg(v, 0), arg(v, 1), arg(v, 2), rm, rv, o);
                        },
                        rng));
  }
  out.push_back(check_ste_bound(rng));

  sparsity::LayerSparsityState state;
  state.bounds = {0.3, 1.1, 0.05};
  state.sigmas = {0.5, 0.8, 0.1};
  sparsity::SparsityObjective obj;
  obj.variant = sparsity::Variant::Avg;
  obj.lambda = 1.0;
  out.push_back(check_loss("avg_density_loss", obj, state));
  obj.variant = sparsity::Variant::Weighted;
  obj.contrib_p = {0.6, 0.3, 0.1};
  out.push_back(check_loss("weighted_density_loss", obj, state));
  obj.variant = sparsity::Variant::BudgetQuadratic;
  obj.lambda_p = 2.0;
  obj.lambda_f = 1.5;
  obj.budget_p = 0.15;
  obj.budget_f = 0.3;
  obj.contrib_f = {0.2, 0.2, 0.6};
  out.push_back(check_loss("budget_quadratic_loss", obj, state));
  obj.variant = sparsity::Variant::BudgetHinge;
  out.push_back(check_loss("budget_hinge_loss", obj, state));
  out.push_back(check_total_loss(rng));
  return out;
}

}  // namespace sparsify
