// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/network.hpp"

#include <cmath>

namespace sparsify {

template <typename T>
ad::Var<T> prunable_forward(ad::Tape<T>& tape, const LayerSpec& layer,
                            ad::Var<T> x, prune::PrunableParam<T>& p,
                            Tensor<T>* bias, const ForwardOptions& options) {
  if (!layer.has_weights())
    throw ContractError("prunable_forward: layer '" + layer.name +
                        "' has no weights");
  const ad::Var<T> w = options.prune && layer.prunable
                           ? prune::prune(tape, p, options.gradient)
                           : tape.leaf(p.weights);
  ad::Var<T> y;
  if (layer.kind == LayerKind::Conv2d) {
    y = ad::conv2d(x, w, layer.stride, layer.padding);
  } else {
    if (x.shape().size() == 4) x = ad::reshape(x, {x.shape()[0], x.shape()[1]});
    y = ad::matmul(x, w);
  }
  if (bias != nullptr && !bias->empty()) y = ad::bias_add(y, tape.leaf(*bias));
  return y;
}

template <typename T>
Network<T>::Network(NetworkSpec spec, std::mt19937_64& rng,
                    prune::MeanMode mean_mode)
    : spec_(std::move(spec)) {
  spec_.finalize();
  state_.resize(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    LayerState& s = state_[i];
    if (l.has_weights()) {
      Shape shape = l.kind == LayerKind::Conv2d
                        ? Shape{l.out_channels, l.in_channels, l.kernel, l.kernel}
                        : Shape{l.in_channels, l.out_channels};
      const std::size_t fan_in = l.kind == LayerKind::Conv2d
                                     ? l.in_channels * l.kernel * l.kernel
                                     : l.in_channels;
      std::normal_distribution<double> init(0.0, std::sqrt(2.0 / double(fan_in)));
      std::vector<T> w(numel(shape));
      for (T& v : w) v = static_cast<T>(init(rng));
      s.weight.name = l.name;
      s.weight.weights = Tensor<T>(shape, std::move(w));
      s.weight.weights.set_requires_grad(true);
      s.weight.mean_mode = mean_mode;
      s.weight.mask.assign(s.weight.weights.size(), 0);
      if (l.has_bias) {
        s.bias = Tensor<T>(Shape{l.out_channels});
        s.bias.set_requires_grad(true);
      }
    } else if (l.kind == LayerKind::BatchNorm) {
      s.gamma = Tensor<T>(Shape{l.out_channels}, T(1));
      s.beta = Tensor<T>(Shape{l.out_channels}, T(0));
      s.gamma.set_requires_grad(true);
      s.beta.set_requires_grad(true);
      s.running_mean.assign(l.out_channels, T(0));
      s.running_var.assign(l.out_channels, T(1));
    }
  }
}

template <typename T>
ad::Var<T> Network<T>::forward(ad::Tape<T>& tape, const Tensor<T>& input,
                               const ForwardOptions& options) {
  const Shape& in = input.shape();
  const bool image = spec_.image_input();
  const bool ok = image ? (in.size() == 4 && in[1] == spec_.input_channels &&
                           in[2] == spec_.input_h && in[3] == spec_.input_w)
                        : (in.size() == 2 && in[1] == spec_.input_channels);
  if (!ok)
    throw DimensionError("network '" + spec_.arch + "' cannot consume input " +
                         to_string(in));
  const ad::Var<T> x = tape.constant(input);
  std::vector<ad::Var<T>> outs(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    LayerState& s = state_[i];
    auto src = [&](std::size_t k) {
      const int idx = l.inputs[k];
      return idx < 0 ? x : outs[static_cast<std::size_t>(idx)];
    };
    switch (l.kind) {
      case LayerKind::Conv2d:
      case LayerKind::Linear:
        outs[i] = prunable_forward(tape, l, src(0), s.weight,
                                   l.has_bias ? &s.bias : nullptr, options);
        break;
      case LayerKind::BatchNorm: {
        ad::BatchNormOptions bn;
        bn.training = options.training;
        outs[i] = ad::batch_norm(src(0), tape.leaf(s.gamma), tape.leaf(s.beta),
                                 s.running_mean, s.running_var, bn);
        break;
      }
      case LayerKind::Activation: outs[i] = ad::relu(src(0)); break;
      case LayerKind::Pool: outs[i] = ad::global_avg_pool(src(0)); break;
      case LayerKind::ResidualAdd: outs[i] = ad::add(src(0), src(1)); break;
    }
  }
  return outs.back();
}

template <typename T>
std::vector<prune::PrunableParam<T>*> Network<T>::prunable() {
  std::vector<prune::PrunableParam<T>*> out;
  for (std::size_t i : spec_.prunable_layers()) out.push_back(&state_[i].weight);
  return out;
}

template <typename T>
std::vector<const prune::PrunableParam<T>*> Network<T>::prunable() const {
  std::vector<const prune::PrunableParam<T>*> out;
  for (std::size_t i : spec_.prunable_layers()) out.push_back(&state_[i].weight);
  return out;
}

template <typename T>
prune::PrunableParam<T>& Network<T>::layer_weights(std::size_t index) {
  if (index >= spec_.layers.size() || !spec_.layers[index].has_weights())
    throw ContractError("layer " + std::to_string(index) + " has no weights");
  return state_[index].weight;
}

template <typename T>
std::vector<ParamRef<T>> Network<T>::parameters() {
  std::vector<ParamRef<T>> refs;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    LayerState& s = state_[i];
    if (l.has_weights()) {
      refs.push_back({l.name + ".weight", &s.weight.weights, ParamKind::Weight});
      if (l.has_bias) refs.push_back({l.name + ".bias", &s.bias, ParamKind::Bias});
      if (l.prunable)
        refs.push_back({l.name + ".bound", &s.weight.bound, ParamKind::Bound});
    } else if (l.kind == LayerKind::BatchNorm) {
      refs.push_back({l.name + ".gamma", &s.gamma, ParamKind::Norm});
      refs.push_back({l.name + ".beta", &s.beta, ParamKind::Norm});
    }
  }
  return refs;
}

template <typename T>
std::vector<BufferRef<T>> Network<T>::buffers() {
  std::vector<BufferRef<T>> refs;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i)
    if (spec_.layers[i].kind == LayerKind::BatchNorm) {
      refs.push_back({spec_.layers[i].name + ".running_mean",
                      &state_[i].running_mean});
      refs.push_back({spec_.layers[i].name + ".running_var",
                      &state_[i].running_var});
    }
  return refs;
}

template <typename T>
void Network<T>::refresh_masks() {
  for (auto* p : prunable()) (void)prune::ste_prune_forward(*p);
}

template <typename T>
void Network<T>::set_bounds_trainable(bool on) {
  for (auto* p : prunable()) p->bound.set_requires_grad(on);
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto& ref : parameters())
    if (ref.tensor->requires_grad()) ref.tensor->zero_grad();
}

std::vector<double> SparsityReport::layer_sparsity() const {
  std::vector<double> out;
  for (const LayerReport& l : layers)
    if (l.prunable) out.push_back(l.sparsity);
  return out;
}

template <typename T>
SparsityReport attained_sparsity(const Network<T>& net) {
  const NetworkSpec& spec = net.spec();
  const auto params = net.prunable();
  SparsityReport r;
  r.total_params = count_params(spec);
  r.total_flops = static_cast<double>(count_flops(spec));
  double prunable_w = 0.0, prunable_f = 0.0, kept_w = 0.0, kept_f = 0.0;
  std::size_t k = 0, pruned_total = 0;
  for (const LayerSpec& l : spec.layers) {
    if (!l.has_weights()) continue;
    LayerReport lr;
    lr.name = l.name;
    lr.prunable = l.prunable;
    lr.weights = l.weight_count();
    lr.dense_flops = static_cast<double>(l.flop_count);
    std::size_t pruned = 0;
    if (l.prunable) {
      const prune::PrunableParam<T>& p = *params[k++];
      pruned = p.pruned_count();
      lr.sparsity = p.attained_sparsity();
      lr.bound = p.relative_bound();
      prunable_w += static_cast<double>(lr.weights);
      prunable_f += lr.dense_flops;
      kept_w += static_cast<double>(lr.weights - pruned);
      kept_f += (1.0 - lr.sparsity) * lr.dense_flops;
    }
    pruned_total += pruned;
    lr.kept_params = lr.weights - pruned;
    lr.kept_flops = (1.0 - lr.sparsity) * lr.dense_flops;
    r.layers.push_back(std::move(lr));
  }
  r.param_sparsity = prunable_w > 0.0 ? 1.0 - kept_w / prunable_w : 0.0;
  r.flop_sparsity = prunable_f > 0.0 ? 1.0 - kept_f / prunable_f : 0.0;
  r.kept_params = r.total_params - pruned_total;
  r.kept_flops = r.total_flops - (prunable_f - kept_f);
  return r;
}

template SparsityReport attained_sparsity(const Network<float>&);
template SparsityReport attained_sparsity(const Network<double>&);
template class Network<float>;
template class Network<double>;
template ad::Var<float> prunable_forward(ad::Tape<float>&, const LayerSpec&,
                                         ad::Var<float>,
                                         prune::PrunableParam<float>&,
                                         Tensor<float>*, const ForwardOptions&);
template ad::Var<double> prunable_forward(ad::Tape<double>&, const LayerSpec&,
                                          ad::Var<double>,
                                          prune::PrunableParam<double>&,
                                          Tensor<double>*, const ForwardOptions&);

}  // namespace sparsify
