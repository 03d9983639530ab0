// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sparsify/kernels.hpp"

namespace sparsify::ad {

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T>& param) {
  Node node;
  node.shape = param.shape();
  node.value = param.storage();
  node.param = &param;
  node.requires_grad = param.requires_grad();
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::constant(const Tensor<T>& value) {
  return constant(value.shape(), value.storage());
}

template <typename T>
Var<T> Tape<T>::constant(Shape shape, std::vector<T> value) {
  if (value.size() != numel(shape))
    throw DimensionError("constant value does not match shape " +
                         to_string(shape));
  Node node;
  node.shape = std::move(shape);
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::record(Shape shape, std::vector<T> value,
                       std::vector<std::size_t> inputs, BackwardFn fn) {
  if (value.size() != numel(shape))
    throw DimensionError("op output does not match shape " + to_string(shape));
  Node node;
  node.shape = std::move(shape);
  node.value = std::move(value);
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) throw ContractError("op input is not on the tape");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
std::span<T> Tape<T>::grad_buffer(std::size_t id) {
  Node& node = nodes_.at(id);
  if (!node.requires_grad) return {};
  if (node.grad.empty()) node.grad.assign(node.value.size(), T(0));
  return node.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this || loss.id >= nodes_.size())
    throw ContractError("backward: loss is not on this tape");
  if (nodes_[loss.id].value.size() != 1)
    throw ContractError("backward: loss must be a scalar, got shape " +
                        to_string(nodes_[loss.id].shape));
  if (nodes_[loss.id].requires_grad) {
    grad_buffer(loss.id)[0] = T(1);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (node.grad.empty()) continue;
      if (node.backward) node.backward(*this, node.grad);
      if (node.param != nullptr) node.param->accumulate_grad(node.grad);
    }
  }
  clear();
}

template class Tape<float>;
template class Tape<double>;

namespace {

template <typename T>
void require_same_tape(Var<T> a, Var<T> b) {
  if (a.tape != b.tape) throw ContractError("operands live on different tapes");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require(sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0],
          "matmul: incompatible shapes " + to_string(sa) + " and " +
              to_string(sb));
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  std::vector<T> out(m * n, T(0));
  const auto& kt = kernels::active<T>();
  kt.gemm_nn(m, n, k, a.value().data(), b.value().data(), out.data());
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record({m, n}, std::move(out), {ia, ib},
                        [=](Tape<T>& t, std::span<const T> g) {
                          const auto& kt = kernels::active<T>();
                          if (auto ga = t.grad_buffer(ia); !ga.empty())
                            kt.gemm_nt(m, k, n, g.data(), t.value(ib).data(),
                                       ga.data());
                          if (auto gb = t.grad_buffer(ib); !gb.empty())
                            kt.gemm_tn(k, n, m, t.value(ia).data(), g.data(),
                                       gb.data());
                        });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  require(a.shape() == b.shape(), "add: shape mismatch " + to_string(a.shape()) +
                                      " vs " + to_string(b.shape()));
  std::vector<T> out(a.value().begin(), a.value().end());
  const auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(a.shape(), std::move(out), {ia, ib},
                        [=](Tape<T>& t, std::span<const T> g) {
                          const auto& kt = kernels::active<T>();
                          for (std::size_t id : {ia, ib})
                            if (auto gi = t.grad_buffer(id); !gi.empty())
                              kt.axpy(g.size(), T(1), g.data(), gi.data());
                        });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  require(a.shape() == b.shape(), "mul: shape mismatch " + to_string(a.shape()) +
                                      " vs " + to_string(b.shape()));
  std::vector<T> out(a.value().begin(), a.value().end());
  const auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(a.shape(), std::move(out), {ia, ib},
                        [=](Tape<T>& t, std::span<const T> g) {
                          if (auto ga = t.grad_buffer(ia); !ga.empty()) {
                            const auto bv = t.value(ib);
                            for (std::size_t i = 0; i < g.size(); ++i)
                              ga[i] += g[i] * bv[i];
                          }
                          if (auto gb = t.grad_buffer(ib); !gb.empty()) {
                            const auto av = t.value(ia);
                            for (std::size_t i = 0; i < g.size(); ++i)
                              gb[i] += g[i] * av[i];
                          }
                        });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  std::vector<T> out(a.value().begin(), a.value().end());
  for (T& v : out) v *= factor;
  const std::size_t ia = a.id;
  return a.tape->record(a.shape(), std::move(out), {ia},
                        [=](Tape<T>& t, std::span<const T> g) {
                          if (auto ga = t.grad_buffer(ia); !ga.empty())
                            kernels::active<T>().axpy(g.size(), factor,
                                                      g.data(), ga.data());
                        });
}

template <typename T>
Var<T> relu(Var<T> a) {
  std::vector<T> out(a.numel());
  kernels::active<T>().relu(out.size(), a.value().data(), out.data());
  const std::size_t ia = a.id;
  return a.tape->record(a.shape(), std::move(out), {ia},
                        [=](Tape<T>& t, std::span<const T> g) {
                          if (auto ga = t.grad_buffer(ia); !ga.empty())
                            kernels::active<T>().relu_backward(
                                g.size(), t.value(ia).data(), g.data(),
                                ga.data());
                        });
}

template <typename T>
Var<T> bias_add(Var<T> x, Var<T> bias) {
  require_same_tape(x, bias);
  const Shape& sx = x.shape();
  require(sx.size() >= 2 && bias.shape().size() == 1 &&
              bias.shape()[0] == sx[1],
          "bias_add: bias " + to_string(bias.shape()) + " does not match " +
              to_string(sx));
  const std::size_t batch = sx[0], channels = sx[1];
  const std::size_t inner = x.numel() / (batch * channels);
  std::vector<T> out(x.value().begin(), x.value().end());
  const auto bv = bias.value();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      T* o = out.data() + (b * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) o[i] += bv[c];
    }
  const std::size_t ix = x.id, ib = bias.id;
  return x.tape->record(
      sx, std::move(out), {ix, ib}, [=](Tape<T>& t, std::span<const T> g) {
        if (auto gx = t.grad_buffer(ix); !gx.empty())
          kernels::active<T>().axpy(g.size(), T(1), g.data(), gx.data());
        if (auto gb = t.grad_buffer(ib); !gb.empty())
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < channels; ++c) {
              const T* gi = g.data() + (b * channels + c) * inner;
              T acc = 0;
              for (std::size_t i = 0; i < inner; ++i) acc += gi[i];
              gb[c] += acc;
            }
      });
}

namespace {

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
};

template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
              static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 &&
                                iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.wo + ox] =
                inside ? x[(c * g.h + static_cast<std::size_t>(iy)) * g.w +
                           static_cast<std::size_t>(ix)]
                       : T(0);
          }
        }
      }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* x) {
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
              static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            x[(c * g.h + static_cast<std::size_t>(iy)) * g.w +
              static_cast<std::size_t>(ix)] += row[oy * g.wo + ox];
          }
        }
      }
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, std::size_t stride, std::size_t padding) {
  require_same_tape(x, w);
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  require(sx.size() == 4 && sw.size() == 4 && sx[1] == sw[1],
          "conv2d: input " + to_string(sx) + " incompatible with kernel " +
              to_string(sw));
  require(stride > 0, "conv2d: stride must be positive");
  ConvGeometry g{sx[0], sx[1], sx[2], sx[3], sw[0], sw[2], sw[3],
                 stride, padding, 0, 0};
  require(g.h + 2 * padding >= g.kh && g.w + 2 * padding >= g.kw,
          "conv2d: kernel " + to_string(sw) + " does not fit padded input " +
              to_string(sx) + " (non-positive output extent)");
  g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
  g.wo = (g.w + 2 * padding - g.kw) / stride + 1;

  const std::size_t in_stride = g.cin * g.h * g.w;
  const std::size_t out_stride = g.cout * g.pixels();
  const std::size_t col_size = g.patch() * g.pixels();
  std::vector<T> cols(g.batch * col_size);
  std::vector<T> out(g.batch * out_stride, T(0));
  const auto& kt = kernels::active<T>();
  const T* xv = x.value().data();
  const T* wv = w.value().data();
  for (std::size_t b = 0; b < g.batch; ++b) {
    T* col = cols.data() + b * col_size;
    im2col(g, xv + b * in_stride, col);
    kt.gemm_nn(g.cout, g.pixels(), g.patch(), wv, col,
               out.data() + b * out_stride);
  }

  const std::size_t ix = x.id, iw = w.id;
  return x.tape->record(
      {g.batch, g.cout, g.ho, g.wo}, std::move(out), {ix, iw},
      [=, cols = std::move(cols)](Tape<T>& t, std::span<const T> grad) {
        const auto& kt = kernels::active<T>();
        auto gw = t.grad_buffer(iw);
        auto gx = t.grad_buffer(ix);
        std::vector<T> dcol(gx.empty() ? 0 : col_size);
        for (std::size_t b = 0; b < g.batch; ++b) {
          const T* gb = grad.data() + b * out_stride;
          if (!gw.empty())
            kt.gemm_nt(g.cout, g.patch(), g.pixels(), gb,
                       cols.data() + b * col_size, gw.data());
          if (!gx.empty()) {
            std::fill(dcol.begin(), dcol.end(), T(0));
            kt.gemm_tn(g.patch(), g.pixels(), g.cout, t.value(iw).data(), gb,
                       dcol.data());
            col2im_add(g, dcol.data(), gx.data() + b * in_stride);
          }
        }
      });
}

template <typename T>
Var<T> global_avg_pool(Var<T> x) {
  const Shape& sx = x.shape();
  require(sx.size() == 4, "global_avg_pool: expected [B,C,H,W], got " +
                              to_string(sx));
  const std::size_t rows = sx[0] * sx[1], area = sx[2] * sx[3];
  std::vector<T> out(rows);
  const auto xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = 0;
    for (std::size_t i = 0; i < area; ++i) acc += xv[r * area + i];
    out[r] = acc / static_cast<T>(area);
  }
  const std::size_t ix = x.id;
  return x.tape->record({sx[0], sx[1]}, std::move(out), {ix},
                        [=](Tape<T>& t, std::span<const T> g) {
                          auto gx = t.grad_buffer(ix);
                          if (gx.empty()) return;
                          const T inv = T(1) / static_cast<T>(area);
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t i = 0; i < area; ++i)
                              gx[r * area + i] += g[r] * inv;
                        });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  require(numel(shape) == x.numel(), "reshape: " + to_string(x.shape()) +
                                         " cannot become " + to_string(shape));
  std::vector<T> out(x.value().begin(), x.value().end());
  const std::size_t ix = x.id;
  return x.tape->record(std::move(shape), std::move(out), {ix},
                        [=](Tape<T>& t, std::span<const T> g) {
                          if (auto gx = t.grad_buffer(ix); !gx.empty())
                            kernels::active<T>().axpy(g.size(), T(1), g.data(),
                                                      gx.data());
                        });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T acc = 0;
  for (T v : x.value()) acc += v;
  const std::size_t ix = x.id;
  return x.tape->record({1}, {acc}, {ix},
                        [=](Tape<T>& t, std::span<const T> g) {
                          auto gx = t.grad_buffer(ix);
                          for (T& v : gx) v += g[0];
                        });
}

template <typename T>
Var<T> mean(Var<T> x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  require(s.size() == 2 && s[0] == labels.size(),
          "cross_entropy: logits " + to_string(s) + " vs " +
              std::to_string(labels.size()) + " labels");
  const std::size_t batch = s[0], classes = s[1];
  const auto z = logits.value();
  std::vector<T> probs(batch * classes);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw ContractError("cross_entropy: label " + std::to_string(label) +
                          " out of range");
    const T* zb = z.data() + b * classes;
    const T zmax = *std::max_element(zb, zb + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(double(zb[c] - zmax));
    const double log_denom = std::log(denom);
    for (std::size_t c = 0; c < classes; ++c)
      probs[b * classes + c] =
          static_cast<T>(std::exp(double(zb[c] - zmax) - log_denom));
    loss += log_denom - double(zb[label] - zmax);
  }
  loss /= static_cast<double>(batch);
  std::vector<int> lab(labels.begin(), labels.end());
  const std::size_t iz = logits.id;
  return logits.tape->record(
      {1}, {static_cast<T>(loss)}, {iz},
      [=, probs = std::move(probs), lab = std::move(lab)](
          Tape<T>& t, std::span<const T> g) {
        auto gz = t.grad_buffer(iz);
        if (gz.empty()) return;
        const T scale_ = g[0] / static_cast<T>(batch);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < classes; ++c) {
            const T onehot = static_cast<int>(c) == lab[b] ? T(1) : T(0);
            gz[b * classes + c] += scale_ * (probs[b * classes + c] - onehot);
          }
      });
}

template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta,
                  std::vector<T>& running_mean, std::vector<T>& running_var,
                  const BatchNormOptions& options) {
  require_same_tape(x, gamma);
  require_same_tape(x, beta);
  const Shape& sx = x.shape();
  require(sx.size() >= 2, "batch_norm: input must have a channel axis");
  const std::size_t batch = sx[0], channels = sx[1];
  const std::size_t inner = x.numel() / (batch * channels);
  require(gamma.shape() == Shape{channels} && beta.shape() == Shape{channels},
          "batch_norm: affine parameters must be [" + std::to_string(channels) +
              "]");
  require(running_mean.size() == channels && running_var.size() == channels,
          "batch_norm: running statistics have wrong length");
  const std::size_t count = batch * inner;
  const auto xv = x.value();
  const auto gv = gamma.value();
  const auto bv = beta.value();

  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(channels);
  std::vector<T> out(x.numel());
  for (std::size_t c = 0; c < channels; ++c) {
    double mu, var;
    if (options.training) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i)
          s += xv[(b * channels + c) * inner + i];
      mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = xv[(b * channels + c) * inner + i] - mu;
          ss += d * d;
        }
      var = ss / static_cast<double>(count);
      const double unbiased =
          count > 1 ? ss / static_cast<double>(count - 1) : var;
      running_mean[c] = static_cast<T>((1.0 - options.momentum) * running_mean[c] +
                                       options.momentum * mu);
      running_var[c] = static_cast<T>((1.0 - options.momentum) * running_var[c] +
                                      options.momentum * unbiased);
    } else {
      mu = running_mean[c];
      var = running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + options.eps);
    inv_std[c] = static_cast<T>(is);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = (b * channels + c) * inner + i;
        xhat[k] = static_cast<T>((xv[k] - mu) * is);
        out[k] = gv[c] * xhat[k] + bv[c];
      }
  }

  const std::size_t ix = x.id, ig = gamma.id, ib = beta.id;
  const bool training = options.training;
  return x.tape->record(
      sx, std::move(out), {ix, ig, ib},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape<T>& t, std::span<const T> g) {
        const auto gv = t.value(ig);
        auto gx = t.grad_buffer(ix);
        auto gg = t.grad_buffer(ig);
        auto gb = t.grad_buffer(ib);
        for (std::size_t c = 0; c < channels; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = (b * channels + c) * inner + i;
              sum_g += g[k];
              sum_gx += double(g[k]) * xhat[k];
            }
          if (!gb.empty()) gb[c] += static_cast<T>(sum_g);
          if (!gg.empty()) gg[c] += static_cast<T>(sum_gx);
          if (gx.empty()) continue;
          const double scale_ = double(gv[c]) * inv_std[c];
          const double m = static_cast<double>(count);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = (b * channels + c) * inner + i;
              if (training)
                gx[k] += static_cast<T>(
                    scale_ * (g[k] - sum_g / m - xhat[k] * sum_gx / m));
              else
                gx[k] += static_cast<T>(scale_ * g[k]);
            }
        }
      });
}

#define SPARSIFY_INSTANTIATE_OPS(T)                                          \
  template Var<T> matmul(Var<T>, Var<T>);                                    \
  template Var<T> add(Var<T>, Var<T>);                                       \
  template Var<T> mul(Var<T>, Var<T>);                                       \
  template Var<T> scale(Var<T>, T);                                          \
  template Var<T> relu(Var<T>);                                              \
  template Var<T> bias_add(Var<T>, Var<T>);                                  \
  template Var<T> conv2d(Var<T>, Var<T>, std::size_t, std::size_t);          \
  template Var<T> global_avg_pool(Var<T>);                                   \
  template Var<T> reshape(Var<T>, Shape);                                    \
  template Var<T> sum(Var<T>);                                               \
  template Var<T> mean(Var<T>);                                              \
  template Var<T> cross_entropy(Var<T>, std::span<const int>);               \
  template Var<T> batch_norm(Var<T>, Var<T>, Var<T>, std::vector<T>&,        \
                             std::vector<T>&, const BatchNormOptions&);

SPARSIFY_INSTANTIATE_OPS(float)
SPARSIFY_INSTANTIATE_OPS(double)

#undef SPARSIFY_INSTANTIATE_OPS

}  // namespace sparsify::ad
