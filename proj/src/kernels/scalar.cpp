// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include <algorithm>
#include <cmath>

#include "sparsify/kernels.hpp"

namespace sparsify::kernels {
namespace {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* ap = a + p * m;
    const T* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T api = ap[i];
      T* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] += acc;
    }
  }
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
double dot(std::size_t n, const T* x, const T* y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return acc;
}

template <typename T>
std::size_t hard_shrink(std::size_t n, const T* w, T center, T threshold,
                        T* out, std::uint8_t* mask) {
  std::size_t pruned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool p = std::abs(w[i] - center) < threshold;
    out[i] = p ? T(0) : w[i];
    mask[i] = p ? 1 : 0;
    pruned += p;
  }
  return pruned;
}

template <typename T>
std::size_t count_below(std::size_t n, const T* w, T center, T threshold) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    count += std::abs(w[i] - center) < threshold;
  return count;
}

template <typename T>
MeanVar<T> mean_var(std::size_t n, const T* x) {
  MeanVar<T> r;
  if (n == 0) return r;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += x[i];
  r.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - r.mean;
    ss += d * d;
  }
  r.variance = ss / static_cast<double>(n);
  return r;
}

template <typename T>
T max_abs(std::size_t n, const T* x) {
  T m = 0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

template <typename T>
void sgd_update(std::size_t n, T* w, const T* g, T* v, T lr, T momentum,
                T decay) {
  const T keep = T(1) - decay;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] + g[i];
    w[i] = keep * w[i] - lr * v[i];
  }
}

template <typename T>
void relu(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(std::size_t n, const T* x, const T* gy, T* gx) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > T(0)) gx[i] += gy[i];
}

template <typename T>
KernelTable<T> make_table() {
  return KernelTable<T>{&gemm_nn<T>,     &gemm_tn<T>,     &gemm_nt<T>,
                        &axpy<T>,        &dot<T>,         &hard_shrink<T>,
                        &count_below<T>, &mean_var<T>,    &max_abs<T>,
                        &sgd_update<T>,  &relu<T>,        &relu_backward<T>};
}

}  // namespace

template <typename T>
const KernelTable<T>& scalar_table() {
  static const KernelTable<T> table = make_table<T>();
  return table;
}

template const KernelTable<float>& scalar_table<float>();
template const KernelTable<double>& scalar_table<double>();

}  // namespace sparsify::kernels
