// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "sparsify/kernels.hpp"

namespace sparsify::kernels {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float x) { return _mm256_set1_ps(x); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
  static reg abs(reg a) { return _mm256_andnot_ps(_mm256_set1_ps(-0.0f), a); }
  static reg lt(reg a, reg b) { return _mm256_cmp_ps(a, b, _CMP_LT_OQ); }
  static reg gt(reg a, reg b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_ps(a, b); }
  static reg andnot(reg m, reg a) { return _mm256_andnot_ps(m, a); }
  static unsigned movemask(reg m) {
    return static_cast<unsigned>(_mm256_movemask_ps(m));
  }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
  static float hmax(reg v) {
    alignas(32) float buf[8];
    _mm256_store_ps(buf, v);
    return *std::max_element(buf, buf + 8);
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double x) { return _mm256_set1_pd(x); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
  static reg abs(reg a) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), a); }
  static reg lt(reg a, reg b) { return _mm256_cmp_pd(a, b, _CMP_LT_OQ); }
  static reg gt(reg a, reg b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_pd(a, b); }
  static reg andnot(reg m, reg a) { return _mm256_andnot_pd(m, a); }
  static unsigned movemask(reg m) {
    return static_cast<unsigned>(_mm256_movemask_pd(m));
  }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
  static double hmax(reg v) {
    alignas(32) double buf[4];
    _mm256_store_pd(buf, v);
    return *std::max_element(buf, buf + 4);
  }
};

// Row-panel update shared by gemm_nn and gemm_tn: c[0..n) += sum_p a(p) * b_p.
// `a_at(p)` yields the broadcast scalar for step p.
template <typename T, typename AAt>
inline void gemm_row(std::size_t n, std::size_t k, AAt a_at, const T* b,
                     T* c) {
  using V = Vec<T>;
  constexpr std::size_t w = V::width;
  std::size_t j = 0;
  for (; j + 4 * w <= n; j += 4 * w) {
    auto c0 = V::load(c + j);
    auto c1 = V::load(c + j + w);
    auto c2 = V::load(c + j + 2 * w);
    auto c3 = V::load(c + j + 3 * w);
    for (std::size_t p = 0; p < k; ++p) {
      const auto av = V::set1(a_at(p));
      const T* bp = b + p * n + j;
      c0 = V::fmadd(av, V::load(bp), c0);
      c1 = V::fmadd(av, V::load(bp + w), c1);
      c2 = V::fmadd(av, V::load(bp + 2 * w), c2);
      c3 = V::fmadd(av, V::load(bp + 3 * w), c3);
    }
    V::store(c + j, c0);
    V::store(c + j + w, c1);
    V::store(c + j + 2 * w, c2);
    V::store(c + j + 3 * w, c3);
  }
  for (; j + w <= n; j += w) {
    auto c0 = V::load(c + j);
    for (std::size_t p = 0; p < k; ++p)
      c0 = V::fmadd(V::set1(a_at(p)), V::load(b + p * n + j), c0);
    V::store(c + j, c0);
  }
  for (; j < n; ++j) {
    T acc = c[j];
    for (std::size_t p = 0; p < k; ++p) acc += a_at(p) * b[p * n + j];
    c[j] = acc;
  }
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    gemm_row<T>(n, k, [ai](std::size_t p) { return ai[p]; }, b, c + i * n);
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    gemm_row<T>(n, k, [a, m, i](std::size_t p) { return a[p * m + i]; }, b,
                c + i * n);
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c) {
  using V = Vec<T>;
  constexpr std::size_t w = V::width;
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      auto acc0 = V::zero();
      auto acc1 = V::zero();
      std::size_t p = 0;
      for (; p + 2 * w <= k; p += 2 * w) {
        acc0 = V::fmadd(V::load(ai + p), V::load(bj + p), acc0);
        acc1 = V::fmadd(V::load(ai + p + w), V::load(bj + p + w), acc1);
      }
      for (; p + w <= k; p += w)
        acc0 = V::fmadd(V::load(ai + p), V::load(bj + p), acc0);
      T acc = V::hsum(V::add(acc0, acc1));
      for (; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] += acc;
    }
  }
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  using V = Vec<T>;
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width)
    V::store(y + i, V::fmadd(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot_f(std::size_t n, const float* x, const float* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 yv = _mm256_loadu_ps(y + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(xv)),
                           _mm256_cvtps_pd(_mm256_castps256_ps128(yv)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1)),
                           _mm256_cvtps_pd(_mm256_extractf128_ps(yv, 1)), acc1);
  }
  double acc = Vec<double>::hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += static_cast<double>(x[i]) * y[i];
  return acc;
}

double dot_d(std::size_t n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  double acc = Vec<double>::hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
std::size_t hard_shrink(std::size_t n, const T* w, T center, T threshold,
                        T* out, std::uint8_t* mask) {
  using V = Vec<T>;
  constexpr std::size_t width = V::width;
  const auto cv = V::set1(center);
  const auto tv = V::set1(threshold);
  std::size_t pruned = 0;
  std::size_t i = 0;
  for (; i + width <= n; i += width) {
    const auto wv = V::load(w + i);
    const auto m = V::lt(V::abs(V::sub(wv, cv)), tv);
    V::store(out + i, V::andnot(m, wv));
    const unsigned bits = V::movemask(m);
    for (std::size_t l = 0; l < width; ++l) mask[i + l] = (bits >> l) & 1u;
    pruned += static_cast<std::size_t>(std::popcount(bits));
  }
  for (; i < n; ++i) {
    const bool p = std::abs(w[i] - center) < threshold;
    out[i] = p ? T(0) : w[i];
    mask[i] = p ? 1 : 0;
    pruned += p;
  }
  return pruned;
}

template <typename T>
std::size_t count_below(std::size_t n, const T* w, T center, T threshold) {
  using V = Vec<T>;
  const auto cv = V::set1(center);
  const auto tv = V::set1(threshold);
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    const auto m = V::lt(V::abs(V::sub(V::load(w + i), cv)), tv);
    count += static_cast<std::size_t>(std::popcount(V::movemask(m)));
  }
  for (; i < n; ++i) count += std::abs(w[i] - center) < threshold;
  return count;
}

// Converts 8 floats to two double registers so that both passes accumulate in
// double, matching the scalar reference to rounding of the final sum.
MeanVar<float> mean_var_f(std::size_t n, const float* x) {
  MeanVar<float> r;
  if (n == 0) return r;
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    s0 = _mm256_add_pd(s0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    s1 = _mm256_add_pd(s1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  double sum = Vec<double>::hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) sum += x[i];
  r.mean = sum / static_cast<double>(n);
  const __m256d mv = _mm256_set1_pd(r.mean);
  s0 = _mm256_setzero_pd();
  s1 = _mm256_setzero_pd();
  i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256d d0 =
        _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(v)), mv);
    const __m256d d1 =
        _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)), mv);
    s0 = _mm256_fmadd_pd(d0, d0, s0);
    s1 = _mm256_fmadd_pd(d1, d1, s1);
  }
  double ss = Vec<double>::hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) {
    const double d = x[i] - r.mean;
    ss += d * d;
  }
  r.variance = ss / static_cast<double>(n);
  return r;
}

MeanVar<double> mean_var_d(std::size_t n, const double* x) {
  MeanVar<double> r;
  if (n == 0) return r;
  __m256d s0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) s0 = _mm256_add_pd(s0, _mm256_loadu_pd(x + i));
  double sum = Vec<double>::hsum(s0);
  for (; i < n; ++i) sum += x[i];
  r.mean = sum / static_cast<double>(n);
  const __m256d mv = _mm256_set1_pd(r.mean);
  s0 = _mm256_setzero_pd();
  i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), mv);
    s0 = _mm256_fmadd_pd(d, d, s0);
  }
  double ss = Vec<double>::hsum(s0);
  for (; i < n; ++i) {
    const double d = x[i] - r.mean;
    ss += d * d;
  }
  r.variance = ss / static_cast<double>(n);
  return r;
}

template <typename T>
T max_abs(std::size_t n, const T* x) {
  using V = Vec<T>;
  auto m = V::zero();
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) m = V::max(m, V::abs(V::load(x + i)));
  T r = static_cast<T>(V::hmax(m));
  for (; i < n; ++i) r = std::max(r, std::abs(x[i]));
  return r;
}

template <typename T>
void sgd_update(std::size_t n, T* w, const T* g, T* v, T lr, T momentum,
                T decay) {
  using V = Vec<T>;
  const auto mu = V::set1(momentum);
  const auto keep = V::set1(T(1) - decay);
  const auto neg_lr = V::set1(-lr);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    const auto vv = V::fmadd(mu, V::load(v + i), V::load(g + i));
    V::store(v + i, vv);
    V::store(w + i, V::fmadd(neg_lr, vv, V::mul(keep, V::load(w + i))));
  }
  const T keep_s = T(1) - decay;
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + g[i];
    w[i] = keep_s * w[i] - lr * v[i];
  }
}

template <typename T>
void relu(std::size_t n, const T* x, T* y) {
  using V = Vec<T>;
  const auto z = V::zero();
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) V::store(y + i, V::max(V::load(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(std::size_t n, const T* x, const T* gy, T* gx) {
  using V = Vec<T>;
  const auto z = V::zero();
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    const auto m = V::gt(V::load(x + i), z);
    V::store(gx + i, V::add(V::load(gx + i), V::and_(m, V::load(gy + i))));
  }
  for (; i < n; ++i)
    if (x[i] > T(0)) gx[i] += gy[i];
}

}  // namespace

template <>
const KernelTable<float>& avx2_table<float>() {
  static const KernelTable<float> table{
      &gemm_nn<float>,     &gemm_tn<float>,   &gemm_nt<float>,
      &axpy<float>,        &dot_f,            &hard_shrink<float>,
      &count_below<float>, &mean_var_f,       &max_abs<float>,
      &sgd_update<float>,  &relu<float>,      &relu_backward<float>};
  return table;
}

template <>
const KernelTable<double>& avx2_table<double>() {
  static const KernelTable<double> table{
      &gemm_nn<double>,     &gemm_tn<double>,  &gemm_nt<double>,
      &axpy<double>,        &dot_d,            &hard_shrink<double>,
      &count_below<double>, &mean_var_d,       &max_abs<double>,
      &sgd_update<double>,  &relu<double>,     &relu_backward<double>};
  return table;
}

}  // namespace sparsify::kernels
