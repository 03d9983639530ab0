// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

// Data-parallel inner loops. Every kernel has a scalar reference version and,
// on x86-64 hosts with AVX2+FMA, a vectorized variant. The active table is
// chosen once at first use from CPUID and can be overridden for testing or
// through the SPARSIFY_KERNELS environment variable ("scalar" | "avx2").

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace sparsify::kernels {

enum class Backend { Scalar, Avx2 };

template <typename T>
struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;  // population variance
};

/// Function table for one scalar type. Matrices are row-major with explicit
/// leading dimensions. gemm_* accumulate into C: C += op(A) * op(B).
template <typename T>
struct KernelTable {
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  const T* b, T* c);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  const T* b, T* c);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  const T* b, T* c);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  double (*dot)(std::size_t n, const T* x, const T* y);
  // out[i] = |w[i] - center| < threshold ? 0 : w[i]; mask[i] = pruned.
  // Returns the number of pruned entries.
  std::size_t (*hard_shrink)(std::size_t n, const T* w, T center, T threshold,
                             T* out, std::uint8_t* mask);
  // #{ i : |w[i] - center| < threshold }
  std::size_t (*count_below)(std::size_t n, const T* w, T center, T threshold);
  // Two-pass mean / population variance, accumulated in double.
  MeanVar<T> (*mean_var)(std::size_t n, const T* x);
  // max_i |x[i]|
  T (*max_abs)(std::size_t n, const T* x);
  // v = momentum * v + g;  w = (1 - decay) * w - lr * v
  void (*sgd_update)(std::size_t n, T* w, const T* g, T* v, T lr, T momentum,
                     T decay);
  // y = max(x, 0)
  void (*relu)(std::size_t n, const T* x, T* y);
  // gx += x > 0 ? gy : 0
  void (*relu_backward)(std::size_t n, const T* x, const T* gy, T* gx);
};

template <typename T>
const KernelTable<T>& scalar_table();

#if defined(SPARSIFY_HAVE_AVX2)
template <typename T>
const KernelTable<T>& avx2_table();
template <>
const KernelTable<float>& avx2_table<float>();
template <>
const KernelTable<double>& avx2_table<double>();
#endif

/// Table used by the library for the current backend.
template <typename T>
const KernelTable<T>& active();

bool avx2_available();
Backend active_backend();
/// Forces a backend; throws std::invalid_argument for Avx2 on unsupported
/// hardware.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

/// RAII override used by equivalence tests.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend) : previous_(active_backend()) {
    set_backend(backend);
  }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

}  // namespace sparsify::kernels
