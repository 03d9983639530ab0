// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "sparsify/kernels.hpp"

namespace sparsify::kernels {
namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("SPARSIFY_KERNELS")) {
    const std::string value(env);
    if (value == "scalar") return Backend::Scalar;
    if (value == "avx2" && avx2_available()) return Backend::Avx2;
  }
  return avx2_available() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

bool avx2_available() {
#if defined(SPARSIFY_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2") &&
                         __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (backend == Backend::Avx2 && !avx2_available())
    throw std::invalid_argument("AVX2 kernels are not available on this host");
  current().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::Avx2 ? "avx2" : "scalar";
}

template <typename T>
const KernelTable<T>& active() {
#if defined(SPARSIFY_HAVE_AVX2)
  if (active_backend() == Backend::Avx2) return avx2_table<T>();
#endif
  return scalar_table<T>();
}

template const KernelTable<float>& active<float>();
template const KernelTable<double>& active<double>();

}  // namespace sparsify::kernels
