// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace sparsify {

double erf_scalar(double x) { return std::erf(x); }

double erf_derivative(double x) {
  return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-x * x);
}

// Initial guess: single-precision rational approximation of Giles,
// "Approximating the erfinv function" (GPU Computing Gems, 2011).
static double erf_inv_initial(double x) {
  double w = -std::log((1.0 - x) * (1.0 + x));
  double p;
  if (w < 5.0) {
    w -= 2.5;
    p = 2.81022636e-08;
    p = 3.43273939e-07 + p * w;
    p = -3.5233877e-06 + p * w;
    p = -4.39150654e-06 + p * w;
    p = 0.00021858087 + p * w;
    p = -0.00125372503 + p * w;
    p = -0.00417768164 + p * w;
    p = 0.246640727 + p * w;
    p = 1.50140941 + p * w;
  } else {
    w = std::sqrt(w) - 3.0;
    p = -0.000200214257;
    p = 0.000100950558 + p * w;
    p = 0.00134934322 + p * w;
    p = -0.00367342844 + p * w;
    p = 0.00573950773 + p * w;
    p = -0.0076224613 + p * w;
    p = 0.00943887047 + p * w;
    p = 1.00167406 + p * w;
    p = 2.83297682 + p * w;
  }
  return p * x;
}

double erf_inv_scalar(double s) {
  if (std::isnan(s) || s < -1.0 || s > 1.0)
    return std::numeric_limits<double>::quiet_NaN();
  if (s == 1.0) return std::numeric_limits<double>::infinity();
  if (s == -1.0) return -std::numeric_limits<double>::infinity();
  if (s == 0.0) return 0.0;
  double x = erf_inv_initial(s);
  for (int i = 0; i < 2; ++i) {
    const double slope = erf_derivative(x);
    if (slope == 0.0) break;
    x -= (erf_scalar(x) - s) / slope;
  }
  return x;
}

}  // namespace sparsify
