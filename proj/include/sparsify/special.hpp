// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

namespace sparsify {

/// Error function. Backed by std::erf (sub-ulp accurate on glibc).
double erf_scalar(double x);

/// Inverse error function on (-1, 1). A rational initial guess is refined by
/// two Newton steps on erf_scalar; erf_scalar(erf_inv_scalar(s)) == s to
/// ~1e-15 for |s| <= 1 - 1e-6. Returns +/-inf at +/-1 and NaN outside.
double erf_inv_scalar(double s);

/// d/dx erf(x) = 2/sqrt(pi) * exp(-x^2)
double erf_derivative(double x);

}  // namespace sparsify
