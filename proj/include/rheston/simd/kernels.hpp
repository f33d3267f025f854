#pragma once

// Data-parallel inner loops used by the simulation, the Riccati solver and the
// dense network. Every operation has a scalar reference implementation; the
// vector variants must agree with it up to summation-order rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace rheston::simd {

struct KernelSet {
    std::string_view name;
    /// sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    /// y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// sum_i x[i]
    double (*sum)(const double* x, std::size_t n);
    /// sum_i (x[i] - mean)^2
    double (*sum_sq_dev)(const double* x, double mean, std::size_t n);
    /// x[i] = x[i] * scale + shift
    void (*scale_shift)(double* x, double scale, double shift, std::size_t n);
    /// x[i] = max(x[i], 0)
    void (*relu)(double* x, std::size_t n);
    /// g[i] = (x[i] > 0) ? g[i] : 0
    void (*relu_mask)(const double* x, double* g, std::size_t n);
};

const KernelSet& scalar_kernels();

/// Kernel sets compiled into this binary and supported by the running CPU,
/// scalar first.
std::span<const KernelSet* const> available_kernels();

/// The kernel set in use. Picks the widest supported variant on first call;
/// the RHESTON_SIMD environment variable ("scalar", "avx2", "neon") overrides.
const KernelSet& kernels();

/// Forces a variant by name for the rest of the process. Returns false when
/// the variant is not available.
bool select_kernels(std::string_view name);

}  // namespace rheston::simd
