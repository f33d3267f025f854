#include "rheston/simd/kernels.hpp"

namespace rheston::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double sum_sq_dev(const double* x, double mean, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        s += d * d;
    }
    return s;
}

void scale_shift(double* x, double scale, double shift, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] * scale + shift;
}

void relu(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask(const double* x, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) g[i] = x[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace

const KernelSet& scalar_kernels() {
    static const KernelSet set{"scalar", dot, axpy, sum, sum_sq_dev, scale_shift, relu, relu_mask};
    return set;
}

}  // namespace rheston::simd
