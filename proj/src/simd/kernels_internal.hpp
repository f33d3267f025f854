#pragma once

// Raw entry points of the vector variants. Deliberately free of library
// headers: the AVX2 translation unit includes this with -mavx2 in effect.

#include <cstddef>

namespace rheston::simd::avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sum_sq_dev(const double* x, double mean, std::size_t n);
void scale_shift(double* x, double scale, double shift, std::size_t n);
void relu(double* x, std::size_t n);
void relu_mask(const double* x, double* g, std::size_t n);
}  // namespace rheston::simd::avx2

namespace rheston::simd::neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sum_sq_dev(const double* x, double mean, std::size_t n);
void scale_shift(double* x, double scale, double shift, std::size_t n);
void relu(double* x, std::size_t n);
void relu_mask(const double* x, double* g, std::size_t n);
}  // namespace rheston::simd::neon
