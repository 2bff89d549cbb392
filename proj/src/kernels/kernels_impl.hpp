#pragma once

#include <cstddef>

namespace featspace::kernels::detail {

double dot_scalar(const double* x, const double* y, std::size_t n);
double sum_squares_scalar(const double* x, std::size_t n);
double squared_distance_scalar(const double* x, const double* y, std::size_t n);
void axpy_scalar(double a, const double* x, double* y, std::size_t n);
void gemv_scalar(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y);

#if defined(FEATSPACE_HAVE_AVX2)
double dot_avx2(const double* x, const double* y, std::size_t n);
double sum_squares_avx2(const double* x, std::size_t n);
double squared_distance_avx2(const double* x, const double* y, std::size_t n);
void axpy_avx2(double a, const double* x, double* y, std::size_t n);
void gemv_avx2(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y);
#endif

}  // namespace featspace::kernels::detail
