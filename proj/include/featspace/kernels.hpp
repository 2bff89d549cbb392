#pragma once

// Data-parallel inner loops used by every analysis module. Each kernel has a
// scalar reference implementation and, on x86-64, an AVX2/FMA variant that is
// selected at runtime when the CPU supports it. The unit tests hold the two
// to each other.

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>

namespace featspace::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  std::string_view name;
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  double (*squared_distance)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y[r] = sum_c m[r * cols + c] * x[c]
  void (*gemv)(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y);
};

const KernelTable& scalar_table() noexcept;

/// nullptr when the build has no AVX2 variant or the running CPU lacks it.
const KernelTable* avx2_table() noexcept;

/// Table used by the inline wrappers below. Defaults to the widest ISA the
/// CPU supports.
const KernelTable& active() noexcept;
Isa active_isa() noexcept;

/// Returns false (and leaves the selection unchanged) if `isa` is unavailable.
bool select(Isa isa) noexcept;

inline double dot(std::span<const double> x, std::span<const double> y) noexcept {
  assert(x.size() == y.size());
  return active().dot(x.data(), y.data(), x.size());
}

inline double sum_squares(std::span<const double> x) noexcept {
  return active().sum_squares(x.data(), x.size());
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) noexcept {
  assert(x.size() == y.size());
  return active().squared_distance(x.data(), y.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
  assert(x.size() == y.size());
  active().axpy(a, x.data(), y.data(), x.size());
}

}  // namespace featspace::kernels
