#include <atomic>

#include "featspace/kernels.hpp"
#include "kernels_impl.hpp"

namespace featspace::kernels {

namespace {

constexpr KernelTable kScalar{
    "scalar",           detail::dot_scalar, detail::sum_squares_scalar, detail::squared_distance_scalar,
    detail::axpy_scalar, detail::gemv_scalar,
};

#if defined(FEATSPACE_HAVE_AVX2)
constexpr KernelTable kAvx2{
    "avx2",           detail::dot_avx2, detail::sum_squares_avx2, detail::squared_distance_avx2,
    detail::axpy_avx2, detail::gemv_avx2,
};

bool cpu_has_avx2() noexcept {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable* detect() noexcept {
#if defined(FEATSPACE_HAVE_AVX2)
  if (cpu_has_avx2()) return &kAvx2;
#endif
  return &kScalar;
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* avx2_table() noexcept {
#if defined(FEATSPACE_HAVE_AVX2)
  static const bool available = cpu_has_avx2();
  return available ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

Isa active_isa() noexcept { return &active() == &kScalar ? Isa::Scalar : Isa::Avx2; }

bool select(Isa isa) noexcept {
  const KernelTable* table = isa == Isa::Scalar ? &kScalar : avx2_table();
  if (table == nullptr) return false;
  current().store(table, std::memory_order_relaxed);
  return true;
}

}  // namespace featspace::kernels
