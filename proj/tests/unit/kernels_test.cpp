#include "featspace/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace fk = featspace::kernels;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Independent long-double reference.
long double ref_dot(const std::vector<double>& x, const std::vector<double>& y) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<long double>(x[i]) * y[i];
  return s;
}

// Summation-order differences between variants are bounded by n * eps * sum |x_i y_i|.
double bound(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] * y[i]);
  return 4.0 * (static_cast<double>(x.size()) + 1.0) * 2.2e-16 * s + 1e-300;
}

class KernelVariants : public ::testing::TestWithParam<std::size_t> {};

TEST_P(KernelVariants, AllVariantsAgreeWithReference) {
  const std::size_t n = GetParam();
  std::mt19937_64 rng(n);
  const auto x = random_vector(rng, n);
  const auto y = random_vector(rng, n);
  std::vector<const fk::KernelTable*> tables{&fk::scalar_table()};
  if (fk::avx2_table() != nullptr) tables.push_back(fk::avx2_table());

  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - y[i];

  for (const auto* t : tables) {
    SCOPED_TRACE(std::string(t->name));
    EXPECT_NEAR(t->dot(x.data(), y.data(), n), static_cast<double>(ref_dot(x, y)), bound(x, y));
    EXPECT_NEAR(t->sum_squares(x.data(), n), static_cast<double>(ref_dot(x, x)), bound(x, x));
    EXPECT_NEAR(t->squared_distance(x.data(), y.data(), n), static_cast<double>(ref_dot(diff, diff)),
                bound(diff, diff));

    std::vector<double> out = y;
    t->axpy(0.75, x.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(out[i], y[i] + 0.75 * x[i], 1e-15 * (1 + std::abs(out[i])));
  }
}

TEST_P(KernelVariants, GemvMatchesRowDots) {
  const std::size_t cols = GetParam();
  const std::size_t rows = 5;
  std::mt19937_64 rng(1000 + cols);
  const auto m = random_vector(rng, rows * cols);
  const auto x = random_vector(rng, cols);
  std::vector<const fk::KernelTable*> tables{&fk::scalar_table()};
  if (fk::avx2_table() != nullptr) tables.push_back(fk::avx2_table());
  for (const auto* t : tables) {
    std::vector<double> y(rows, 123.0);
    t->gemv(m.data(), rows, cols, x.data(), y.data());
    for (std::size_t r = 0; r < rows; ++r) {
      const std::vector<double> row(m.begin() + static_cast<long>(r * cols), m.begin() + static_cast<long>((r + 1) * cols));
      EXPECT_NEAR(y[r], static_cast<double>(ref_dot(row, x)), bound(row, x)) << t->name << " row " << r;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Lengths, KernelVariants,
                         ::testing::Values(0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 1023));

TEST(KernelDispatch, SelectSwitchesActiveTable) {
  const fk::Isa original = fk::active_isa();
  ASSERT_TRUE(fk::select(fk::Isa::Scalar));
  EXPECT_EQ(fk::active_isa(), fk::Isa::Scalar);
  EXPECT_EQ(&fk::active(), &fk::scalar_table());
  if (fk::avx2_table() != nullptr) {
    ASSERT_TRUE(fk::select(fk::Isa::Avx2));
    EXPECT_EQ(&fk::active(), fk::avx2_table());
  } else {
    EXPECT_FALSE(fk::select(fk::Isa::Avx2));
    EXPECT_EQ(fk::active_isa(), fk::Isa::Scalar);
  }
  fk::select(original);
}

TEST(KernelDispatch, SpanWrappersUseActiveTable) {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> b{4.0, -5.0, 6.0};
  EXPECT_DOUBLE_EQ(fk::dot(a, b), 12.0);
  EXPECT_DOUBLE_EQ(fk::sum_squares(a), 14.0);
  EXPECT_DOUBLE_EQ(fk::squared_distance(a, b), 9.0 + 49.0 + 9.0);
  std::vector<double> y{1.0, 1.0, 1.0};
  fk::axpy(2.0, a, y);
  EXPECT_EQ(y, (std::vector<double>{3.0, 5.0, 7.0}));
}

}  // namespace
