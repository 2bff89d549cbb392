#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "featspace/division.hpp"

namespace featspace {
namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = g(rng);
  return m;
}

std::size_t argmax(const std::vector<double>& z) {
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

double angle_deg(const std::vector<double>& u, const std::vector<double>& v) {
  double uv = 0, uu = 0, vv = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    uv += u[k] * v[k];
    uu += u[k] * u[k];
    vv += v[k] * v[k];
  }
  return std::acos(std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

ClassifierHead three_class_head() {
  const double s = std::sqrt(3.0) / 2.0;
  return ClassifierHead({{0.0, 1.0}, {-s, -0.5}, {s, -0.5}});
}

TEST(DifferentialVectors, CountLaw) {
  std::mt19937_64 rng(1);
  const std::size_t expected[] = {0, 0, 1, 3, 6, 10, 15, 21, 28, 36, 45};
  for (std::size_t n = 2; n <= 10; ++n) {
    const ClassifierHead head(random_matrix(rng, n, 4));
    const auto set = differential_vectors(head);
    EXPECT_EQ(set.count(), expected[n]);
    EXPECT_EQ(set.count(), n * (n - 1) / 2);
  }
}

TEST(DifferentialVectors, Antisymmetry) {
  std::mt19937_64 rng(2);
  const ClassifierHead head(random_matrix(rng, 5, 3), std::vector<double>{0.1, -0.2, 0.3, 0.0, 1.0});
  const auto set = differential_vectors(head);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      if (i == j) continue;
      const auto wij = set.get(i, j);
      const auto wji = set.get(j, i);
      ASSERT_EQ(wij.size(), 4u);  // expanded with the bias
      for (std::size_t k = 0; k < wij.size(); ++k) {
        EXPECT_EQ(wij[k] + wji[k], 0.0);
        EXPECT_DOUBLE_EQ(wij[k], head.expanded_weights()(i, k) - head.expanded_weights()(j, k));
      }
    }
  }
}

TEST(RegionOf, SmallExamples) {
  const ClassifierHead head({{1, 0}, {0, 1}});
  EXPECT_EQ(region_of(std::vector<double>{2, 1}, head), 0u);
  try {
    region_of(std::vector<double>{1, 1}, head);
    FAIL() << "expected a tie";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoundaryTie);
  }
  EXPECT_EQ(region_of(std::vector<double>{1, 1}, head, {TiePolicy::LowestIndex, InputDomain::Any}), 0u);
}

TEST(RegionOf, NonNegativeDomain) {
  const ClassifierHead head({{1, 0}, {0, 1}});
  EXPECT_THROW(region_of(std::vector<double>{2, -1}, head, {TiePolicy::Report, InputDomain::NonNegative}), Error);
  EXPECT_EQ(region_of(std::vector<double>{2, -1}, head), 0u);
}

TEST(RegionOf, DimensionMismatch) {
  const ClassifierHead head({{1, 0}, {0, 1}});
  try {
    region_of(std::vector<double>{1, 2, 3, 4}, head);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(RegionOf, MatchesArgmaxOracle) {
  std::mt19937_64 rng(3);
  const ClassifierHead head(random_matrix(rng, 10, 6));
  const RegionClassifier classifier(head);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> a(6);
  for (int t = 0; t < 100000; ++t) {
    for (double& x : a) x = g(rng);
    ASSERT_EQ(classifier.region_of(a), argmax(head.logits(a)));
  }
}

TEST(RegionOf, MatchesArgmaxWithBias) {
  std::mt19937_64 rng(4);
  const ClassifierHead head(random_matrix(rng, 6, 5), std::vector<double>{0.5, -1.0, 0.0, 2.0, -0.3, 0.8});
  const RegionClassifier classifier(head);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> a(5);
  for (int t = 0; t < 20000; ++t) {
    for (double& x : a) x = g(rng);
    const std::size_t want = argmax(head.logits(a));
    ASSERT_EQ(classifier.region_of(a), want);
    std::vector<double> e(a);
    e.push_back(1.0);
    ASSERT_EQ(classifier.region_of(e), want);
  }
}

TEST(RegionOf, ScaleInvarianceWithoutBias) {
  std::mt19937_64 rng(5);
  const ClassifierHead head(random_matrix(rng, 7, 8));
  const RegionClassifier classifier(head);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  std::vector<double> a(8), b(8);
  for (int t = 0; t < 10000; ++t) {
    for (double& x : a) x = g(rng);
    const double lambda = std::pow(10.0, log_scale(rng));
    for (std::size_t k = 0; k < 8; ++k) b[k] = lambda * a[k];
    ASSERT_EQ(classifier.region_of(a), classifier.region_of(b));
  }
}

TEST(Convexity, ThreeClassPlanarHead) {
  const auto report = convexity_check(three_class_head(), 10000, 7);
  EXPECT_EQ(report.violations, 0u);
  EXPECT_EQ(report.pairs + report.skipped_pairs, 10000u);
  EXPECT_EQ(report.interior_points, 9 * report.pairs);
  EXPECT_EQ(report.regions_observed, 3u);
}

TEST(Convexity, TwoClassesAndBias) {
  std::mt19937_64 rng(8);
  EXPECT_EQ(convexity_check(ClassifierHead(random_matrix(rng, 2, 5)), 2000, 1).violations, 0u);
  const ClassifierHead biased(random_matrix(rng, 3, 2), std::vector<double>{0.4, -0.1, 0.2});
  EXPECT_EQ(convexity_check(biased, 2000, 2).violations, 0u);
}

TEST(LocusAngles, HandComputedExample) {
  const ClassifierHead head({{1, 0}, {0, 1}, {-1, -1}});
  const auto report = locus_angles(head);
  ASSERT_EQ(report.classes.size(), 3u);
  ASSERT_EQ(report.classes[0].angles_deg.size(), 1u);
  EXPECT_NEAR(report.classes[0].angles_deg[0], angle_deg({1, -1}, {2, 1}), 1e-12);
  EXPECT_NEAR(report.classes[0].angles_deg[0], 71.565051177, 1e-8);
  EXPECT_EQ(report.classes[0].stddev, 0.0);
}

TEST(LocusAngles, SymmetricHeadGivesEqualAngles) {
  const auto report = locus_angles(three_class_head());
  for (const auto& c : report.classes) {
    ASSERT_EQ(c.angles_deg.size(), 1u);
    EXPECT_NEAR(c.angles_deg[0], 60.0, 1e-9);
  }
}

TEST(LocusAngles, FourClassCountsAndOracle) {
  std::mt19937_64 rng(9);
  const ClassifierHead head(random_matrix(rng, 4, 5));
  const auto report = locus_angles(head);
  std::size_t total = 0;
  for (const auto& c : report.classes) {
    ASSERT_EQ(c.angles_deg.size(), 3u);
    total += c.angles_deg.size();
    double mean = 0;
    for (std::size_t k = 0; k < c.pairs.size(); ++k) {
      std::vector<double> wij(5), wik(5);
      for (std::size_t d = 0; d < 5; ++d) {
        wij[d] = head.weights()(c.class_index, d) - head.weights()(c.pairs[k].first, d);
        wik[d] = head.weights()(c.class_index, d) - head.weights()(c.pairs[k].second, d);
      }
      EXPECT_NEAR(c.angles_deg[k], angle_deg(wij, wik), 1e-9);
      EXPECT_GE(c.angles_deg[k], 0.0);
      EXPECT_LE(c.angles_deg[k], 180.0);
      mean += c.angles_deg[k] / 3.0;
    }
    EXPECT_NEAR(c.mean, mean, 1e-9);
  }
  EXPECT_EQ(total, 12u);
}

TEST(LocusAngles, NeedsThreeClasses) {
  try {
    locus_angles(ClassifierHead({{1, 0}, {0, 1}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewClasses);
  }
}

TEST(Shattering, XorIsNotSeparable) {
  const Matrix square{{1, 1}, {-1, -1}, {1, -1}, {-1, 1}};
  const std::vector<int> xor_labels{1, 1, -1, -1};
  EXPECT_FALSE(linearly_separable(square, xor_labels));
  const std::vector<int> halves{1, -1, 1, -1};
  EXPECT_TRUE(linearly_separable(square, std::vector<int>{1, -1, -1, 1}) ||
              linearly_separable(square, halves));
}

TEST(Shattering, PlaneAndSpace) {
  for (std::size_t n : {2u, 3u}) {
    const auto report = shattering_check(n, 42);
    EXPECT_TRUE(report.shattered_n_plus_1) << n;
    EXPECT_EQ(report.dichotomies, std::size_t{1} << (n + 1));
    EXPECT_EQ(report.separable_dichotomies, report.dichotomies);
    EXPECT_TRUE(report.witness_dichotomy_failure_n_plus_2) << n;
  }
}

TEST(Shattering, DegenerateFirstAttemptIsReplaced) {
  const Matrix on_a_line{{1.0, 1.0}, {-1.0, -1.0}, {0.5, 0.5}};
  EXPECT_FALSE(in_general_position(on_a_line));
  const auto report = shattering_check(2, 3, on_a_line);
  EXPECT_GE(report.attempts, 2u);
  EXPECT_TRUE(report.shattered_n_plus_1);
}

}  // namespace
}  // namespace featspace
