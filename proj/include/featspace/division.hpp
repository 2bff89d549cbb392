#pragma once

// Division of the feature space into class loci. Class i owns the points
// whose dot product with every differential vector w_ij = w_i - w_j is
// positive; with a bias the same holds for expanded vectors [a, 1] and
// [w_i, b_i].

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "featspace/geometry.hpp"

namespace featspace {

struct DifferentialVector {
  std::size_t i = 0;
  std::size_t j = 0;
  std::vector<double> w;  // w_i - w_j (expanded when the head has a bias)
};

class DifferentialVectorSet {
 public:
  DifferentialVectorSet(std::size_t num_classes, std::vector<DifferentialVector> pairs);

  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t count() const noexcept { return pairs_.size(); }
  const std::vector<DifferentialVector>& pairs() const noexcept { return pairs_; }

  /// w_ij for any i != j; w_ji is returned as the negation of the stored w_ij.
  std::vector<double> get(std::size_t i, std::size_t j) const;

 private:
  std::size_t index(std::size_t i, std::size_t j) const noexcept;

  std::size_t num_classes_;
  std::vector<DifferentialVector> pairs_;  // unordered pairs, i < j, lexicographic
};

/// One vector per unordered class pair. Throws DegenerateHead on a zero
/// differential vector.
DifferentialVectorSet differential_vectors(const ClassifierHead& head);

enum class TiePolicy {
  Report,       // throw BoundaryTie
  LowestIndex,  // return the lowest-indexed class among the tied ones
};

enum class InputDomain {
  Any,
  NonNegative,  // ReLU features: reject inputs with negative activations
};

struct RegionOptions {
  TiePolicy tie = TiePolicy::Report;
  InputDomain domain = InputDomain::Any;
};

/// A dot product with a differential vector counts as zero when its magnitude
/// is within kTieTolerance * max(1, |a| |w_ij|).
inline constexpr double kTieTolerance = 1e-12;

/// Membership test against precomputed differential vectors; reuse it when
/// classifying many points with the same head.
class RegionClassifier {
 public:
  explicit RegionClassifier(const ClassifierHead& head);

  std::size_t region_of(std::span<const double> feature, RegionOptions options = {}) const;
  const DifferentialVectorSet& differentials() const noexcept { return diffs_; }

 private:
  std::size_t dim_;
  bool bias_;
  DifferentialVectorSet diffs_;
  std::vector<double> diff_norms_;
};

std::size_t region_of(std::span<const double> feature, const ClassifierHead& head, RegionOptions options = {});

struct ConvexityReport {
  std::size_t pairs = 0;
  std::size_t interior_points = 0;
  std::size_t violations = 0;
  std::size_t regions_observed = 0;
  std::size_t skipped_pairs = 0;  // no same-region partner found within the attempt cap
};

/// Samples `samples` same-region pairs and tests the nine interior points
/// lambda = 0.1 ... 0.9 of each segment. Heads with a bias are sampled in the
/// expanded form (the trailing 1 survives convex combination).
ConvexityReport convexity_check(const ClassifierHead& head, std::size_t samples, std::uint64_t seed);

struct ClassAngles {
  std::size_t class_index = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (j, k): angle between w_ij and w_ik
  std::vector<double> angles_deg;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single angle
};

struct ClassLocusReport {
  std::vector<ClassAngles> classes;
};

/// Angles between every pair of a class's differential vectors. Needs N >= 3.
ClassLocusReport locus_angles(const ClassifierHead& head);

// --- VC-dimension desk check ------------------------------------------------

/// True when the rows of `points` (m x n) are affinely independent, i.e. the
/// augmented matrix [p_k, 1] has full rank. Needs m <= n + 1.
bool in_general_position(const Matrix& points);

/// Strict linear separability (with bias) of `points` under labels in {-1, +1}.
/// A capped perceptron run settles the separable case; otherwise an exact
/// check looks for the origin inside the convex hull of the signed expanded
/// points (Gordan's alternative) over all subsets of size <= n + 2.
bool linearly_separable(const Matrix& points, std::span<const int> labels);

struct ShatterReport {
  std::size_t dimension = 0;
  Matrix points;  // (n + 1) x n, on the unit sphere
  std::size_t attempts = 0;
  std::size_t dichotomies = 0;
  std::size_t separable_dichotomies = 0;
  bool shattered_n_plus_1 = false;

  Matrix witness;                       // (n + 2) x n
  std::vector<int> failing_dichotomy;  // labels of the first inseparable dichotomy found
  bool witness_dichotomy_failure_n_plus_2 = false;
};

/// Exhaustive shattering test for n in [1, 4]. `first_attempt`, if given, is
/// tried before random placement; degenerate layouts are rejected and
/// replaced, up to 10 attempts in total.
ShatterReport shattering_check(std::size_t dimension, std::uint64_t seed,
                               std::optional<Matrix> first_attempt = std::nullopt);

}  // namespace featspace
