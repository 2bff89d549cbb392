#pragma once

// Angular diagnostics of a labelled set of feature vectors. All quantities
// depend only on directions, so per-vector positive rescaling and global
// rotations leave them unchanged.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "featspace/matrix.hpp"

namespace featspace {

enum class Split { Train, Test };

struct LabeledFeatureSet {
  Matrix vectors;                   // M x n
  std::vector<std::size_t> labels;  // M class indices
  std::vector<int> groups;          // empty, or one nuisance-group id per row
  std::vector<std::size_t> ids;     // empty, or one sample id per row
  Split split = Split::Train;
  std::vector<std::string> class_names;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return vectors.cols(); }
  std::size_t id(std::size_t row) const noexcept { return ids.empty() ? row : ids[row]; }

  /// Checks shapes and label range; zero rows are rejected unless allowed.
  void validate(bool allow_zero_vectors = false) const;

  /// Rows with the given indices, in that order.
  LabeledFeatureSet subset(std::span<const std::size_t> rows) const;
};

/// Removes all-zero rows (dead ReLU features). Returns the number removed.
std::size_t drop_zero_vectors(LabeledFeatureSet& set);

/// 1 - u.v / (|u| |v|), in [0, 2].
double cosine_distance(std::span<const double> u, std::span<const double> v);

struct SplitMetrics {
  Matrix central_vectors;             // per class: mean of the L2-normalized rows, not renormalized
  std::vector<double> centrality;     // C(i) = min_k d_c(c_i, c_k)
  std::vector<std::size_t> nearest;   // argmin of the above, lowest index on ties
  std::vector<double> intra;          // I_1
  std::vector<double> inter;          // I_2 against the nearest class
  std::vector<double> separability;   // S(i) = I_1 / I_2
  std::vector<std::size_t> class_sizes;
};

enum class PairDivisor {
  Literal,    // I_1 divides the k != l sum by N^2
  ExactMean,  // I_1 divides by N (N - 1)
};

struct CentralityResult {
  Matrix central_vectors;
  std::vector<double> centrality;
  std::vector<std::size_t> nearest;
};

CentralityResult centrality(const LabeledFeatureSet& set);

/// Centrality plus separability for one split. Every class needs >= 2 rows.
SplitMetrics split_metrics(const LabeledFeatureSet& set, PairDivisor divisor = PairDivisor::Literal);

struct Ratios {
  double centrality_ratio = 0.0;    // C_R
  double separability_ratio = 0.0;  // S_R
};

/// Per-class test/train ratios, averaged over classes.
Ratios ratios(const SplitMetrics& train, const SplitMetrics& test);

struct MetricsReport {
  SplitMetrics train;
  std::optional<SplitMetrics> test;
  std::optional<Ratios> ratio;
  std::optional<double> loss_ratio;  // L_R, test loss over train loss
  PairDivisor divisor = PairDivisor::Literal;
};

MetricsReport metrics_report(const LabeledFeatureSet& train, const LabeledFeatureSet* test = nullptr,
                             std::optional<double> loss_ratio = std::nullopt,
                             PairDivisor divisor = PairDivisor::Literal);

/// Mean over classes of the mean pairwise cosine distance within the class
/// (k != l pairs, exact mean).
double mean_intra_class_distance(const LabeledFeatureSet& set);

/// Sample Pearson correlation. Needs >= 3 points and nonzero variances.
double pearson(std::span<const double> x, std::span<const double> y);

/// Standardizes with the population standard deviation.
std::vector<double> zscore(std::span<const double> x);

struct KnnAccuracy {
  std::size_t k = 0;
  double accuracy = 0.0;
};

/// Leave-one-out k-NN under the cosine distance: a vector counts as correct
/// when strictly more than half of its k nearest neighbours share its class.
/// Distance ties are broken by ascending row index.
std::vector<KnnAccuracy> knn_angular_eval(const LabeledFeatureSet& set, std::span<const std::size_t> k_values);

struct DistanceMatrix {
  std::vector<std::size_t> order;   // source row of each matrix row
  std::vector<std::size_t> labels;  // class of each matrix row (non-decreasing)
  Matrix values;
};

/// Full M x M cosine-distance matrix with rows grouped by class.
DistanceMatrix cosine_distance_matrix(const LabeledFeatureSet& set);

struct PointCloudInstance {
  std::string id;
  Matrix points;                         // P x 3
  std::vector<std::size_t> part_labels;  // one per point
};

struct DivOptions {
  double fraction = 1.0;  // share of instances sampled before computing
  std::uint64_t seed = 0;
};

struct DivResult {
  double div = 0.0;
  double presence = 0.0;  // share of (sampled) instances containing the class
  std::size_t instances_with_class = 0;
  std::size_t instances_considered = 0;
};

/// Cross-instance over within-instance mean Euclidean distance of the points
/// labelled `part_class`, scaled by 1 / N_I.
DivResult div_statistic(std::span<const PointCloudInstance> instances, std::size_t part_class,
                        DivOptions options = {});

}  // namespace featspace
