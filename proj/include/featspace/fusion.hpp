#pragma once

// Late fusion of two modalities by feature concatenation, and the three data
// strategies that decide which samples train the unimodal extractors and
// which train the fusion classifier:
//   S_1-1  extractors on D_1, fusion on D_1
//   S_1-2  extractors on D_1, fusion on D_2
//   S_a-a  extractors on D_a, fusion on D_a
// D_a is every sample outside the left-out group; D_1 and D_2 are its halves.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "featspace/metrics.hpp"
#include "featspace/toytrain.hpp"

namespace featspace {

enum class FusionStrategy { S11, S12, Saa };

std::string to_string(FusionStrategy s);
/// Accepts "S_1-1", "S_1-2", "S_a-a" and the short forms "11", "12", "aa".
FusionStrategy parse_strategy(const std::string& text);

/// Row indices of the two halves. Rows are grouped by (class, group),
/// shuffled inside each cell and dealt alternately, so per-class and
/// per-group counts of the halves differ by at most one.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(const LabeledFeatureSet& data,
                                                                         std::uint64_t seed);

std::pair<LabeledFeatureSet, LabeledFeatureSet> split_dataset(const LabeledFeatureSet& data, std::uint64_t seed);

/// Concatenates V then A row by row. Both sets must list the same ids and
/// labels in the same order.
LabeledFeatureSet fuse(const LabeledFeatureSet& v, const LabeledFeatureSet& a);

struct ExtractorSpec {
  DatasetSpec data;
  MlpSpec model;  // input_dim and num_classes are taken from `data`
  TrainConfig train;
};

struct FusionClassifierSpec {
  /// Empty hidden and feature_dim 0 give a linear softmax classifier.
  std::vector<std::size_t> hidden;
  std::size_t feature_dim = 0;
  TrainConfig train;
};

struct FusionExperimentConfig {
  ExtractorSpec modality_v;
  ExtractorSpec modality_a;
  FusionClassifierSpec fusion;
  int leave_out_group = 0;
  /// Every component seed (datasets, split, extractor and fusion training)
  /// is derived from this one; the seeds inside the nested specs are ignored.
  std::uint64_t seed = 0;
};

/// Seeds actually used by one run.
struct DerivedSeeds {
  std::uint64_t data_v, data_a, split, extractor_v, extractor_a, fusion;
};
DerivedSeeds derive_seeds(std::uint64_t seed);

struct ExtractorReport {
  std::string modality;                 // "V" or "A"
  std::string training_split;           // "D_1" or "D_a"
  std::optional<MetricsReport> metrics; // training split vs held-out group
  std::string metrics_error;            // set when the metrics could not be computed
  double held_out_accuracy = 0.0;       // unimodal accuracy on the left-out group
};

struct StrategyOutcome {
  FusionStrategy strategy = FusionStrategy::S12;
  double held_out_accuracy = 0.0;
  std::vector<std::size_t> extractor_train_ids;
  std::vector<std::size_t> fusion_train_ids;
  std::vector<ExtractorReport> extractors;
};

struct FusionRun {
  std::uint64_t seed = 0;
  std::vector<std::size_t> held_out_ids;
  std::vector<StrategyOutcome> outcomes;  // in the order requested
};

/// Runs the requested strategies on one seed. Extractors trained on the same
/// split are shared between strategies.
FusionRun run_strategies(const FusionExperimentConfig& config, std::span<const FusionStrategy> strategies);

StrategyOutcome run_strategy(const FusionExperimentConfig& config, FusionStrategy strategy);

struct FusionTable {
  std::vector<FusionStrategy> strategies;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> accuracy;  // [seed][strategy]
  std::vector<double> mean;                   // per strategy
};

/// Per-seed and mean held-out accuracies for all three strategies.
FusionTable fusion_table(const FusionExperimentConfig& config, std::span<const std::uint64_t> seeds);

}  // namespace featspace
