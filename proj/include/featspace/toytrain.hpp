#pragma once

// Small fully connected ReLU network trained from scratch. The output of the
// last hidden layer is the feature vector; the final linear layer is the
// classifier head analysed by the other modules.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "featspace/error.hpp"
#include "featspace/geometry.hpp"
#include "featspace/metrics.hpp"
#include "featspace/sensitivity.hpp"

namespace featspace {

// --- synthetic data ---------------------------------------------------------

struct DatasetSpec {
  std::size_t num_classes = 4;
  std::size_t input_dim = 20;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 100;
  double spread = 0.5;              // std of the isotropic noise per coordinate
  std::size_t nuisance_groups = 0;  // 0: no group structure
  double group_offset = 0.0;        // norm of the per-group offset vector
  double prototype_scale = 1.0;     // norm of the class prototypes
  std::uint64_t seed = 0;
};

struct Dataset {
  LabeledFeatureSet train;
  LabeledFeatureSet test;
};

/// Gaussian clusters around random prototypes on a sphere, plus an optional
/// offset shared by every sample of a nuisance group. Rows are ordered by
/// class, groups are assigned round-robin within each class, and ids are
/// 0..M-1 for train and continue for test; two specs with equal counts
/// therefore produce aligned rows.
Dataset make_synthetic_dataset(const DatasetSpec& spec);

// --- model ------------------------------------------------------------------

/// With feature_dim == 0 and no hidden layers the model is a linear softmax
/// classifier on the raw input; its "features" are the input itself.
struct MlpSpec {
  std::size_t input_dim = 20;
  std::vector<std::size_t> hidden{64};
  std::size_t feature_dim = 16;
  std::size_t num_classes = 4;
  bool head_bias = false;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct DenseLayer {
  Matrix weights;             // out x in
  std::vector<double> bias;   // empty when the layer has no bias

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

enum class LossKind { Softmax, L2Softmax };
enum class OptimizerKind { Sgd, Adam };

class MlpModel {
 public:
  /// Fan-in scaled uniform initialisation: ReLU layers use sqrt(6 / fan_in),
  /// the head sqrt(3 / fan_in).
  MlpModel(const MlpSpec& spec, std::uint64_t seed);

  const MlpSpec& spec() const noexcept { return spec_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  /// Post-ReLU activations of the feature layer.
  std::vector<double> features(std::span<const double> input) const;
  std::size_t feature_width() const noexcept { return spec_.feature_dim == 0 ? spec_.input_dim : spec_.feature_dim; }

  ClassifierHead head() const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  MlpSpec spec_;
  std::vector<DenseLayer> layers_;  // hidden..., feature, head
};

struct TrainConfig {
  LossKind loss = LossKind::Softmax;
  double scale = 1.0;  // L2-Softmax feature norm s
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double decay_rate = 1.0;       // lr * decay_rate^(step / decay_steps)
  std::size_t decay_steps = 0;   // 0: constant learning rate
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  std::size_t probe_size = 256;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

/// Throws BadSpec on an invalid configuration.
void validate(const TrainConfig& config);

/// Feature handed to the head: the activations themselves, or s * a / |a|
/// under L2-Softmax.
std::vector<double> head_input(std::span<const double> features, const TrainConfig& config);

std::vector<double> model_logits(const MlpModel& model, const TrainConfig& config, std::span<const double> input);
std::size_t predict(const MlpModel& model, const TrainConfig& config, std::span<const double> input);

struct LossAndGradient {
  double loss = 0.0;  // mean cross-entropy
  std::vector<DenseLayer> gradient;
};

/// Mean cross-entropy over `rows` of `data` and its exact gradient.
LossAndGradient loss_and_gradient(const MlpModel& model, const TrainConfig& config, const LabeledFeatureSet& data,
                                  std::span<const std::size_t> rows);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const MlpModel& model, const TrainConfig& config, const LabeledFeatureSet& data);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_loss;
  std::optional<double> test_accuracy;
  GradientMagnitudeSummary probe;
  std::string snapshot_id;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  std::size_t probe_size = 0;
  std::size_t steps = 0;

  /// Test over train cross-entropy of the last epoch.
  std::optional<double> loss_ratio() const;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, TrainTrace trace)
      : Error(ErrorCode::DivergenceDetected, what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const noexcept { return trace_; }

 private:
  TrainTrace trace_;
};

struct TrainResult {
  MlpModel model;
  TrainTrace trace;
};

using EpochCallback = std::function<void(const MlpModel&, EpochRecord&)>;

/// Minibatch training with a fixed-order, single-threaded reduction; equal
/// inputs give bitwise-equal models. The probe batch is drawn once from the
/// training split and reused every epoch.
TrainResult train(const MlpSpec& spec, const TrainConfig& config, const LabeledFeatureSet& train_set,
                  const LabeledFeatureSet* test_set = nullptr, const EpochCallback& on_epoch = {});

struct FeatureExport {
  LabeledFeatureSet features;  // unnormalized feature-layer activations
  ClassifierHead head;
  LossKind loss = LossKind::Softmax;
  double scale = 1.0;
};

FeatureExport export_features(const MlpModel& model, const TrainConfig& config, const LabeledFeatureSet& data);

}  // namespace featspace
