#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "featspace/division.hpp"
#include "featspace/metrics.hpp"
#include "featspace/toytrain.hpp"

namespace featspace {
namespace {

DatasetSpec small_data(std::uint64_t seed = 3) {
  DatasetSpec d;
  d.num_classes = 3;
  d.input_dim = 6;
  d.train_per_class = 20;
  d.test_per_class = 10;
  d.spread = 0.3;
  d.seed = seed;
  return d;
}

MlpSpec small_model(const DatasetSpec& d, bool head_bias = false) {
  MlpSpec m;
  m.input_dim = d.input_dim;
  m.num_classes = d.num_classes;
  m.hidden = {8};
  m.feature_dim = 5;
  m.head_bias = head_bias;
  return m;
}

double max_gradient_error(const MlpModel& model, const TrainConfig& cfg, const LabeledFeatureSet& data,
                          const std::vector<std::size_t>& rows) {
  const auto analytic = loss_and_gradient(model, cfg, data, rows);
  MlpModel probe = model;
  double worst = 0.0;
  constexpr double h = 1e-6;
  for (std::size_t l = 0; l < probe.layers().size(); ++l) {
    auto& layer = probe.layers()[l];
    auto check = [&](double& param, double grad) {
      const double saved = param;
      param = saved + h;
      const double up = loss_and_gradient(probe, cfg, data, rows).loss;
      param = saved - h;
      const double down = loss_and_gradient(probe, cfg, data, rows).loss;
      param = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(numeric - grad) / std::max(1.0, std::abs(grad)));
    };
    auto w = layer.weights.data();
    const auto gw = analytic.gradient[l].weights.data();
    for (std::size_t k = 0; k < w.size(); ++k) check(w[k], gw[k]);
    for (std::size_t k = 0; k < layer.bias.size(); ++k) check(layer.bias[k], analytic.gradient[l].bias[k]);
  }
  return worst;
}

TEST(Dataset, DeterministicAndShaped) {
  const auto spec = small_data();
  const auto a = make_synthetic_dataset(spec);
  const auto b = make_synthetic_dataset(spec);
  EXPECT_EQ(a.train.vectors, b.train.vectors);
  EXPECT_EQ(a.test.vectors, b.test.vectors);
  EXPECT_EQ(a.train.size(), 60u);
  EXPECT_EQ(a.test.size(), 30u);
  EXPECT_EQ(a.train.id(0), 0u);
  EXPECT_EQ(a.test.id(0), 60u);
  auto other = spec;
  other.seed = 4;
  EXPECT_NE(make_synthetic_dataset(other).train.vectors, a.train.vectors);
}

TEST(Dataset, RejectsBadSpecs) {
  auto spec = small_data();
  spec.spread = -1;
  EXPECT_THROW(make_synthetic_dataset(spec), Error);
  spec = small_data();
  spec.num_classes = 1;
  EXPECT_THROW(make_synthetic_dataset(spec), Error);
}

TEST(Dataset, ZeroSpreadIsFullyLearnable) {
  auto spec = small_data();
  spec.spread = 0.0;
  const auto data = make_synthetic_dataset(spec);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 1e-2;
  const auto r = train(small_model(spec), cfg, data.train);
  EXPECT_EQ(evaluate(r.model, cfg, data.train).accuracy, 1.0);
}

TEST(Dataset, GroupShiftHurtsHeldOutGroup) {
  DatasetSpec spec;
  spec.num_classes = 3;
  spec.input_dim = 10;
  spec.train_per_class = 40;
  spec.test_per_class = 40;
  spec.spread = 0.3;
  spec.nuisance_groups = 2;
  spec.group_offset = 3.0;
  spec.seed = 5;
  const auto data = make_synthetic_dataset(spec);
  auto rows_in = [](const LabeledFeatureSet& s, int g) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < s.size(); ++r)
      if (s.groups[r] == g) rows.push_back(r);
    return rows;
  };
  const auto tr = rows_in(data.train, 0);
  const auto seen = rows_in(data.test, 0);
  const auto unseen = rows_in(data.test, 1);
  const auto train_set = data.train.subset(tr);
  MlpSpec m = small_model(spec);
  m.hidden = {16};
  m.feature_dim = 8;
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 1e-2;
  const auto r = train(m, cfg, train_set);
  const double iid = evaluate(r.model, cfg, data.test.subset(seen)).accuracy;
  const double shifted = evaluate(r.model, cfg, data.test.subset(unseen)).accuracy;
  EXPECT_LT(shifted, iid);
}

TEST(Model, LinearVariantHasNoHiddenLayers) {
  MlpSpec m;
  m.input_dim = 4;
  m.hidden = {};
  m.feature_dim = 0;
  m.num_classes = 3;
  const MlpModel model(m, 1);
  EXPECT_EQ(model.layers().size(), 1u);
  EXPECT_EQ(model.feature_width(), 4u);
  const std::vector<double> x{1, -2, 3, 0.5};
  const auto f = model.features(x);
  EXPECT_EQ(f, x);
}

TEST(Gradient, SoftmaxMatchesCentralDifferences) {
  const auto spec = small_data();
  const auto data = make_synthetic_dataset(spec);
  const MlpModel model(small_model(spec, true), 7);
  TrainConfig cfg;
  EXPECT_LT(max_gradient_error(model, cfg, data.train, {0, 25, 47}), 1e-4);
}

TEST(Gradient, L2SoftmaxMatchesCentralDifferences) {
  const auto spec = small_data();
  const auto data = make_synthetic_dataset(spec);
  const MlpModel model(small_model(spec), 8);
  TrainConfig cfg;
  cfg.loss = LossKind::L2Softmax;
  cfg.scale = 2.5;
  EXPECT_LT(max_gradient_error(model, cfg, data.train, {3, 30, 59}), 1e-4);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  const auto spec = small_data();
  const auto data = make_synthetic_dataset(spec);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  const MlpModel initial(small_model(spec), cfg.seed);
  for (auto opt : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
    cfg.optimizer = opt;
    EXPECT_TRUE(train(small_model(spec), cfg, data.train).model == initial);
  }
}

TEST(Train, BitwiseDeterministic) {
  const auto spec = small_data();
  const auto data = make_synthetic_dataset(spec);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 11;
  const auto a = train(small_model(spec), cfg, data.train, &data.test);
  const auto b = train(small_model(spec), cfg, data.train, &data.test);
  EXPECT_TRUE(a.model == b.model);
  ASSERT_EQ(a.trace.epochs.size(), 5u);
  for (std::size_t e = 0; e < 5; ++e) {
    EXPECT_EQ(a.trace.epochs[e].train_loss, b.trace.epochs[e].train_loss);
    EXPECT_EQ(a.trace.epochs[e].snapshot_id, b.trace.epochs[e].snapshot_id);
  }
  EXPECT_TRUE(a.trace.loss_ratio().has_value());
}

TEST(Train, SeparableTwoClassReachesHighAccuracy) {
  DatasetSpec spec = small_data();
  spec.num_classes = 2;
  spec.spread = 0.1;
  const auto data = make_synthetic_dataset(spec);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e-2;
  const auto r = train(small_model(spec), cfg, data.train);
  EXPECT_GE(evaluate(r.model, cfg, data.train).accuracy, 0.99);
}

TEST(Train, TraceRecordsProbe) {
  const auto spec = small_data();
  const auto data = make_synthetic_dataset(spec);
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto r = train(small_model(spec), cfg, data.train);
  EXPECT_EQ(r.trace.probe_size, 60u);
  EXPECT_EQ(r.trace.steps, 2u * 2u);  // ceil(60 / 32) batches per epoch
  for (const auto& e : r.trace.epochs) {
    EXPECT_EQ(e.probe.used + e.probe.skipped_collinear + e.probe.skipped_zero, 60u);
    EXPECT_FALSE(e.snapshot_id.empty());
  }
}

TEST(Train, DivergenceCarriesTrace) {
  const auto spec = small_data();
  const auto data = make_synthetic_dataset(spec);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.learning_rate = 1e200;
  cfg.epochs = 5;
  try {
    train(small_model(spec), cfg, data.train);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivergenceDetected);
    EXPECT_LE(e.trace().epochs.size(), 5u);
  }
}

TEST(Logits, ShiftInvarianceOfPrediction) {
  const auto spec = small_data();
  const auto data = make_synthetic_dataset(spec);
  MlpModel model(small_model(spec, true), 9);
  TrainConfig cfg;
  const auto before = evaluate(model, cfg, data.train);
  for (double& b : model.layers().back().bias) b += 5.0;
  const auto after = evaluate(model, cfg, data.train);
  EXPECT_EQ(before.accuracy, after.accuracy);
  EXPECT_NEAR(before.loss, after.loss, 1e-12);
}

TEST(Export, RegionMatchesPredictionAndFeaturesNonNegative) {
  const auto spec = small_data();
  const auto data = make_synthetic_dataset(spec);
  TrainConfig cfg;
  cfg.epochs = 10;
  const auto r = train(small_model(spec, true), cfg, data.train);
  const auto ex = export_features(r.model, cfg, data.test);
  ASSERT_EQ(ex.features.size(), data.test.size());
  const RegionClassifier classifier(ex.head);
  for (std::size_t row = 0; row < ex.features.size(); ++row) {
    const auto f = ex.features.vectors.row(row);
    for (double x : f) ASSERT_GE(x, 0.0);
    ASSERT_EQ(classifier.region_of(f, {TiePolicy::LowestIndex, InputDomain::NonNegative}),
              predict(r.model, cfg, data.test.vectors.row(row)));
  }
}

TEST(Export, UntrainedModelIsDeterministic) {
  const auto spec = small_data();
  const auto data = make_synthetic_dataset(spec);
  TrainConfig cfg;
  const auto a = export_features(MlpModel(small_model(spec), 5), cfg, data.train);
  const auto b = export_features(MlpModel(small_model(spec), 5), cfg, data.train);
  EXPECT_EQ(a.features.vectors, b.features.vectors);
  EXPECT_TRUE(a.head == b.head);
}

TEST(L2Softmax, SmallScaleTightensClasses) {
  DatasetSpec spec;
  spec.spread = 0.3;
  spec.seed = 1;
  const auto data = make_synthetic_dataset(spec);
  MlpSpec m;
  m.input_dim = spec.input_dim;
  m.num_classes = spec.num_classes;
  TrainConfig plain;
  plain.seed = 1;
  TrainConfig l2 = plain;
  l2.loss = LossKind::L2Softmax;
  l2.scale = 0.1;
  auto a = export_features(train(m, plain, data.train).model, plain, data.train).features;
  auto b = export_features(train(m, l2, data.train).model, l2, data.train).features;
  drop_zero_vectors(a);
  drop_zero_vectors(b);
  EXPECT_LT(mean_intra_class_distance(b), mean_intra_class_distance(a));
}

}  // namespace
}  // namespace featspace
