#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "featspace/fusion.hpp"

namespace featspace {
namespace {

LabeledFeatureSet balanced_set(std::size_t per_class, std::size_t classes, int groups) {
  LabeledFeatureSet s;
  s.num_classes = classes;
  std::size_t id = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k, ++id) {
      s.vectors.append_row(std::vector<double>{static_cast<double>(id), 1.0});
      s.labels.push_back(c);
      s.groups.push_back(static_cast<int>(k % groups));
      s.ids.push_back(id);
    }
  }
  return s;
}

FusionExperimentConfig tiny_config(double spread) {
  FusionExperimentConfig cfg;
  for (ExtractorSpec* e : {&cfg.modality_v, &cfg.modality_a}) {
    e->data.num_classes = 3;
    e->data.input_dim = 6;
    e->data.train_per_class = 16;
    e->data.test_per_class = 16;
    e->data.spread = spread;
    e->data.nuisance_groups = 4;
    e->data.group_offset = 0.0;
    e->model.input_dim = 6;
    e->model.num_classes = 3;
    e->model.hidden = {8};
    e->model.feature_dim = 4;
    e->train.epochs = 30;
    e->train.learning_rate = 1e-2;
  }
  cfg.fusion.train.epochs = 30;
  cfg.fusion.train.learning_rate = 1e-2;
  cfg.leave_out_group = 0;
  cfg.seed = 1;
  return cfg;
}

TEST(Strategy, NamesRoundTrip) {
  for (auto s : {FusionStrategy::S11, FusionStrategy::S12, FusionStrategy::Saa})
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_EQ(to_string(FusionStrategy::S12), "S_1-2");
  EXPECT_EQ(parse_strategy("aa"), FusionStrategy::Saa);
  EXPECT_THROW(parse_strategy("S_2-2"), Error);
}

TEST(Split, HundredSamplesFourClasses) {
  const auto data = balanced_set(25, 4, 1);
  const auto [d1, d2] = split_rows(data, 5);
  EXPECT_EQ(d1.size(), 50u);
  EXPECT_EQ(d2.size(), 50u);
  for (const auto* half : {&d1, &d2}) {
    std::array<int, 4> per_class{};
    for (std::size_t r : *half) ++per_class[data.labels[r]];
    for (int c : per_class) {
      EXPECT_GE(c, 12);
      EXPECT_LE(c, 13);
    }
  }
  std::vector<std::size_t> all(d1);
  all.insert(all.end(), d2.begin(), d2.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(100);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(all, expected);
}

TEST(Split, DeterministicAndStratified) {
  const auto data = balanced_set(17, 3, 4);
  EXPECT_EQ(split_rows(data, 9), split_rows(data, 9));
  EXPECT_NE(split_rows(data, 9), split_rows(data, 10));
  const auto [d1, d2] = split_rows(data, 9);
  std::map<std::size_t, int> class_diff;
  std::map<int, int> group_diff;
  for (std::size_t r : d1) {
    ++class_diff[data.labels[r]];
    ++group_diff[data.groups[r]];
  }
  for (std::size_t r : d2) {
    --class_diff[data.labels[r]];
    --group_diff[data.groups[r]];
  }
  for (auto [c, d] : class_diff) EXPECT_LE(std::abs(d), 1) << "class " << c;
  for (auto [g, d] : group_diff) EXPECT_LE(std::abs(d), 2) << "group " << g;
}

TEST(Split, TooSmall) {
  const auto data = balanced_set(1, 1, 1);
  try {
    split_dataset(data, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooSmall);
  }
}

TEST(Fuse, PlacementAndZeroBlock) {
  LabeledFeatureSet v, a;
  v.num_classes = a.num_classes = 2;
  v.vectors.append_row(std::vector<double>{1, 2, 3});
  a.vectors.append_row(std::vector<double>{0, 0});
  v.labels = a.labels = {1};
  v.ids = a.ids = {7};
  const auto f = fuse(v, a);
  ASSERT_EQ(f.dim(), 5u);
  const auto r = f.vectors.row(0);
  EXPECT_EQ(std::vector<double>(r.begin(), r.end()), (std::vector<double>{1, 2, 3, 0, 0}));
  EXPECT_EQ(f.labels[0], 1u);
  EXPECT_EQ(f.id(0), 7u);
}

TEST(Fuse, PermutationCommutes) {
  auto v = balanced_set(3, 2, 1);
  auto a = balanced_set(3, 2, 1);
  for (std::size_t r = 0; r < a.size(); ++r) a.vectors(r, 1) = -static_cast<double>(r);
  const std::vector<std::size_t> perm{4, 0, 5, 2, 1, 3};
  const auto fused_then_perm = fuse(v, a).subset(perm);
  const auto perm_then_fused = fuse(v.subset(perm), a.subset(perm));
  EXPECT_EQ(fused_then_perm.vectors, perm_then_fused.vectors);
  EXPECT_EQ(fused_then_perm.labels, perm_then_fused.labels);
}

TEST(Fuse, Misalignment) {
  auto v = balanced_set(2, 2, 1);
  auto a = balanced_set(2, 2, 1);
  a.ids[0] = 99;
  try {
    fuse(v, a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AlignmentMismatch);
  }
}

TEST(Seeds, DerivedSeedsDifferAndRepeat) {
  const auto s = derive_seeds(3);
  const auto t = derive_seeds(3);
  std::set<std::uint64_t> distinct{s.data_v, s.data_a, s.split, s.extractor_v, s.extractor_a, s.fusion};
  EXPECT_EQ(distinct.size(), 6u);
  EXPECT_EQ(s.split, t.split);
  EXPECT_NE(derive_seeds(4).split, s.split);
}

TEST(RunStrategies, HeldOutGroupNeverTrains) {
  const auto cfg = tiny_config(0.3);
  const std::array all{FusionStrategy::S11, FusionStrategy::S12, FusionStrategy::Saa};
  const auto run = run_strategies(cfg, all);
  ASSERT_EQ(run.outcomes.size(), 3u);
  const std::set<std::size_t> held(run.held_out_ids.begin(), run.held_out_ids.end());
  EXPECT_FALSE(held.empty());
  for (const auto& o : run.outcomes) {
    for (std::size_t id : o.extractor_train_ids) EXPECT_FALSE(held.count(id));
    for (std::size_t id : o.fusion_train_ids) EXPECT_FALSE(held.count(id));
    EXPECT_EQ(o.extractors.size(), 2u);
  }
  const auto& s11 = run.outcomes[0];
  const auto& s12 = run.outcomes[1];
  const auto& saa = run.outcomes[2];
  EXPECT_EQ(s11.extractor_train_ids, s11.fusion_train_ids);
  EXPECT_EQ(s11.extractor_train_ids, s12.extractor_train_ids);
  for (std::size_t id : s12.fusion_train_ids)
    EXPECT_FALSE(std::binary_search(s12.extractor_train_ids.begin(), s12.extractor_train_ids.end(), id));
  EXPECT_EQ(saa.extractor_train_ids.size(), s11.extractor_train_ids.size() + s12.fusion_train_ids.size());
}

TEST(RunStrategies, Deterministic) {
  const auto cfg = tiny_config(0.3);
  EXPECT_EQ(run_strategy(cfg, FusionStrategy::S12).held_out_accuracy,
            run_strategy(cfg, FusionStrategy::S12).held_out_accuracy);
}

TEST(RunStrategies, ZeroSpreadStrategiesAgree) {
  const auto cfg = tiny_config(0.0);
  const std::array all{FusionStrategy::S11, FusionStrategy::S12, FusionStrategy::Saa};
  const auto run = run_strategies(cfg, all);
  for (const auto& o : run.outcomes) EXPECT_GE(o.held_out_accuracy, 0.95) << to_string(o.strategy);
}

TEST(FusionTable, ShapeAndMean) {
  const auto cfg = tiny_config(0.3);
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto t = fusion_table(cfg, seeds);
  ASSERT_EQ(t.accuracy.size(), 2u);
  ASSERT_EQ(t.mean.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(t.mean[s], (t.accuracy[0][s] + t.accuracy[1][s]) / 2, 1e-15);
}

}  // namespace
}  // namespace featspace
