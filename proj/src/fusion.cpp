#include "featspace/fusion.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

namespace featspace {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

LabeledFeatureSet concat(const LabeledFeatureSet& a, const LabeledFeatureSet& b) {
  LabeledFeatureSet out = a;
  for (std::size_t r = 0; r < b.size(); ++r) out.vectors.append_row(b.vectors.row(r));
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.groups.insert(out.groups.end(), b.groups.begin(), b.groups.end());
  for (std::size_t r = 0; r < b.size(); ++r) out.ids.push_back(b.id(r));
  return out;
}

struct Pools {
  LabeledFeatureSet pool_v, pool_a;           // every sample of both generator splits
  std::vector<std::size_t> rows_a, rows_1, rows_2, rows_held;
};

Pools build_pools(const FusionExperimentConfig& config, const DerivedSeeds& seeds) {
  const DatasetSpec& sv = config.modality_v.data;
  const DatasetSpec& sa = config.modality_a.data;
  require(sv.num_classes == sa.num_classes && sv.train_per_class == sa.train_per_class &&
              sv.test_per_class == sa.test_per_class && sv.nuisance_groups == sa.nuisance_groups,
          ErrorCode::AlignmentMismatch, "modalities must share class, sample and group layout");
  require(sv.nuisance_groups >= 2, ErrorCode::BadSpec, "fusion needs at least 2 nuisance groups");
  require(config.leave_out_group >= 0 && static_cast<std::size_t>(config.leave_out_group) < sv.nuisance_groups,
          ErrorCode::BadSpec, "leave-out group out of range");

  DatasetSpec dv = sv;
  dv.seed = seeds.data_v;
  DatasetSpec da = sa;
  da.seed = seeds.data_a;
  const Dataset v = make_synthetic_dataset(dv);
  const Dataset a = make_synthetic_dataset(da);

  Pools p;
  p.pool_v = concat(v.train, v.test);
  p.pool_a = concat(a.train, a.test);
  p.pool_v.split = p.pool_a.split = Split::Train;
  for (std::size_t r = 0; r < p.pool_v.size(); ++r) {
    (p.pool_v.groups[r] == config.leave_out_group ? p.rows_held : p.rows_a).push_back(r);
  }
  const LabeledFeatureSet d_a = p.pool_v.subset(p.rows_a);
  auto [h1, h2] = split_rows(d_a, seeds.split);
  for (std::size_t r : h1) p.rows_1.push_back(p.rows_a[r]);
  for (std::size_t r : h2) p.rows_2.push_back(p.rows_a[r]);
  std::sort(p.rows_1.begin(), p.rows_1.end());
  std::sort(p.rows_2.begin(), p.rows_2.end());
  return p;
}

struct TrainedExtractor {
  MlpModel model;
  TrainConfig config;
};

TrainedExtractor train_extractor(const ExtractorSpec& spec, std::uint64_t seed, const LabeledFeatureSet& data) {
  MlpSpec m = spec.model;
  m.input_dim = data.dim();
  m.num_classes = data.num_classes;
  TrainConfig c = spec.train;
  c.seed = seed;
  return {train(m, c, data).model, c};
}

ExtractorReport report_for(const std::string& modality, const std::string& split, const TrainedExtractor& ex,
                           const LabeledFeatureSet& train_rows, const LabeledFeatureSet& held_rows) {
  ExtractorReport r;
  r.modality = modality;
  r.training_split = split;
  r.held_out_accuracy = evaluate(ex.model, ex.config, held_rows).accuracy;
  LabeledFeatureSet ft = export_features(ex.model, ex.config, train_rows).features;
  LabeledFeatureSet fh = export_features(ex.model, ex.config, held_rows).features;
  fh.split = Split::Test;
  drop_zero_vectors(ft);
  drop_zero_vectors(fh);
  try {
    r.metrics = metrics_report(ft, &fh);
  } catch (const Error& e) {
    r.metrics_error = e.what();
  }
  return r;
}

LabeledFeatureSet fused_features(const TrainedExtractor& ev, const TrainedExtractor& ea, const LabeledFeatureSet& v,
                                 const LabeledFeatureSet& a) {
  return fuse(export_features(ev.model, ev.config, v).features, export_features(ea.model, ea.config, a).features);
}

}  // namespace

std::string to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::S11: return "S_1-1";
    case FusionStrategy::S12: return "S_1-2";
    case FusionStrategy::Saa: return "S_a-a";
  }
  return "?";
}

FusionStrategy parse_strategy(const std::string& text) {
  if (text == "S_1-1" || text == "11") return FusionStrategy::S11;
  if (text == "S_1-2" || text == "12") return FusionStrategy::S12;
  if (text == "S_a-a" || text == "aa") return FusionStrategy::Saa;
  throw Error(ErrorCode::BadSpec, "unknown fusion strategy '" + text + "'");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(const LabeledFeatureSet& data,
                                                                         std::uint64_t seed) {
  require(data.size() >= 2, ErrorCode::TooSmall, "splitting needs at least 2 samples");
  std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> cells;
  for (std::size_t r = 0; r < data.size(); ++r) {
    cells[{data.labels[r], data.groups.empty() ? 0 : data.groups[r]}].push_back(r);
  }
  std::mt19937_64 rng(seed);
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  // The parity carries across cells and classes, so odd cells alternate
  // which half receives the extra sample.
  std::size_t dealt = 0;
  for (auto& [key, rows] : cells) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t r : rows) (dealt++ % 2 == 0 ? out.first : out.second).push_back(r);
  }
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

std::pair<LabeledFeatureSet, LabeledFeatureSet> split_dataset(const LabeledFeatureSet& data, std::uint64_t seed) {
  auto [a, b] = split_rows(data, seed);
  return {data.subset(a), data.subset(b)};
}

LabeledFeatureSet fuse(const LabeledFeatureSet& v, const LabeledFeatureSet& a) {
  require(v.size() == a.size(), ErrorCode::AlignmentMismatch, "modalities have different sample counts");
  for (std::size_t r = 0; r < v.size(); ++r) {
    require(v.id(r) == a.id(r), ErrorCode::AlignmentMismatch, "sample ids differ at row " + std::to_string(r));
    require(v.labels[r] == a.labels[r], ErrorCode::AlignmentMismatch, "labels differ at row " + std::to_string(r));
  }
  LabeledFeatureSet out;
  out.vectors = Matrix(0, v.dim() + a.dim());
  std::vector<double> row(v.dim() + a.dim());
  for (std::size_t r = 0; r < v.size(); ++r) {
    std::copy(v.vectors.row(r).begin(), v.vectors.row(r).end(), row.begin());
    std::copy(a.vectors.row(r).begin(), a.vectors.row(r).end(), row.begin() + static_cast<std::ptrdiff_t>(v.dim()));
    out.vectors.append_row(row);
  }
  out.labels = v.labels;
  out.groups = v.groups;
  out.ids = v.ids;
  out.split = v.split;
  out.class_names = v.class_names;
  out.num_classes = v.num_classes;
  return out;
}

DerivedSeeds derive_seeds(std::uint64_t seed) {
  return {splitmix(seed * 8 + 1), splitmix(seed * 8 + 2), splitmix(seed * 8 + 3),
          splitmix(seed * 8 + 4), splitmix(seed * 8 + 5), splitmix(seed * 8 + 6)};
}

FusionRun run_strategies(const FusionExperimentConfig& config, std::span<const FusionStrategy> strategies) {
  const DerivedSeeds seeds = derive_seeds(config.seed);
  const Pools p = build_pools(config, seeds);

  FusionRun run;
  run.seed = config.seed;
  const LabeledFeatureSet held_v = p.pool_v.subset(p.rows_held);
  const LabeledFeatureSet held_a = p.pool_a.subset(p.rows_held);
  for (std::size_t r = 0; r < held_v.size(); ++r) run.held_out_ids.push_back(held_v.id(r));

  struct Extractors {
    TrainedExtractor v, a;
    std::vector<ExtractorReport> reports;
  };
  std::map<int, Extractors> cache;  // 1: trained on D_1, 0: trained on D_a
  auto extractors_on = [&](bool use_d1) -> const Extractors& {
    const int key = use_d1 ? 1 : 0;
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const auto& rows = use_d1 ? p.rows_1 : p.rows_a;
    const LabeledFeatureSet tv = p.pool_v.subset(rows);
    const LabeledFeatureSet ta = p.pool_a.subset(rows);
    Extractors e{train_extractor(config.modality_v, seeds.extractor_v, tv),
                 train_extractor(config.modality_a, seeds.extractor_a, ta), {}};
    const std::string name = use_d1 ? "D_1" : "D_a";
    e.reports.push_back(report_for("V", name, e.v, tv, held_v));
    e.reports.push_back(report_for("A", name, e.a, ta, held_a));
    return cache.emplace(key, std::move(e)).first->second;
  };

  for (FusionStrategy s : strategies) {
    const bool extractors_d1 = s != FusionStrategy::Saa;
    const auto& fusion_rows = s == FusionStrategy::S11 ? p.rows_1 : s == FusionStrategy::S12 ? p.rows_2 : p.rows_a;
    const Extractors& ex = extractors_on(extractors_d1);

    const LabeledFeatureSet fused_train =
        fused_features(ex.v, ex.a, p.pool_v.subset(fusion_rows), p.pool_a.subset(fusion_rows));
    const LabeledFeatureSet fused_held = fused_features(ex.v, ex.a, held_v, held_a);

    MlpSpec fm;
    fm.input_dim = fused_train.dim();
    fm.hidden = config.fusion.hidden;
    fm.feature_dim = config.fusion.feature_dim;
    fm.num_classes = fused_train.num_classes;
    fm.head_bias = fm.feature_dim == 0;
    TrainConfig fc = config.fusion.train;
    fc.seed = seeds.fusion;
    const MlpModel fusion_model = train(fm, fc, fused_train).model;

    StrategyOutcome o;
    o.strategy = s;
    o.held_out_accuracy = evaluate(fusion_model, fc, fused_held).accuracy;
    for (std::size_t r : extractors_d1 ? p.rows_1 : p.rows_a) o.extractor_train_ids.push_back(p.pool_v.id(r));
    for (std::size_t r : fusion_rows) o.fusion_train_ids.push_back(p.pool_v.id(r));
    o.extractors = ex.reports;
    run.outcomes.push_back(std::move(o));
  }
  return run;
}

StrategyOutcome run_strategy(const FusionExperimentConfig& config, FusionStrategy strategy) {
  const FusionStrategy one[] = {strategy};
  return std::move(run_strategies(config, one).outcomes.front());
}

FusionTable fusion_table(const FusionExperimentConfig& config, std::span<const std::uint64_t> seeds) {
  require(!seeds.empty(), ErrorCode::BadSpec, "fusion table needs at least one seed");
  FusionTable t;
  t.strategies = {FusionStrategy::S11, FusionStrategy::S12, FusionStrategy::Saa};
  t.seeds.assign(seeds.begin(), seeds.end());
  t.mean.assign(t.strategies.size(), 0.0);
  for (std::uint64_t seed : seeds) {
    FusionExperimentConfig c = config;
    c.seed = seed;
    const FusionRun run = run_strategies(c, t.strategies);
    std::vector<double> row;
    for (std::size_t k = 0; k < run.outcomes.size(); ++k) {
      row.push_back(run.outcomes[k].held_out_accuracy);
      t.mean[k] += run.outcomes[k].held_out_accuracy / static_cast<double>(seeds.size());
    }
    t.accuracy.push_back(std::move(row));
  }
  return t;
}

}  // namespace featspace
