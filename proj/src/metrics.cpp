#include "featspace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>

#include "featspace/geometry.hpp"
#include "featspace/kernels.hpp"

namespace featspace {

namespace {

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double n = norm(row);
    require(n > 0.0, ErrorCode::ZeroVector, "row " + std::to_string(r) + " is a zero vector");
    for (double& x : row) x /= n;
  }
  return out;
}

std::vector<std::vector<std::size_t>> rows_by_class(const LabeledFeatureSet& set) {
  std::vector<std::vector<std::size_t>> by_class(set.num_classes);
  for (std::size_t r = 0; r < set.size(); ++r) by_class[set.labels[r]].push_back(r);
  return by_class;
}

// Distance between unit vectors.
double unit_distance(std::span<const double> u, std::span<const double> v) { return 1.0 - kernels::dot(u, v); }

}  // namespace

void LabeledFeatureSet::validate(bool allow_zero_vectors) const {
  require(vectors.rows() == labels.size(), ErrorCode::DimensionMismatch, "one label per row required");
  require(groups.empty() || groups.size() == labels.size(), ErrorCode::DimensionMismatch,
          "one group per row required");
  require(ids.empty() || ids.size() == labels.size(), ErrorCode::DimensionMismatch, "one id per row required");
  require(class_names.empty() || class_names.size() == num_classes, ErrorCode::DimensionMismatch,
          "class name count differs from class count");
  for (std::size_t r = 0; r < labels.size(); ++r) {
    require(labels[r] < num_classes, ErrorCode::UnknownLabel,
            "label " + std::to_string(labels[r]) + " at row " + std::to_string(r) + " exceeds class count");
    for (double x : vectors.row(r)) {
      require(std::isfinite(x), ErrorCode::InvalidArgument, "non-finite value at row " + std::to_string(r));
    }
    if (!allow_zero_vectors) {
      require(kernels::sum_squares(vectors.row(r)) > 0.0, ErrorCode::ZeroVector,
              "row " + std::to_string(r) + " is a zero vector");
    }
  }
}

LabeledFeatureSet LabeledFeatureSet::subset(std::span<const std::size_t> rows) const {
  LabeledFeatureSet out;
  out.split = split;
  out.class_names = class_names;
  out.num_classes = num_classes;
  out.vectors = Matrix(0, vectors.cols());
  for (std::size_t r : rows) {
    out.vectors.append_row(vectors.row(r));
    out.labels.push_back(labels[r]);
    if (!groups.empty()) out.groups.push_back(groups[r]);
    out.ids.push_back(id(r));
  }
  return out;
}

std::size_t drop_zero_vectors(LabeledFeatureSet& set) {
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < set.size(); ++r) {
    if (kernels::sum_squares(set.vectors.row(r)) > 0.0) keep.push_back(r);
  }
  const std::size_t dropped = set.size() - keep.size();
  if (dropped > 0) set = set.subset(keep);
  return dropped;
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorCode::DimensionMismatch, "cosine distance of vectors of different length");
  const double nu = norm(u);
  const double nv = norm(v);
  require(nu > 0.0 && nv > 0.0, ErrorCode::ZeroVector, "cosine distance with a zero vector");
  return 1.0 - kernels::dot(u, v) / (nu * nv);
}

CentralityResult centrality(const LabeledFeatureSet& set) {
  set.validate();
  require(set.num_classes >= 2, ErrorCode::SingleClass, "centrality needs at least 2 classes");
  const auto by_class = rows_by_class(set);
  const Matrix unit = normalized_rows(set.vectors);

  CentralityResult result;
  result.central_vectors = Matrix(set.num_classes, set.dim());
  for (std::size_t c = 0; c < set.num_classes; ++c) {
    require(!by_class[c].empty(), ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " is empty");
    auto center = result.central_vectors.row(c);
    for (std::size_t r : by_class[c]) kernels::axpy(1.0, unit.row(r), center);
    for (double& x : center) x /= static_cast<double>(by_class[c].size());
    require(norm(center) >= 1e-12, ErrorCode::DegenerateCentroid,
            "central vector of class " + std::to_string(c) + " vanishes");
  }

  result.centrality.assign(set.num_classes, 0.0);
  result.nearest.assign(set.num_classes, 0);
  for (std::size_t i = 0; i < set.num_classes; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < set.num_classes; ++k) {
      if (k == i) continue;
      const double d = cosine_distance(result.central_vectors.row(i), result.central_vectors.row(k));
      if (d < best) {
        best = d;
        result.nearest[i] = k;
      }
    }
    result.centrality[i] = best;
  }
  return result;
}

SplitMetrics split_metrics(const LabeledFeatureSet& set, PairDivisor divisor) {
  CentralityResult cr = centrality(set);
  const auto by_class = rows_by_class(set);
  const Matrix unit = normalized_rows(set.vectors);

  SplitMetrics m;
  m.central_vectors = std::move(cr.central_vectors);
  m.centrality = std::move(cr.centrality);
  m.nearest = std::move(cr.nearest);
  m.intra.resize(set.num_classes);
  m.inter.resize(set.num_classes);
  m.separability.resize(set.num_classes);
  for (std::size_t i = 0; i < set.num_classes; ++i) {
    const auto& rows = by_class[i];
    const auto n = static_cast<double>(rows.size());
    m.class_sizes.push_back(rows.size());
    require(rows.size() >= 2, ErrorCode::ClassTooSmall,
            "class " + std::to_string(i) + " needs at least 2 vectors for separability");

    double intra = 0.0;
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = a + 1; b < rows.size(); ++b) intra += unit_distance(unit.row(rows[a]), unit.row(rows[b]));
    }
    intra *= 2.0;  // ordered pairs k != l
    m.intra[i] = intra / (divisor == PairDivisor::Literal ? n * n : n * (n - 1.0));

    const auto& other = by_class[m.nearest[i]];
    double inter = 0.0;
    for (std::size_t a : rows) {
      for (std::size_t b : other) inter += unit_distance(unit.row(a), unit.row(b));
    }
    m.inter[i] = inter / (n * static_cast<double>(other.size()));
    require(m.inter[i] > 0.0, ErrorCode::ZeroDenominator,
            "class " + std::to_string(i) + " coincides with its nearest class");
    m.separability[i] = m.intra[i] / m.inter[i];
  }
  return m;
}

Ratios ratios(const SplitMetrics& train, const SplitMetrics& test) {
  const std::size_t n = train.centrality.size();
  require(n == test.centrality.size() && n == train.separability.size() && n == test.separability.size(),
          ErrorCode::ClassMismatch, "train and test splits have different class sets");
  require(n > 0, ErrorCode::ClassMismatch, "no classes to compare");
  Ratios r;
  for (std::size_t i = 0; i < n; ++i) {
    require(train.centrality[i] > 0.0, ErrorCode::ZeroDenominator,
            "train centrality of class " + std::to_string(i) + " is zero");
    require(train.separability[i] > 0.0, ErrorCode::ZeroDenominator,
            "train separability of class " + std::to_string(i) + " is zero");
    r.centrality_ratio += test.centrality[i] / train.centrality[i];
    r.separability_ratio += test.separability[i] / train.separability[i];
  }
  r.centrality_ratio /= static_cast<double>(n);
  r.separability_ratio /= static_cast<double>(n);
  return r;
}

MetricsReport metrics_report(const LabeledFeatureSet& train, const LabeledFeatureSet* test,
                             std::optional<double> loss_ratio, PairDivisor divisor) {
  MetricsReport report;
  report.divisor = divisor;
  report.train = split_metrics(train, divisor);
  if (test != nullptr) {
    require(test->num_classes == train.num_classes, ErrorCode::ClassMismatch,
            "train and test splits have different class counts");
    report.test = split_metrics(*test, divisor);
    report.ratio = ratios(report.train, *report.test);
  }
  report.loss_ratio = loss_ratio;
  return report;
}

double mean_intra_class_distance(const LabeledFeatureSet& set) {
  set.validate();
  const auto by_class = rows_by_class(set);
  const Matrix unit = normalized_rows(set.vectors);
  double total = 0.0;
  std::size_t classes = 0;
  for (const auto& rows : by_class) {
    if (rows.size() < 2) continue;
    double sum = 0.0;
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = a + 1; b < rows.size(); ++b) sum += unit_distance(unit.row(rows[a]), unit.row(rows[b]));
    }
    const auto n = static_cast<double>(rows.size());
    total += 2.0 * sum / (n * (n - 1.0));
    ++classes;
  }
  require(classes > 0, ErrorCode::ClassTooSmall, "no class has two or more vectors");
  return total / static_cast<double>(classes);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCode::DimensionMismatch, "pearson needs sequences of equal length");
  require(x.size() >= 3, ErrorCode::InvalidArgument, "pearson needs at least 3 points");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, ErrorCode::DegenerateVariance, "pearson input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> zscore(std::span<const double> x) {
  require(!x.empty(), ErrorCode::InvalidArgument, "zscore of an empty sequence");
  const auto n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  require(sd > 0.0, ErrorCode::DegenerateVariance, "zscore input has zero variance");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
  return out;
}

std::vector<KnnAccuracy> knn_angular_eval(const LabeledFeatureSet& set, std::span<const std::size_t> k_values) {
  set.validate();
  const std::size_t m = set.size();
  std::size_t k_max = 0;
  for (std::size_t k : k_values) {
    require(k % 2 == 1, ErrorCode::EvenK, "k = " + std::to_string(k) + " is even");
    require(k < m, ErrorCode::KTooLarge, "k = " + std::to_string(k) + " needs more than k vectors");
    k_max = std::max(k_max, k);
  }
  const Matrix unit = normalized_rows(set.vectors);

  std::vector<std::size_t> correct(k_values.size(), 0);
  std::vector<std::pair<double, std::size_t>> dist(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t p = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) dist[p++] = {unit_distance(unit.row(i), unit.row(j)), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_max), dist.end());
    // Running count of same-class neighbours among the first k.
    std::vector<std::size_t> same_upto(k_max + 1, 0);
    for (std::size_t r = 0; r < k_max; ++r) {
      same_upto[r + 1] = same_upto[r] + (set.labels[dist[r].second] == set.labels[i] ? 1 : 0);
    }
    for (std::size_t q = 0; q < k_values.size(); ++q) {
      if (2 * same_upto[k_values[q]] > k_values[q]) ++correct[q];
    }
  }
  std::vector<KnnAccuracy> out;
  for (std::size_t q = 0; q < k_values.size(); ++q) {
    out.push_back({k_values[q], static_cast<double>(correct[q]) / static_cast<double>(m)});
  }
  return out;
}

DistanceMatrix cosine_distance_matrix(const LabeledFeatureSet& set) {
  set.validate();
  DistanceMatrix dm;
  dm.order.resize(set.size());
  std::iota(dm.order.begin(), dm.order.end(), std::size_t{0});
  std::stable_sort(dm.order.begin(), dm.order.end(),
                   [&](std::size_t a, std::size_t b) { return set.labels[a] < set.labels[b]; });
  const Matrix unit = normalized_rows(set.vectors);
  dm.values = Matrix(set.size(), set.size());
  for (std::size_t a = 0; a < set.size(); ++a) {
    dm.labels.push_back(set.labels[dm.order[a]]);
    for (std::size_t b = 0; b < set.size(); ++b) {
      dm.values(a, b) = a == b ? 0.0 : unit_distance(unit.row(dm.order[a]), unit.row(dm.order[b]));
    }
  }
  return dm;
}

DivResult div_statistic(std::span<const PointCloudInstance> instances, std::size_t part_class, DivOptions options) {
  require(options.fraction > 0.0 && options.fraction <= 1.0, ErrorCode::InvalidArgument,
          "subsample fraction must be in (0, 1]");
  std::vector<std::size_t> chosen(instances.size());
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  if (options.fraction < 1.0) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(chosen.begin(), chosen.end(), rng);
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(options.fraction * static_cast<double>(instances.size()))));
    chosen.resize(std::min(keep, chosen.size()));
    std::sort(chosen.begin(), chosen.end());
  }

  // Points of the requested class, one cloud per instance that has >= 2 of them.
  std::vector<Matrix> clouds;
  std::size_t containing = 0;
  for (std::size_t idx : chosen) {
    const auto& inst = instances[idx];
    require(inst.points.cols() == 3, ErrorCode::DimensionMismatch, "point clouds must be P x 3");
    require(inst.part_labels.size() == inst.points.rows(), ErrorCode::DimensionMismatch,
            "instance " + inst.id + " needs one label per point");
    Matrix cloud(0, 3);
    for (std::size_t p = 0; p < inst.points.rows(); ++p) {
      if (inst.part_labels[p] == part_class) cloud.append_row(inst.points.row(p));
    }
    if (cloud.rows() > 0) ++containing;
    if (cloud.rows() >= 2) clouds.push_back(std::move(cloud));
  }
  require(clouds.size() >= 2, ErrorCode::InsufficientInstances,
          "need at least 2 instances with 2 or more points of class " + std::to_string(part_class));

  auto mean_distance = [](const Matrix& a, const Matrix& b, bool same) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < b.rows(); ++j) {
        if (same && i == j) continue;
        sum += std::sqrt(kernels::squared_distance(a.row(i), b.row(j)));
      }
    }
    const double pairs = same ? static_cast<double>(a.rows()) * static_cast<double>(a.rows() - 1)
                              : static_cast<double>(a.rows()) * static_cast<double>(b.rows());
    return sum / pairs;
  };

  double cross = 0.0;
  double within = 0.0;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    within += mean_distance(clouds[i], clouds[i], true);
    for (std::size_t j = 0; j < clouds.size(); ++j) {
      if (j != i) cross += mean_distance(clouds[i], clouds[j], false);
    }
  }
  require(within > 0.0, ErrorCode::ZeroDenominator, "every cloud of the class collapses to a point");

  DivResult result;
  result.div = cross / within / static_cast<double>(clouds.size());
  result.instances_with_class = containing;
  result.instances_considered = chosen.size();
  result.presence = static_cast<double>(containing) / static_cast<double>(chosen.size());
  return result;
}

}  // namespace featspace
