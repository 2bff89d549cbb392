#include "featspace/division.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "featspace/kernels.hpp"

namespace featspace {

DifferentialVectorSet::DifferentialVectorSet(std::size_t num_classes, std::vector<DifferentialVector> pairs)
    : num_classes_(num_classes), pairs_(std::move(pairs)) {}

std::size_t DifferentialVectorSet::index(std::size_t i, std::size_t j) const noexcept {
  // Position of (i, j), i < j, in lexicographic order.
  return i * num_classes_ - i * (i + 1) / 2 + (j - i - 1);
}

std::vector<double> DifferentialVectorSet::get(std::size_t i, std::size_t j) const {
  require(i != j && i < num_classes_ && j < num_classes_, ErrorCode::InvalidArgument,
          "differential vector needs two distinct valid classes");
  if (i < j) return pairs_[index(i, j)].w;
  std::vector<double> w = pairs_[index(j, i)].w;
  for (double& x : w) x = -x;
  return w;
}

DifferentialVectorSet differential_vectors(const ClassifierHead& head) {
  const Matrix& w = head.expanded_weights();
  const std::size_t n_classes = head.num_classes();
  std::vector<DifferentialVector> pairs;
  pairs.reserve(n_classes * (n_classes - 1) / 2);
  for (std::size_t i = 0; i < n_classes; ++i) {
    for (std::size_t j = i + 1; j < n_classes; ++j) {
      DifferentialVector d{i, j, std::vector<double>(w.cols())};
      for (std::size_t c = 0; c < w.cols(); ++c) d.w[c] = w(i, c) - w(j, c);
      require(std::any_of(d.w.begin(), d.w.end(), [](double x) { return x != 0.0; }),
              ErrorCode::DegenerateHead,
              "differential vector " + std::to_string(i) + "," + std::to_string(j) + " is zero");
      pairs.push_back(std::move(d));
    }
  }
  return DifferentialVectorSet(n_classes, std::move(pairs));
}

RegionClassifier::RegionClassifier(const ClassifierHead& head)
    : dim_(head.dim()), bias_(head.has_bias()), diffs_(differential_vectors(head)) {
  diff_norms_.reserve(diffs_.count());
  for (const auto& d : diffs_.pairs()) diff_norms_.push_back(norm(d.w));
}

std::size_t RegionClassifier::region_of(std::span<const double> feature, RegionOptions options) const {
  std::vector<double> expanded;
  std::span<const double> a = feature;
  if (feature.size() == dim_ + 1) {
    require(feature.back() == 1.0, ErrorCode::InvalidArgument, "expanded feature vector must end with 1");
    if (!bias_) a = feature.first(dim_);
  } else {
    require(feature.size() == dim_, ErrorCode::DimensionMismatch,
            "feature length " + std::to_string(feature.size()) + " does not match head width " +
                std::to_string(dim_));
    if (bias_) {
      expanded.assign(feature.begin(), feature.end());
      expanded.push_back(1.0);
      a = expanded;
    }
  }
  if (options.domain == InputDomain::NonNegative) {
    const auto act = a.first(dim_);
    require(std::all_of(act.begin(), act.end(), [](double x) { return x >= 0.0; }), ErrorCode::InvalidArgument,
            "negative activation in non-negative input mode");
  }

  const std::size_t n_classes = diffs_.num_classes();
  const double anorm = norm(a);
  // sign[p] of a . w_ij for stored pair p = (i, j), i < j: +1, -1 or 0 (tie).
  std::vector<int> sign(diffs_.count());
  for (std::size_t p = 0; p < diffs_.count(); ++p) {
    const double d = kernels::dot(a, diffs_.pairs()[p].w);
    const double tol = kTieTolerance * std::max(1.0, anorm * diff_norms_[p]);
    sign[p] = d > tol ? 1 : (d < -tol ? -1 : 0);
  }

  std::size_t p = 0;
  std::vector<int> wins(n_classes, 0);    // strictly positive criteria
  std::vector<int> losses(n_classes, 0);  // strictly negative criteria
  for (std::size_t i = 0; i < n_classes; ++i) {
    for (std::size_t j = i + 1; j < n_classes; ++j, ++p) {
      if (sign[p] > 0) {
        ++wins[i];
        ++losses[j];
      } else if (sign[p] < 0) {
        ++wins[j];
        ++losses[i];
      }
    }
  }
  for (std::size_t i = 0; i < n_classes; ++i) {
    if (wins[i] == static_cast<int>(n_classes - 1)) return i;
  }
  if (options.tie == TiePolicy::LowestIndex) {
    for (std::size_t i = 0; i < n_classes; ++i) {
      if (losses[i] == 0) return i;
    }
  }
  throw Error(ErrorCode::BoundaryTie, "feature vector lies on a decision boundary");
}

std::size_t region_of(std::span<const double> feature, const ClassifierHead& head, RegionOptions options) {
  return RegionClassifier(head).region_of(feature, options);
}

ConvexityReport convexity_check(const ClassifierHead& head, std::size_t samples, std::uint64_t seed) {
  const RegionClassifier classifier(head);
  const std::size_t dim = head.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Sample activations on a scale comparable to the bias so that every
  // region is reachable.
  double scale = 1.0;
  if (head.bias()) {
    double bmax = 0.0;
    for (double b : *head.bias()) bmax = std::max(bmax, std::abs(b));
    double wmin = norm(head.weight(0));
    for (std::size_t i = 1; i < head.num_classes(); ++i) wmin = std::min(wmin, norm(head.weight(i)));
    if (wmin > 0.0) scale = std::max(1.0, 4.0 * bmax / wmin);
  }

  auto draw = [&]() {
    std::vector<double> a(head.has_bias() ? dim + 1 : dim);
    for (std::size_t c = 0; c < dim; ++c) a[c] = scale * normal(rng);
    if (head.has_bias()) a[dim] = 1.0;
    return a;
  };
  auto classify = [&](std::span<const double> a) -> std::optional<std::size_t> {
    try {
      return classifier.region_of(a);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BoundaryTie) throw;
      return std::nullopt;
    }
  };

  constexpr std::size_t kPartnerAttempts = 1000;
  ConvexityReport report;
  std::set<std::size_t> regions;
  std::vector<double> mix;
  for (std::size_t s = 0; s < samples; ++s) {
    std::vector<double> p = draw();
    auto rp = classify(p);
    while (!rp) {
      p = draw();
      rp = classify(p);
    }
    std::optional<std::vector<double>> q;
    for (std::size_t attempt = 0; attempt < kPartnerAttempts && !q; ++attempt) {
      std::vector<double> cand = draw();
      if (classify(cand) == rp) q = std::move(cand);
    }
    if (!q) {
      ++report.skipped_pairs;
      continue;
    }
    ++report.pairs;
    regions.insert(*rp);
    mix.resize(p.size());
    for (int step = 1; step <= 9; ++step) {
      const double lambda = 0.1 * step;
      for (std::size_t c = 0; c < p.size(); ++c) mix[c] = lambda * p[c] + (1.0 - lambda) * (*q)[c];
      if (head.has_bias()) mix.back() = 1.0;
      ++report.interior_points;
      if (classify(mix) != rp) ++report.violations;
    }
  }
  report.regions_observed = regions.size();
  return report;
}

ClassLocusReport locus_angles(const ClassifierHead& head) {
  const std::size_t n_classes = head.num_classes();
  require(n_classes >= 3, ErrorCode::TooFewClasses, "locus angles need at least 3 classes");
  const DifferentialVectorSet diffs = differential_vectors(head);

  ClassLocusReport report;
  for (std::size_t i = 0; i < n_classes; ++i) {
    ClassAngles ca;
    ca.class_index = i;
    for (std::size_t j = 0; j < n_classes; ++j) {
      if (j == i) continue;
      const auto wij = diffs.get(i, j);
      for (std::size_t k = j + 1; k < n_classes; ++k) {
        if (k == i) continue;
        const auto wik = diffs.get(i, k);
        ca.pairs.emplace_back(j, k);
        ca.angles_deg.push_back(angle_between(wij, wik) * 180.0 / std::numbers::pi);
      }
    }
    double sum = 0.0;
    for (double a : ca.angles_deg) sum += a;
    ca.mean = sum / static_cast<double>(ca.angles_deg.size());
    if (ca.angles_deg.size() > 1) {
      double ss = 0.0;
      for (double a : ca.angles_deg) ss += (a - ca.mean) * (a - ca.mean);
      ca.stddev = std::sqrt(ss / static_cast<double>(ca.angles_deg.size() - 1));
    }
    report.classes.push_back(std::move(ca));
  }
  return report;
}

namespace {

// Solves the square system in place with partial pivoting; false if singular.
bool solve(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) < 1e-12) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return true;
}

// Is the origin a convex combination of the given vectors?
bool origin_in_hull(const std::vector<std::vector<double>>& v) {
  const std::size_t m = v.size();
  const std::size_t d = v.front().size();
  const std::size_t max_subset = std::min(m, d + 1);
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (size > max_subset) continue;
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < m; ++k) {
      if (mask & (1u << k)) idx.push_back(k);
    }
    // Rows of A: d coordinates then the affine constraint sum(lambda) = 1.
    std::vector<std::vector<double>> a(d + 1, std::vector<double>(size));
    for (std::size_t s = 0; s < size; ++s) {
      for (std::size_t r = 0; r < d; ++r) a[r][s] = v[idx[s]][r];
      a[d][s] = 1.0;
    }
    std::vector<double> rhs(d + 1, 0.0);
    rhs[d] = 1.0;
    // Normal equations; singular systems are affinely dependent subsets and
    // are covered by one of their smaller subsets.
    std::vector<std::vector<double>> ata(size, std::vector<double>(size, 0.0));
    std::vector<double> atb(size, 0.0);
    for (std::size_t s = 0; s < size; ++s) {
      for (std::size_t t = 0; t < size; ++t) {
        for (std::size_t r = 0; r <= d; ++r) ata[s][t] += a[r][s] * a[r][t];
      }
      for (std::size_t r = 0; r <= d; ++r) atb[s] += a[r][s] * rhs[r];
    }
    std::vector<double> lambda;
    if (!solve(ata, atb, lambda)) continue;
    if (std::any_of(lambda.begin(), lambda.end(), [](double l) { return l < -1e-12; })) continue;
    double residual = 0.0;
    for (std::size_t r = 0; r <= d; ++r) {
      double s = -rhs[r];
      for (std::size_t t = 0; t < size; ++t) s += a[r][t] * lambda[t];
      residual += s * s;
    }
    if (std::sqrt(residual) < 1e-9) return true;
  }
  return false;
}

std::vector<double> random_unit(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  double nn = 0.0;
  while (nn < 1e-12) {
    for (double& x : v) x = normal(rng);
    nn = norm(v);
  }
  for (double& x : v) x /= nn;
  return v;
}

Matrix random_sphere_points(std::size_t count, std::size_t n, std::mt19937_64& rng) {
  Matrix m;
  for (std::size_t k = 0; k < count; ++k) m.append_row(random_unit(n, rng));
  return m;
}

struct DichotomySweep {
  std::size_t total = 0;
  std::size_t separable = 0;
  std::vector<int> first_failure;
};

DichotomySweep sweep_dichotomies(const Matrix& points) {
  const std::size_t m = points.rows();
  DichotomySweep sweep;
  std::vector<int> labels(m);
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    for (std::size_t k = 0; k < m; ++k) labels[k] = (mask & (1u << k)) ? 1 : -1;
    ++sweep.total;
    if (linearly_separable(points, labels)) {
      ++sweep.separable;
    } else if (sweep.first_failure.empty()) {
      sweep.first_failure = labels;
    }
  }
  return sweep;
}

}  // namespace

bool in_general_position(const Matrix& points) {
  const std::size_t m = points.rows();
  const std::size_t n = points.cols();
  require(m >= 1 && m <= n + 1, ErrorCode::InvalidArgument, "general-position test needs 1..n+1 points");
  // Rank of the m x (n+1) augmented matrix via Gaussian elimination.
  std::vector<std::vector<double>> a(m, std::vector<double>(n + 1, 1.0));
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) a[r][c] = points(r, c);
  }
  std::size_t rank = 0;
  for (std::size_t col = 0; col <= n && rank < m; ++col) {
    std::size_t piv = rank;
    for (std::size_t r = rank + 1; r < m; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) < 1e-8) continue;
    std::swap(a[piv], a[rank]);
    for (std::size_t r = rank + 1; r < m; ++r) {
      const double f = a[r][col] / a[rank][col];
      for (std::size_t c = col; c <= n; ++c) a[r][c] -= f * a[rank][c];
    }
    ++rank;
  }
  return rank == m;
}

bool linearly_separable(const Matrix& points, std::span<const int> labels) {
  const std::size_t m = points.rows();
  const std::size_t n = points.cols();
  require(labels.size() == m, ErrorCode::DimensionMismatch, "one label per point required");
  require(m >= 1 && m <= 20, ErrorCode::InvalidArgument, "exact separability check supports up to 20 points");

  std::vector<std::vector<double>> signed_pts(m, std::vector<double>(n + 1));
  for (std::size_t k = 0; k < m; ++k) {
    require(labels[k] == 1 || labels[k] == -1, ErrorCode::InvalidArgument, "labels must be -1 or +1");
    for (std::size_t c = 0; c < n; ++c) signed_pts[k][c] = labels[k] * points(k, c);
    signed_pts[k][n] = labels[k];
  }

  constexpr std::size_t kPerceptronEpochs = 10000;
  std::vector<double> w(n + 1, 0.0);
  for (std::size_t epoch = 0; epoch < kPerceptronEpochs; ++epoch) {
    bool mistake = false;
    for (const auto& v : signed_pts) {
      if (kernels::dot(w, v) <= 0.0) {
        kernels::axpy(1.0, v, w);
        mistake = true;
      }
    }
    if (!mistake) return true;
  }
  return !origin_in_hull(signed_pts);
}

ShatterReport shattering_check(std::size_t dimension, std::uint64_t seed, std::optional<Matrix> first_attempt) {
  require(dimension >= 1 && dimension <= 4, ErrorCode::InvalidArgument, "shattering check supports n in [1, 4]");
  std::mt19937_64 rng(seed);
  ShatterReport report;
  report.dimension = dimension;

  constexpr std::size_t kMaxAttempts = 10;
  Matrix points;
  bool placed = false;
  for (std::size_t attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
    if (attempt == 0 && first_attempt) {
      require(first_attempt->rows() == dimension + 1 && first_attempt->cols() == dimension,
              ErrorCode::DimensionMismatch, "first attempt must hold n+1 points in R^n");
      points = *first_attempt;
    } else {
      points = random_sphere_points(dimension + 1, dimension, rng);
    }
    report.attempts = attempt + 1;
    placed = in_general_position(points);
  }
  report.points = points;
  if (placed) {
    const DichotomySweep sweep = sweep_dichotomies(points);
    report.dichotomies = sweep.total;
    report.separable_dichotomies = sweep.separable;
    report.shattered_n_plus_1 = sweep.separable == sweep.total;
  }

  if (dimension == 2) {
    report.witness = Matrix{{1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}, {-1.0, 1.0}};
  } else {
    report.witness = random_sphere_points(dimension + 2, dimension, rng);
  }
  const DichotomySweep witness_sweep = sweep_dichotomies(report.witness);
  report.failing_dichotomy = witness_sweep.first_failure;
  report.witness_dichotomy_failure_n_plus_2 = !witness_sweep.first_failure.empty();
  return report;
}

}  // namespace featspace
