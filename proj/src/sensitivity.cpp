#include "featspace/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "featspace/kernels.hpp"

namespace featspace {

namespace {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

ClassifierHead prepare_head(const ClassifierHead& head, const SensitivityOptions& options,
                            std::vector<std::string>& warnings) {
  if (!head.has_bias()) return head;
  require(options.fold_out_bias, ErrorCode::InvalidArgument,
          "sensitivity analysis needs a bias-free head; pass fold_out_bias to drop the bias");
  warnings.emplace_back("bias dropped from classifier head");
  return head.without_bias();
}

std::size_t argmax(std::span<const double> z) {
  return static_cast<std::size_t>(std::distance(z.begin(), std::max_element(z.begin(), z.end())));
}

// dS_j = S_j * (dz_j - sum_k S_k dz_k)
std::vector<double> softmax_jvp(std::span<const double> s, std::span<const double> dz) {
  double mean = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) mean += s[k] * dz[k];
  std::vector<double> out(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) out[j] = s[j] * (dz[j] - mean);
  return out;
}

MomentSummary moments(std::span<const double> values) {
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  const double mean = sum.value() / static_cast<double>(values.size());
  CompensatedSum ss;
  for (double v : values) ss.add((v - mean) * (v - mean));
  return {mean, std::sqrt(ss.value() / static_cast<double>(values.size()))};
}

}  // namespace

std::vector<double> softmax(std::span<const double> z) {
  require(!z.empty(), ErrorCode::InvalidArgument, "softmax of an empty vector");
  require(std::all_of(z.begin(), z.end(), [](double x) { return std::isfinite(x); }), ErrorCode::InvalidArgument,
          "softmax input has non-finite entries");
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - zmax);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

SensitivityResult sensitivity(std::span<const double> feature, const ClassifierHead& input_head,
                              SensitivityOptions options) {
  SensitivityResult result;
  const ClassifierHead head = prepare_head(input_head, options, result.warnings);
  require(feature.size() == head.dim(), ErrorCode::DimensionMismatch, "feature length differs from head width");

  const std::vector<double> z = head.logits(feature);
  result.S = softmax(z);
  result.prevailing = options.reference_class.value_or(argmax(z));
  require(result.prevailing < head.num_classes(), ErrorCode::InvalidArgument, "reference class out of range");
  result.radius = norm(feature);
  require(result.radius > 0.0, ErrorCode::ZeroVector, "feature vector is zero");

  const std::size_t n_classes = head.num_classes();
  std::vector<double> dz_dr(n_classes);
  std::vector<double> dz_dtheta(n_classes, 0.0);
  try {
    const PlaneOfVariations plane = build_plane(feature, head.weight(result.prevailing));
    result.theta = plane.theta;
    for (std::size_t j = 0; j < n_classes; ++j) {
      ProjectedWeight p = project_weight(head.weight(j), plane, j);
      if (j == result.prevailing) {
        p.norm_parallel = norm(head.weight(j));
        p.phase = 0.0;
      }
      dz_dr[j] = p.norm_parallel * std::cos(plane.theta - p.phase);
      dz_dtheta[j] = -plane.radius * p.norm_parallel * std::sin(plane.theta - p.phase);
      result.projections.push_back(p);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CollinearPlaneUndefined) throw;
    // No plane: z is still linear in R along the feature direction.
    result.theta_degenerate = true;
    result.theta = kernels::dot(feature, head.weight(result.prevailing)) > 0.0 ? 0.0 : std::numbers::pi;
    for (std::size_t j = 0; j < n_classes; ++j) dz_dr[j] = z[j] / result.radius;
  }

  result.dS_dR = softmax_jvp(result.S, dz_dr);
  result.dS_dtheta = result.theta_degenerate ? std::vector<double>(n_classes, 0.0)
                                              : softmax_jvp(result.S, dz_dtheta);
  return result;
}

ResponseSurface response_surface(std::span<const double> feature, const ClassifierHead& input_head,
                                 const SurfaceGrid& grid, SensitivityOptions options) {
  std::vector<std::string> warnings;
  const ClassifierHead head = prepare_head(input_head, options, warnings);
  require(feature.size() == head.dim(), ErrorCode::DimensionMismatch, "feature length differs from head width");
  require(grid.theta_steps >= 1 && grid.radius_steps >= 1, ErrorCode::InvalidArgument, "empty surface grid");
  require(grid.radius_min > 0.0 && grid.radius_max >= grid.radius_min, ErrorCode::InvalidArgument,
          "radius range must be positive and ordered");
  require(grid.theta_max >= grid.theta_min, ErrorCode::InvalidArgument, "theta range must be ordered");

  const std::vector<double> z0 = head.logits(feature);
  ResponseSurface surf;
  surf.num_classes = head.num_classes();
  surf.prevailing = options.reference_class.value_or(argmax(z0));
  const PlaneOfVariations plane = build_plane(feature, head.weight(surf.prevailing));
  for (std::size_t j = 0; j < surf.num_classes; ++j) {
    ProjectedWeight p = project_weight(head.weight(j), plane, j);
    if (j == surf.prevailing) {
      p.norm_parallel = norm(head.weight(j));
      p.phase = 0.0;
    }
    surf.projections.push_back(p);
  }

  auto linspace = [](double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return v;
  };
  surf.theta_grid = linspace(grid.theta_min, grid.theta_max, grid.theta_steps);
  surf.radius_grid = linspace(grid.radius_min, grid.radius_max, grid.radius_steps);

  const std::size_t nt = surf.theta_grid.size();
  const std::size_t nr = surf.radius_grid.size();
  surf.z_values.resize(surf.num_classes * nt * nr);
  surf.s_values.resize(surf.z_values.size());
  std::vector<double> node(surf.num_classes);
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t r = 0; r < nr; ++r) {
      for (std::size_t j = 0; j < surf.num_classes; ++j) {
        const auto& p = surf.projections[j];
        node[j] = surf.radius_grid[r] * p.norm_parallel * std::cos(surf.theta_grid[t] - p.phase);
      }
      const std::vector<double> s = softmax(node);
      for (std::size_t j = 0; j < surf.num_classes; ++j) {
        surf.z_values[(j * nt + t) * nr + r] = node[j];
        surf.s_values[(j * nt + t) * nr + r] = s[j];
      }
    }
  }
  return surf;
}

GradientMagnitudeSummary gradient_magnitude_summary(std::span<const std::vector<double>> features,
                                                    const ClassifierHead& head, SensitivityOptions options) {
  require(!features.empty(), ErrorCode::EmptyBatch, "gradient summary of an empty batch");
  GradientMagnitudeSummary summary;
  std::vector<double> abs_r;
  std::vector<double> abs_t;
  for (const auto& f : features) {
    if (norm(f) == 0.0) {
      ++summary.skipped_zero;
      continue;
    }
    const SensitivityResult r = sensitivity(f, head, options);
    if (r.theta_degenerate) {
      ++summary.skipped_collinear;
      continue;
    }
    ++summary.used;
    for (double v : r.dS_dR) abs_r.push_back(std::abs(v));
    for (double v : r.dS_dtheta) abs_t.push_back(std::abs(v));
  }
  require(summary.used > 0, ErrorCode::EmptyBatch, "every feature in the batch was collinear with its weight");
  summary.abs_dS_dR = moments(abs_r);
  summary.abs_dS_dtheta = moments(abs_t);
  return summary;
}

}  // namespace featspace
