#pragma once

// Sensitivity of the softmax outputs to the norm R and the orientation
// theta_i of a feature vector, measured inside the plane spanned by the
// feature and the weight of its prevailing class i. Every logit is
//
//   z_j = R * |w_j,par| * cos(theta_i - phi_j),
//
// so dz_j/dR = |w_j,par| cos(theta_i - phi_j) and
// dz_j/dtheta_i = -R |w_j,par| sin(theta_i - phi_j).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "featspace/geometry.hpp"

namespace featspace {

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> z);

struct SensitivityOptions {
  /// Heads with a bias are rejected unless this is set, in which case the
  /// bias is dropped and a warning is recorded.
  bool fold_out_bias = false;
  /// Analyse the plane of this class instead of the prevailing one.
  std::optional<std::size_t> reference_class;
};

struct SensitivityResult {
  std::vector<double> S;
  std::vector<double> dS_dR;
  std::vector<double> dS_dtheta;  // zeros when theta_degenerate
  std::size_t prevailing = 0;
  bool theta_degenerate = false;  // feature collinear with w_prevailing
  double radius = 0.0;
  double theta = 0.0;
  std::vector<ProjectedWeight> projections;  // empty when theta_degenerate
  std::vector<std::string> warnings;
};

SensitivityResult sensitivity(std::span<const double> feature, const ClassifierHead& head,
                              SensitivityOptions options = {});

struct ResponseSurface {
  std::vector<double> theta_grid;  // angle from e1 inside the plane, radians
  std::vector<double> radius_grid;
  std::size_t num_classes = 0;
  std::size_t prevailing = 0;
  std::vector<ProjectedWeight> projections;
  // Flattened [class][theta][radius].
  std::vector<double> z_values;
  std::vector<double> s_values;

  double z(std::size_t cls, std::size_t t, std::size_t r) const noexcept {
    return z_values[(cls * theta_grid.size() + t) * radius_grid.size() + r];
  }
  double s(std::size_t cls, std::size_t t, std::size_t r) const noexcept {
    return s_values[(cls * theta_grid.size() + t) * radius_grid.size() + r];
  }
};

struct SurfaceGrid {
  double theta_min = 0.0;
  double theta_max = 0.0;
  std::size_t theta_steps = 1;
  double radius_min = 1.0;
  double radius_max = 1.0;
  std::size_t radius_steps = 1;
};

/// Logits and softmax over a theta x R grid inside the plane of `feature`
/// and its prevailing weight. Throws CollinearPlaneUndefined when that plane
/// does not exist.
ResponseSurface response_surface(std::span<const double> feature, const ClassifierHead& head,
                                 const SurfaceGrid& grid, SensitivityOptions options = {});

struct MomentSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct GradientMagnitudeSummary {
  MomentSummary abs_dS_dR;
  MomentSummary abs_dS_dtheta;
  std::size_t used = 0;
  std::size_t skipped_collinear = 0;
  std::size_t skipped_zero = 0;
};

/// Aggregates |dS_j/dR| and |dS_j/dtheta_i| over all classes j and all
/// features. Zero and collinear features are skipped and counted. Throws EmptyBatch if
/// nothing remains.
GradientMagnitudeSummary gradient_magnitude_summary(std::span<const std::vector<double>> features,
                                                    const ClassifierHead& head, SensitivityOptions options = {});

}  // namespace featspace
