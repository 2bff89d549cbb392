#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "featspace/matrix.hpp"

namespace featspace {

/// A point of the feature space: the activation vector fed to the output
/// layer. When `expanded` is set the trailing coordinate is the constant 1
/// that absorbs the bias term.
class FeatureVector {
 public:
  explicit FeatureVector(std::vector<double> coords, bool expanded = false);

  /// Appends the constant-1 coordinate.
  static FeatureVector expand(std::span<const double> coords);

  std::span<const double> coords() const noexcept { return coords_; }
  std::size_t size() const noexcept { return coords_.size(); }
  bool expanded() const noexcept { return expanded_; }
  double norm() const noexcept;

  /// Coordinates without the trailing constant, if any.
  std::span<const double> activations() const noexcept {
    return {coords_.data(), expanded_ ? coords_.size() - 1 : coords_.size()};
  }

  operator std::span<const double>() const noexcept { return coords_; }

 private:
  std::vector<double> coords_;
  bool expanded_;
};

/// Output layer: row i of `weights` is the weight vector of class i.
class ClassifierHead {
 public:
  ClassifierHead(Matrix weights, std::optional<std::vector<double>> bias = std::nullopt,
                 std::vector<std::string> class_names = {});

  std::size_t num_classes() const noexcept { return weights_.rows(); }
  std::size_t dim() const noexcept { return weights_.cols(); }
  bool has_bias() const noexcept { return bias_.has_value(); }

  const Matrix& weights() const noexcept { return weights_; }
  std::span<const double> weight(std::size_t i) const noexcept { return weights_.row(i); }
  const std::optional<std::vector<double>>& bias() const noexcept { return bias_; }
  const std::vector<std::string>& class_names() const noexcept { return names_; }

  /// Rows [w_i, b_i]; equal to weights() when there is no bias.
  const Matrix& expanded_weights() const noexcept { return expanded_; }

  /// z = W a + b. Accepts either a raw activation vector (length dim()) or an
  /// expanded one (length dim() + 1, trailing 1).
  std::vector<double> logits(std::span<const double> a) const;

  ClassifierHead without_bias() const;

  friend bool operator==(const ClassifierHead&, const ClassifierHead&) = default;

 private:
  Matrix weights_;
  std::optional<std::vector<double>> bias_;
  std::vector<std::string> names_;
  Matrix expanded_;
};

/// Orthonormal frame of the plane spanned by a feature vector and one class
/// weight. e1 points along the weight; e2 is oriented so the feature vector
/// has a non-negative e2 component, which puts theta in [0, pi].
struct PlaneOfVariations {
  std::vector<double> e1;
  std::vector<double> e2;
  double theta = 0.0;
  double radius = 0.0;
};

struct ProjectedWeight {
  double norm_parallel = 0.0;
  double phase = 0.0;  // (-pi, pi]
  std::size_t class_index = 0;
};

inline constexpr double kCollinearCosine = 1.0 - 1e-10;
inline constexpr double kPlaneTolerance = 1e-9;

double norm(std::span<const double> v) noexcept;
std::vector<double> normalized(std::span<const double> v);

/// Angle in radians between two nonzero vectors, in [0, pi].
double angle_between(std::span<const double> u, std::span<const double> v);

/// Throws ZeroVector or CollinearPlaneUndefined.
PlaneOfVariations build_plane(std::span<const double> feature, std::span<const double> weight);

ProjectedWeight project_weight(std::span<const double> weight, const PlaneOfVariations& plane,
                               std::size_t class_index = 0);

/// Rotates `feature` by `angle` inside the plane (towards e2 for positive
/// angles). Components outside the plane are carried through unchanged, but a
/// component larger than 1e-9 * |feature| is rejected with PlaneMismatch.
std::vector<double> rotate_in_plane(std::span<const double> feature, const PlaneOfVariations& plane,
                                    double angle);

}  // namespace featspace
