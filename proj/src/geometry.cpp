#include "featspace/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "featspace/kernels.hpp"

namespace featspace {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

FeatureVector::FeatureVector(std::vector<double> coords, bool expanded)
    : coords_(std::move(coords)), expanded_(expanded) {
  require(coords_.size() >= 2, ErrorCode::InvalidArgument, "feature vector needs at least 2 coordinates");
  require(all_finite(coords_), ErrorCode::InvalidArgument, "feature vector has non-finite entries");
  require(!expanded_ || coords_.back() == 1.0, ErrorCode::InvalidArgument,
          "expanded feature vector must end with the constant 1");
}

FeatureVector FeatureVector::expand(std::span<const double> coords) {
  std::vector<double> out(coords.begin(), coords.end());
  out.push_back(1.0);
  return FeatureVector(std::move(out), true);
}

double FeatureVector::norm() const noexcept { return featspace::norm(coords_); }

ClassifierHead::ClassifierHead(Matrix weights, std::optional<std::vector<double>> bias,
                               std::vector<std::string> class_names)
    : weights_(std::move(weights)), bias_(std::move(bias)), names_(std::move(class_names)) {
  const std::size_t n_classes = weights_.rows();
  require(n_classes >= 2, ErrorCode::InvalidArgument, "classifier head needs at least 2 classes");
  require(weights_.cols() >= 1, ErrorCode::InvalidArgument, "classifier head has zero width");
  require(all_finite(weights_.data()), ErrorCode::InvalidArgument, "classifier head has non-finite weights");
  if (bias_) {
    require(bias_->size() == n_classes, ErrorCode::DimensionMismatch, "bias length differs from class count");
    require(all_finite(*bias_), ErrorCode::InvalidArgument, "classifier head has non-finite bias");
  }
  if (names_.empty()) {
    for (std::size_t i = 0; i < n_classes; ++i) names_.push_back("class" + std::to_string(i));
  }
  require(names_.size() == n_classes, ErrorCode::DimensionMismatch, "class name count differs from class count");

  if (bias_) {
    expanded_ = Matrix(n_classes, weights_.cols() + 1);
    for (std::size_t i = 0; i < n_classes; ++i) {
      std::copy(weights_.row(i).begin(), weights_.row(i).end(), expanded_.row(i).begin());
      expanded_(i, weights_.cols()) = (*bias_)[i];
    }
  } else {
    expanded_ = weights_;
  }

  for (std::size_t i = 0; i < n_classes; ++i) {
    for (std::size_t j = i + 1; j < n_classes; ++j) {
      const auto a = expanded_.row(i);
      const auto b = expanded_.row(j);
      require(!std::equal(a.begin(), a.end(), b.begin()), ErrorCode::DegenerateHead,
              "classes " + std::to_string(i) + " and " + std::to_string(j) + " have identical weights");
    }
  }
}

std::vector<double> ClassifierHead::logits(std::span<const double> a) const {
  std::vector<double> z(num_classes());
  if (a.size() == dim()) {
    kernels::active().gemv(weights_.data().data(), num_classes(), dim(), a.data(), z.data());
    if (bias_) {
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += (*bias_)[i];
    }
  } else if (a.size() == dim() + 1) {
    require(a.back() == 1.0, ErrorCode::InvalidArgument, "expanded feature vector must end with 1");
    if (bias_) {
      kernels::active().gemv(expanded_.data().data(), num_classes(), dim() + 1, a.data(), z.data());
    } else {
      kernels::active().gemv(weights_.data().data(), num_classes(), dim(), a.data(), z.data());
    }
  } else {
    throw Error(ErrorCode::DimensionMismatch, "feature length " + std::to_string(a.size()) +
                                                  " does not match head width " + std::to_string(dim()));
  }
  return z;
}

ClassifierHead ClassifierHead::without_bias() const { return ClassifierHead(weights_, std::nullopt, names_); }

double norm(std::span<const double> v) noexcept { return std::sqrt(kernels::sum_squares(v)); }

std::vector<double> normalized(std::span<const double> v) {
  const double n = norm(v);
  require(n > 0.0, ErrorCode::ZeroVector, "cannot normalize a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

double angle_between(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorCode::DimensionMismatch, "angle between vectors of different length");
  const double nu = norm(u);
  const double nv = norm(v);
  require(nu > 0.0 && nv > 0.0, ErrorCode::ZeroVector, "angle with a zero vector");
  const double c = kernels::dot(u, v) / (nu * nv);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

PlaneOfVariations build_plane(std::span<const double> feature, std::span<const double> weight) {
  require(feature.size() == weight.size(), ErrorCode::DimensionMismatch,
          "feature and weight lengths differ");
  const double radius = norm(feature);
  const double wnorm = norm(weight);
  require(radius > 0.0, ErrorCode::ZeroVector, "feature vector is zero");
  require(wnorm > 0.0, ErrorCode::ZeroVector, "weight vector is zero");

  PlaneOfVariations plane;
  plane.radius = radius;
  plane.e1.assign(weight.begin(), weight.end());
  for (double& x : plane.e1) x /= wnorm;

  const double along = kernels::dot(feature, plane.e1);
  if (std::abs(along / radius) >= kCollinearCosine) {
    throw Error(ErrorCode::CollinearPlaneUndefined, "feature vector is collinear with the weight");
  }

  // Two Gram-Schmidt passes keep e1 . e2 at rounding level even when the
  // feature is nearly collinear with the weight.
  plane.e2.assign(feature.begin(), feature.end());
  kernels::axpy(-along, plane.e1, plane.e2);
  kernels::axpy(-kernels::dot(plane.e2, plane.e1), plane.e1, plane.e2);
  const double perp = norm(plane.e2);
  for (double& x : plane.e2) x /= perp;

  plane.theta = std::atan2(kernels::dot(feature, plane.e2), kernels::dot(feature, plane.e1));
  return plane;
}

ProjectedWeight project_weight(std::span<const double> weight, const PlaneOfVariations& plane,
                               std::size_t class_index) {
  require(weight.size() == plane.e1.size(), ErrorCode::DimensionMismatch, "weight length differs from plane");
  const double c1 = kernels::dot(weight, plane.e1);
  const double c2 = kernels::dot(weight, plane.e2);
  ProjectedWeight p;
  p.class_index = class_index;
  p.norm_parallel = std::hypot(c1, c2);
  if (p.norm_parallel > 0.0) {
    p.phase = std::atan2(c2, c1);
    if (p.phase <= -std::numbers::pi) p.phase = std::numbers::pi;
  }
  return p;
}

std::vector<double> rotate_in_plane(std::span<const double> feature, const PlaneOfVariations& plane,
                                    double angle) {
  require(feature.size() == plane.e1.size(), ErrorCode::DimensionMismatch, "feature length differs from plane");
  const double c1 = kernels::dot(feature, plane.e1);
  const double c2 = kernels::dot(feature, plane.e2);

  std::vector<double> out(feature.begin(), feature.end());
  kernels::axpy(-c1, plane.e1, out);
  kernels::axpy(-c2, plane.e2, out);
  const double fnorm = norm(feature);
  if (norm(out) > kPlaneTolerance * fnorm) {
    throw Error(ErrorCode::PlaneMismatch, "feature vector has a component outside the plane");
  }

  const double c = std::cos(angle);
  const double s = std::sin(angle);
  kernels::axpy(c1 * c - c2 * s, plane.e1, out);
  kernels::axpy(c1 * s + c2 * c, plane.e2, out);
  return out;
}

}  // namespace featspace
