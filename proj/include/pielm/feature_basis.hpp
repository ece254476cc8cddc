#pragma once

#include "pielm/core.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pielm {

class FeatureJet;

/// Fixed random tanh features phi_i(x) = tanh(w_i . z(x) + b_i), where z maps
/// the physical domain affinely onto [-1, 1]^d. Immutable once built.
///
/// Weights and biases are uniform on [-1, 1] times `weight_scale`. A non-empty
/// `axis_scales` replaces the scale of each weight column (biases keep
/// `weight_scale`), which lets steep directions get steeper features.
class FeatureBank {
 public:
  FeatureBank(std::uint64_t seed, std::size_t n_neurons, DomainBox domain,
              double weight_scale = 1.0, std::vector<double> axis_scales = {})
      : domain_(std::move(domain)), seed_(seed), weight_scale_(weight_scale) {
    require(n_neurons >= 1, "feature bank needs at least one neuron");
    require(weight_scale > 0.0, "weight scale must be positive");
    if (axis_scales.empty()) axis_scales.assign(domain_.dim(), weight_scale);
    require<ShapeMismatch>(axis_scales.size() == domain_.dim(),
                           "one axis scale per domain axis required");
    for (double a : axis_scales) require(a > 0.0, "axis scales must be positive");
    const auto n = static_cast<Eigen::Index>(n_neurons);
    const auto d = static_cast<Eigen::Index>(domain_.dim());
    weights_.resize(n, d);
    biases_.resize(n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        weights_(i, j) = axis_scales[static_cast<std::size_t>(j)] * uniform(rng);
    for (Eigen::Index i = 0; i < n; ++i) biases_[i] = weight_scale * uniform(rng);
    scales_.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) scales_[j] = 2.0 / domain_.width(j);
  }

  /// Bank with explicitly given hidden parameters (one weight row per neuron).
  FeatureBank(Matrix weights, Vector biases, DomainBox domain)
      : domain_(std::move(domain)), seed_(0), weight_scale_(1.0),
        weights_(std::move(weights)), biases_(std::move(biases)) {
    require(biases_.size() >= 1, "feature bank needs at least one neuron");
    require<ShapeMismatch>(weights_.rows() == biases_.size(), "one bias per weight row required");
    require<ShapeMismatch>(static_cast<std::size_t>(weights_.cols()) == domain_.dim(),
                           "weight columns must match the domain dimension");
    scales_.resize(weights_.cols());
    for (Eigen::Index j = 0; j < weights_.cols(); ++j)
      scales_[j] = 2.0 / domain_.width(static_cast<std::size_t>(j));
  }

  std::size_t n_neurons() const { return static_cast<std::size_t>(biases_.size()); }
  std::size_t dim() const { return domain_.dim(); }
  const DomainBox& domain() const { return domain_; }
  std::uint64_t seed() const { return seed_; }
  double weight_scale() const { return weight_scale_; }
  const Matrix& weights() const { return weights_; }
  const Vector& biases() const { return biases_; }

  /// d z_j / d x_j, the chain-rule factor from physical to normalized coordinates.
  double axis_scale(std::size_t axis) const { return scales_[static_cast<Eigen::Index>(axis)]; }

  Vector normalize_point(const Eigen::Ref<const Vector>& x) const {
    require<ShapeMismatch>(static_cast<std::size_t>(x.size()) == dim(),
                           "point dimension does not match feature bank");
    Vector z(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j)
      z[j] = scales_[j] * (x[j] - domain_.lower(static_cast<std::size_t>(j))) - 1.0;
    return z;
  }

  Points normalize(const Points& points) const {
    check_points(points);
    Points z(points.rows(), points.cols());
    for (Eigen::Index j = 0; j < points.cols(); ++j)
      z.col(j) = (scales_[j] * (points.col(j).array() -
                                domain_.lower(static_cast<std::size_t>(j))) - 1.0).matrix();
    return z;
  }

  FeatureJet at(const Points& points) const;

  Matrix features(const Points& points) const;
  Matrix derivative(const Points& points, std::size_t axis) const;
  Matrix second_derivative(const Points& points, std::size_t axis_j, std::size_t axis_k) const;

  void check_axis(std::size_t axis) const {
    require(axis < dim(), "axis " + std::to_string(axis) + " out of range for a " +
                              std::to_string(dim()) + "-dimensional bank");
  }

 private:
  void check_points(const Points& points) const {
    require<ShapeMismatch>(static_cast<std::size_t>(points.cols()) == dim(),
                           "points have " + std::to_string(points.cols()) +
                               " coordinates, feature bank expects " + std::to_string(dim()));
  }

  DomainBox domain_;
  std::uint64_t seed_;
  double weight_scale_;
  Matrix weights_;
  Vector biases_;
  Vector scales_;
};

/// Feature values at a fixed point set, with closed-form physical-coordinate
/// derivatives. Rows are points, columns are neurons.
class FeatureJet {
 public:
  FeatureJet(const FeatureBank& bank, const Points& points) : bank_(&bank) {
    const Points z = bank.normalize(points);
    Matrix pre = z * bank.weights().transpose();
    pre.rowwise() += bank.biases().transpose();
    phi_ = pre.array().tanh().matrix();
    sech2_ = (1.0 - phi_.array().square()).matrix();
  }

  Eigen::Index rows() const { return phi_.rows(); }
  const Matrix& value() const { return phi_; }

  Matrix first(std::size_t axis) const {
    bank_->check_axis(axis);
    const Vector factor = bank_->axis_scale(axis) *
                          bank_->weights().col(static_cast<Eigen::Index>(axis));
    return sech2_ * factor.asDiagonal();
  }

  Matrix second(std::size_t axis_j, std::size_t axis_k) const {
    bank_->check_axis(axis_j);
    bank_->check_axis(axis_k);
    // Same expression for (j, k) and (k, j): the product is formed in a fixed order.
    const auto lo = std::min(axis_j, axis_k);
    const auto hi = std::max(axis_j, axis_k);
    const Vector factor =
        (bank_->axis_scale(lo) * bank_->axis_scale(hi)) *
        bank_->weights().col(static_cast<Eigen::Index>(lo))
            .cwiseProduct(bank_->weights().col(static_cast<Eigen::Index>(hi)));
    const Matrix curvature = (-2.0 * phi_.array() * sech2_.array()).matrix();
    return curvature * factor.asDiagonal();
  }

 private:
  const FeatureBank* bank_;
  Matrix phi_;
  Matrix sech2_;
};

inline FeatureJet FeatureBank::at(const Points& points) const {
  check_points(points);
  return FeatureJet(*this, points);
}

inline Matrix FeatureBank::features(const Points& points) const { return at(points).value(); }

inline Matrix FeatureBank::derivative(const Points& points, std::size_t axis) const {
  check_axis(axis);
  return at(points).first(axis);
}

inline Matrix FeatureBank::second_derivative(const Points& points, std::size_t axis_j,
                                             std::size_t axis_k) const {
  check_axis(axis_j);
  check_axis(axis_k);
  return at(points).second(axis_j, axis_k);
}

}  // namespace pielm
