#pragma once

#include "pielm/feature_basis.hpp"
#include "pielm/linear_solver.hpp"

#include <memory>
#include <string>

namespace pielm {

/// A trained approximant u(x) = sum_i c_i phi_i(x).
class PielmSolution {
 public:
  PielmSolution(std::shared_ptr<const FeatureBank> bank, Vector coefficients,
                std::string params_digest, SolveReport report = {})
      : bank_(std::move(bank)),
        coefficients_(std::move(coefficients)),
        params_digest_(std::move(params_digest)),
        report_(std::move(report)) {
    require(bank_ != nullptr, "solution needs a feature bank");
    require<ShapeMismatch>(static_cast<std::size_t>(coefficients_.size()) == bank_->n_neurons(),
                           "coefficient count does not match neuron count");
  }

  const FeatureBank& bank() const { return *bank_; }
  std::shared_ptr<const FeatureBank> shared_bank() const { return bank_; }
  const Vector& coefficients() const { return coefficients_; }
  const std::string& params_digest() const { return params_digest_; }
  const SolveReport& report() const { return report_; }

  Vector evaluate(const Points& points) const { return bank_->features(points) * coefficients_; }

  double value_at(const Eigen::Ref<const Vector>& x) const {
    Points p(1, x.size());
    p.row(0) = x.transpose();
    return evaluate(p)[0];
  }

  double value_at(std::initializer_list<double> x) const {
    Vector v(static_cast<Eigen::Index>(x.size()));
    Eigen::Index j = 0;
    for (double c : x) v[j++] = c;
    return value_at(v);
  }

  Vector derivative(const Points& points, std::size_t axis) const {
    return bank_->derivative(points, axis) * coefficients_;
  }

 private:
  std::shared_ptr<const FeatureBank> bank_;
  Vector coefficients_;
  std::string params_digest_;
  SolveReport report_;
};

}  // namespace pielm
