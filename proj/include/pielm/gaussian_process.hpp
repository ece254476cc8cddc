#pragma once

#include "pielm/black_scholes.hpp"  // normal_cdf, normal_pdf
#include "pielm/core.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace pielm {

struct GpHyperparameters {
  Vector lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-6;
};

struct GpFitOptions {
  std::vector<double> lengthscale_grid{0.05, 0.1, 0.2, 0.5};
  std::vector<double> signal_variance_grid{0.5, 1.0, 2.0};
  double noise_variance = 1e-6;
  double max_jitter = 1e-4;
};

struct GpPrediction {
  double mean = 0.0;
  double std = 0.0;
};

/// Where the GP prior mean sits: the sample mean of the targets, or the worst
/// (largest) target, which makes unexplored regions look unpromising.
enum class PriorMean { sample_mean, worst_observed };

/// GP with a squared-exponential kernel on targets shifted by the prior mean
/// and divided by their standard deviation. Inputs are expected in the unit box.
class GpSurrogate {
 public:
  GpSurrogate(Points train_x, Vector train_y, PriorMean prior = PriorMean::sample_mean)
      : train_x_(std::move(train_x)), train_y_(std::move(train_y)) {
    require<ShapeMismatch>(train_x_.rows() == train_y_.size(), "GP inputs and targets differ in length");
    require(train_x_.rows() >= 2, "GP needs at least two training points");
    require(train_y_.allFinite(), "GP targets must be finite");
    const double sample_mean = train_y_.mean();
    const double var = (train_y_.array() - sample_mean).square().sum() / static_cast<double>(train_y_.size());
    y_mean_ = prior == PriorMean::sample_mean ? sample_mean : train_y_.maxCoeff();
    y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
    y_std_ = ((train_y_.array() - y_mean_) / y_scale_).matrix();
  }

  const Points& train_x() const { return train_x_; }
  const Vector& train_y() const { return train_y_; }
  bool fitted() const { return fitted_; }
  const GpHyperparameters& hyperparameters() const { return hyper_; }
  double jitter() const { return jitter_; }
  double log_marginal_likelihood() const { return log_ml_; }
  double target_scale() const { return y_scale_; }

  double kernel(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                const GpHyperparameters& h) const {
    const double d2 = ((a - b).array() / h.lengthscales.array()).square().sum();
    return h.signal_variance * std::exp(-0.5 * d2);
  }

  Matrix kernel_matrix(const GpHyperparameters& h) const {
    const Eigen::Index n = train_x_.rows();
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        k(i, j) = k(j, i) = kernel(train_x_.row(i).transpose(), train_x_.row(j).transpose(), h);
    return k;
  }

  /// Fixes the hyperparameters and factorizes K + (noise + jitter) I, escalating
  /// the jitter until the Cholesky factorization succeeds.
  bool factorize(const GpHyperparameters& h, double max_jitter) {
    const Matrix k = kernel_matrix(h);
    const Eigen::Index n = k.rows();
    for (double jitter = 0.0; jitter <= max_jitter;
         jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0) {
      Matrix kn = k;
      kn.diagonal().array() += h.noise_variance + jitter;
      Eigen::LLT<Matrix> llt(kn);
      if (llt.info() != Eigen::Success) continue;
      const Matrix l = llt.matrixL();
      // Exact duplicates can leave a rounding-level pivot that is still positive.
      const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() *
                           kn.diagonal().maxCoeff();
      if ((l.diagonal().array().square() <= floor).any()) continue;
      hyper_ = h;
      jitter_ = jitter;
      chol_ = std::move(llt);
      alpha_ = chol_.solve(y_std_);
      log_ml_ = -0.5 * y_std_.dot(alpha_) - l.diagonal().array().log().sum() -
                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
      fitted_ = true;
      return true;
    }
    return false;
  }

  GpPrediction predict(const Eigen::Ref<const Vector>& x) const {
    require<SolverError>(fitted_, "GP surrogate is not fitted");
    const Eigen::Index n = train_x_.rows();
    Vector ks(n);
    for (Eigen::Index i = 0; i < n; ++i) ks[i] = kernel(x, train_x_.row(i).transpose(), hyper_);
    const double mean = ks.dot(alpha_);
    const Vector v = chol_.matrixL().solve(ks);
    const double var = std::max(hyper_.signal_variance - v.squaredNorm(), 0.0);
    return {mean * y_scale_ + y_mean_, std::sqrt(var) * y_scale_};
  }

  /// Posterior in standardized target units (before undoing the scaling).
  GpPrediction predict_standardized(const Eigen::Ref<const Vector>& x) const {
    const GpPrediction p = predict(x);
    return {(p.mean - y_mean_) / y_scale_, p.std / y_scale_};
  }

 private:
  Points train_x_;
  Vector train_y_;
  Vector y_std_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;

  bool fitted_ = false;
  GpHyperparameters hyper_;
  double jitter_ = 0.0;
  double log_ml_ = -std::numeric_limits<double>::infinity();
  Eigen::LLT<Matrix> chol_;
  Vector alpha_;
};

/// Chooses hyperparameters by maximizing the log marginal likelihood over the
/// option grids (every per-axis lengthscale combination x signal variance).
inline GpSurrogate gp_fit(GpSurrogate surrogate, const GpFitOptions& opts = {}) {
  const auto d = static_cast<std::size_t>(surrogate.train_x().cols());
  const std::size_t n_ls = opts.lengthscale_grid.size();
  require(n_ls > 0 && !opts.signal_variance_grid.empty(), "GP hyperparameter grids must be non-empty");
  std::size_t combos = 1;
  for (std::size_t j = 0; j < d; ++j) combos *= n_ls;

  GpHyperparameters best;
  double best_ml = -std::numeric_limits<double>::infinity();
  bool any = false;
  GpSurrogate trial = surrogate;
  for (std::size_t c = 0; c < combos; ++c) {
    GpHyperparameters h;
    h.lengthscales.resize(static_cast<Eigen::Index>(d));
    std::size_t rem = c;
    for (std::size_t j = 0; j < d; ++j) {
      h.lengthscales[static_cast<Eigen::Index>(j)] = opts.lengthscale_grid[rem % n_ls];
      rem /= n_ls;
    }
    h.noise_variance = opts.noise_variance;
    for (double s2 : opts.signal_variance_grid) {
      h.signal_variance = s2;
      if (!trial.factorize(h, opts.max_jitter)) continue;
      if (trial.log_marginal_likelihood() > best_ml) {
        best_ml = trial.log_marginal_likelihood();
        best = h;
        any = true;
      }
    }
  }
  require<SolverError>(any, "GP kernel matrix is not positive definite even with maximal jitter");
  surrogate.factorize(best, opts.max_jitter);
  return surrogate;
}

/// Expected improvement below `best_y` for a Gaussian posterior (mean, std).
inline double expected_improvement(double mean, double std, double best_y) {
  const double gain = best_y - mean;
  if (!(std > 0.0)) return std::max(gain, 0.0);
  const double z = gain / std;
  return std::max(gain * normal_cdf(z) + std * normal_pdf(z), 0.0);
}

inline double expected_improvement(const GpSurrogate& surrogate, const Eigen::Ref<const Vector>& theta,
                                   double best_y) {
  const GpPrediction p = surrogate.predict(theta);
  return expected_improvement(p.mean, p.std, best_y);
}

}  // namespace pielm
