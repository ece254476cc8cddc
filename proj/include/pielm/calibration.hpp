#pragma once

#include "pielm/black_scholes.hpp"
#include "pielm/gaussian_process.hpp"
#include "pielm/metrics.hpp"
#include "pielm/sampling.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

namespace pielm {

struct Observation {
  double s = 0.0;
  double t = 0.0;
  double price = 0.0;
};

/// Closed-form prices at `points` (S, t) plus N(0, noise_std^2) noise,
/// clamped at zero.
inline std::vector<Observation> synth_observations(const BsParams& truth,
                                                   const std::vector<std::pair<double, double>>& points,
                                                   double noise_std, std::uint64_t seed) {
  require(noise_std >= 0.0, "noise standard deviation must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Observation> obs;
  obs.reserve(points.size());
  for (const auto& [s, t] : points) {
    double price = bs_closed_form(truth, s, t);
    if (noise_std > 0.0) price = std::max(price + noise_std * noise(rng), 0.0);
    obs.push_back({s, t, price});
  }
  return obs;
}

/// n_s x n_t grid of (S, t) observation sites, endpoints included.
inline std::vector<std::pair<double, double>> observation_sites(std::array<double, 2> s_range,
                                                                std::array<double, 2> t_range,
                                                                std::size_t n_s = 5,
                                                                std::size_t n_t = 5) {
  require(n_s >= 2 && n_t >= 2, "observation grid needs at least 2 points per axis");
  const Vector s = detail::linspace(s_range[0], s_range[1], n_s);
  const Vector t = detail::linspace(t_range[0], t_range[1], n_t);
  std::vector<std::pair<double, double>> sites;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    for (Eigen::Index j = 0; j < t.size(); ++j) sites.emplace_back(s[i], t[j]);
  return sites;
}

struct CalibConfig {
  std::array<double, 2> sigma_bounds{0.0, 1.0};
  std::array<double, 2> r_bounds{0.0, 0.1};
  std::size_t n_init = 10;
  std::size_t n_iter = 90;
  std::uint64_t seed = 7;
  std::size_t n_candidates = 2048;
  std::size_t n_local = 256;
  // Short lengthscales resolve the narrow valley of the log objective.
  GpFitOptions surrogate{{0.01, 0.02, 0.05, 0.1, 0.2, 0.5}};
  // Contract (K, T, s_max); its sigma and r are ignored.
  BsParams contract;
  // Cheaper than the standalone default: the objective only reads 25 points
  // and this model's error sits well below the observation noise.
  BsForwardConfig forward{1000, 4.0, {61, 61}, 100, BlockWeights{1.0, 10.0, 10.0}, SolverConfig{}};
  std::uint64_t forward_seed = 1;

  void validate() const {
    require(sigma_bounds[1] > sigma_bounds[0] && sigma_bounds[0] >= 0.0, "sigma bounds must be ordered and non-negative");
    require(r_bounds[1] > r_bounds[0], "rate bounds must be ordered");
    require(n_init >= 2, "need at least two initial design points");
    require(n_candidates >= 1, "need at least one acquisition candidate");
    contract.validate();
  }
};

/// Mean-squared misfit between the PIELM price field for (sigma, r) and the
/// observations. One feature bank and one set of cached feature matrices serve
/// every parameter value.
class BsObjective {
 public:
  BsObjective(std::vector<Observation> observations, const BsParams& contract,
              const BsForwardConfig& forward, std::uint64_t forward_seed)
      : observations_(std::move(observations)), forward_(forward) {
    require(!observations_.empty(), "calibration needs at least one observation");
    contract.validate();
    bank_ = make_bs_bank(contract, forward, forward_seed);
    assembler_.emplace(*bank_, contract, bs_collocation(contract, forward), forward.weights);
    Points sites(static_cast<Eigen::Index>(observations_.size()), 2);
    observed_.resize(sites.rows());
    for (std::size_t i = 0; i < observations_.size(); ++i) {
      const auto& o = observations_[i];
      require(o.s >= 0.0 && o.t >= 0.0 && o.t <= contract.maturity && o.price >= 0.0,
              "observation outside the contract domain");
      const auto row = static_cast<Eigen::Index>(i);
      sites(row, bs_axis_s) = o.s;
      sites(row, bs_axis_t) = o.t;
      observed_[row] = o.price;
    }
    site_features_ = bank_->features(sites);
  }

  double operator()(double sigma, double rate) const {
    try {
      const SolveReport rep = solve(assembler_->assemble(sigma, rate), forward_.solver);
      return mse(site_features_ * rep.coefficients, observed_);
    } catch (const Error& e) {
      std::ostringstream os;
      os << "forward solve failed at (sigma=" << sigma << ", r=" << rate << "): " << e.what();
      throw SolverError(os.str());
    }
  }

  const std::vector<Observation>& observations() const { return observations_; }

 private:
  std::vector<Observation> observations_;
  BsForwardConfig forward_;
  std::shared_ptr<const FeatureBank> bank_;
  std::optional<BsAssembler> assembler_;
  Matrix site_features_;
  Vector observed_;
};

inline double objective(double sigma, double rate, const std::vector<Observation>& observations,
                        const BsParams& contract, const BsForwardConfig& forward,
                        std::uint64_t forward_seed = 1) {
  return BsObjective(observations, contract, forward, forward_seed)(sigma, rate);
}

struct TrialRecord {
  std::size_t iteration = 0;
  double sigma = 0.0;
  double r = 0.0;
  double objective = 0.0;  // NaN when the forward solve failed
  double best_sigma = 0.0;
  double best_r = 0.0;
  double best_objective = std::numeric_limits<double>::infinity();
};

struct CalibResult {
  double sigma_hat = 0.0;
  double r_hat = 0.0;
  double best_objective = std::numeric_limits<double>::infinity();
  std::vector<TrialRecord> trajectory;
  std::size_t n_evals = 0;
  // Surrogate posterior std of log(objective) at the incumbent; informational.
  double posterior_log_std = std::numeric_limits<double>::quiet_NaN();
  double wall_time_seconds = 0.0;
};

namespace detail {

inline double radical_inverse(std::uint64_t index, unsigned base) {
  double inv = 1.0 / base, f = inv, x = 0.0;
  while (index > 0) {
    x += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return x;
}

/// Halton points (bases 2, 3) with a random Cranley-Patterson shift.
inline Points shifted_halton(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double shift[2] = {unit(rng), unit(rng)};
  Points p(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    p(row, 0) = std::fmod(radical_inverse(i + 1, 2) + shift[0], 1.0);
    p(row, 1) = std::fmod(radical_inverse(i + 1, 3) + shift[1], 1.0);
  }
  return p;
}

inline double log_objective(double value) { return std::log(value + 1e-12); }

}  // namespace detail

/// Bayesian optimization of the misfit over the (sigma, r) box: a Latin
/// hypercube initial design, then GP + expected improvement rounds.
template <typename Objective>
CalibResult calibrate_with(Objective&& objective, const CalibConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const double s_lo = config.sigma_bounds[0], s_w = config.sigma_bounds[1] - config.sigma_bounds[0];
  const double r_lo = config.r_bounds[0], r_w = config.r_bounds[1] - config.r_bounds[0];
  auto to_theta = [&](const Eigen::Ref<const Vector>& u) {
    return std::pair{s_lo + s_w * u[0], r_lo + r_w * u[1]};
  };

  CalibResult result;
  std::vector<Vector> unit_points;  // successful evaluations only
  std::vector<double> log_values;
  TrialRecord best;
  std::size_t successes = 0;

  auto evaluate = [&](const Vector& u) {
    const auto [sigma, rate] = to_theta(u);
    TrialRecord rec;
    rec.iteration = result.trajectory.size();
    rec.sigma = sigma;
    rec.r = rate;
    try {
      rec.objective = objective(sigma, rate);
    } catch (const SolverError&) {
      rec.objective = std::numeric_limits<double>::quiet_NaN();
    }
    if (std::isfinite(rec.objective)) {
      ++successes;
      unit_points.push_back(u);
      log_values.push_back(detail::log_objective(rec.objective));
      if (rec.objective < best.best_objective) {
        best.best_objective = rec.objective;
        best.best_sigma = sigma;
        best.best_r = rate;
      }
    }
    rec.best_sigma = best.best_sigma;
    rec.best_r = best.best_r;
    rec.best_objective = best.best_objective;
    result.trajectory.push_back(rec);
  };

  const DomainBox unit({0.0, 0.0}, {1.0, 1.0});
  const Points design = latin_hypercube(config.seed, unit, config.n_init);
  for (Eigen::Index i = 0; i < design.rows(); ++i) evaluate(design.row(i).transpose());

  std::mt19937_64 rng(detail::splitmix64(config.seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double local_scales[] = {0.1, 0.03, 0.01, 0.003, 0.001};

  auto fitted_surrogate = [&]() -> std::optional<GpSurrogate> {
    if (unit_points.size() < 2) return std::nullopt;
    Points x(static_cast<Eigen::Index>(unit_points.size()), 2);
    Vector y(x.rows());
    for (std::size_t i = 0; i < unit_points.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = unit_points[i].transpose();
      y[static_cast<Eigen::Index>(i)] = log_values[i];
    }
    return gp_fit(GpSurrogate(std::move(x), std::move(y), PriorMean::worst_observed), config.surrogate);
  };

  for (std::size_t k = 0; k < config.n_iter; ++k) {
    const Points halton = detail::shifted_halton(config.n_candidates, rng);
    std::optional<GpSurrogate> gp = fitted_surrogate();
    if (!gp) {
      evaluate(halton.row(0).transpose());
      continue;
    }
    const double best_y = *std::min_element(log_values.begin(), log_values.end());
    const Vector incumbent((Vector(2) << (best.best_sigma - s_lo) / s_w, (best.best_r - r_lo) / r_w).finished());

    Points candidates(halton.rows() + static_cast<Eigen::Index>(config.n_local), 2);
    candidates.topRows(halton.rows()) = halton;
    for (std::size_t i = 0; i < config.n_local; ++i) {
      const double scale = local_scales[i % std::size(local_scales)];
      for (Eigen::Index j = 0; j < 2; ++j)
        candidates(halton.rows() + static_cast<Eigen::Index>(i), j) =
            std::clamp(incumbent[j] + scale * gauss(rng), 0.0, 1.0);
    }

    Eigen::Index chosen = -1;
    double best_ei = -1.0;
    for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
      const Vector u = candidates.row(i).transpose();
      bool duplicate = false;
      for (const auto& seen : unit_points)
        if ((seen - u).squaredNorm() < 1e-18) { duplicate = true; break; }
      if (duplicate) continue;
      const double ei = expected_improvement(*gp, u, best_y);
      if (ei > best_ei) {
        best_ei = ei;
        chosen = i;
      }
    }
    evaluate(candidates.row(chosen < 0 ? 0 : chosen).transpose());
  }

  require<SolverError>(successes > 0, "every objective evaluation failed");
  result.sigma_hat = best.best_sigma;
  result.r_hat = best.best_r;
  result.best_objective = best.best_objective;
  result.n_evals = result.trajectory.size();
  if (auto gp = fitted_surrogate()) {
    const Vector u((Vector(2) << (result.sigma_hat - s_lo) / s_w, (result.r_hat - r_lo) / r_w).finished());
    result.posterior_log_std = gp->predict(u).std;
  }
  result.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

inline CalibResult calibrate(const std::vector<Observation>& observations, const CalibConfig& config) {
  config.validate();
  const BsObjective objective(observations, config.contract, config.forward, config.forward_seed);
  return calibrate_with(objective, config);
}

}  // namespace pielm
