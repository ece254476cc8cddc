#pragma once

#include "pielm/black_scholes.hpp"
#include "pielm/feature_basis.hpp"
#include "pielm/linear_solver.hpp"
#include "pielm/metrics.hpp"
#include "pielm/sampling.hpp"
#include "pielm/solution.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

namespace pielm {

// Domain axes for the Heston-Hull-White problem: (t, S, v, r).
inline constexpr std::size_t hhw_axis_t = 0;
inline constexpr std::size_t hhw_axis_s = 1;
inline constexpr std::size_t hhw_axis_v = 2;
inline constexpr std::size_t hhw_axis_r = 3;

using Matrix3 = Eigen::Matrix3d;

struct HhwParams {
  double strike = 1.0;
  double maturity = 2.0;
  double r0 = 0.05;
  double kappa_r = 0.2;
  double theta_r = 0.03;
  double sigma_r = 0.01;
  double v0 = 0.5;
  double kappa_v = 2.0;
  double theta_v = 0.14;
  double sigma_v = 0.50;
  double rho_sv = -0.6;
  double rho_sr = 0.1;
  double rho_vr = 0.0;
  // Truncated computational domain.
  double s_max = 3.0;
  double v_max = 1.5;
  double r_min = -0.05;
  double r_max = 0.20;

  /// Correlation matrix of (W^S, W^v, W^r).
  Matrix3 correlation() const {
    Matrix3 c;
    c << 1.0, rho_sv, rho_sr,
         rho_sv, 1.0, rho_vr,
         rho_sr, rho_vr, 1.0;
    return c;
  }

  void validate() const {
    require(strike > 0.0, "strike must be positive");
    require(maturity > 0.0, "maturity must be positive");
    require(kappa_v >= 0.0 && kappa_r >= 0.0, "mean-reversion speeds must be non-negative");
    require(sigma_v >= 0.0 && sigma_r >= 0.0, "volatilities must be non-negative");
    require(theta_v >= 0.0 && v0 >= 0.0, "variances must be non-negative");
    require(s_max > strike, "s_max must exceed the strike");
    require(v_max > 0.0, "v_max must be positive");
    require(r_max > r_min, "rate domain must have positive width");
    for (double rho : {rho_sv, rho_sr, rho_vr})
      require<CorrelationError>(std::abs(rho) <= 1.0, "correlations must lie in [-1, 1]");
    const Eigen::SelfAdjointEigenSolver<Matrix3> eig(correlation());
    require<CorrelationError>(eig.eigenvalues().minCoeff() >= -1e-12,
                              "correlation matrix is not positive semidefinite");
  }

  DomainBox domain() const {
    return DomainBox({0.0, 0.0, 0.0, r_min}, {maturity, s_max, v_max, r_max});
  }

  std::string digest() const {
    std::ostringstream os;
    os.precision(17);
    os << "hhw{K=" << strike << ",T=" << maturity << ",kappa_r=" << kappa_r << ",theta_r=" << theta_r
       << ",sigma_r=" << sigma_r << ",kappa_v=" << kappa_v << ",theta_v=" << theta_v
       << ",sigma_v=" << sigma_v << ",rho=(" << rho_sv << "," << rho_sr << "," << rho_vr
       << "),box=(" << s_max << "," << v_max << "," << r_min << "," << r_max << ")}";
    return os.str();
  }
};

/// Parameters under which variance and rate are deterministic and pinned at
/// their long-run levels, so the model collapses to Black-Scholes with
/// sigma = sqrt(theta_v), r = theta_r.
inline HhwParams degenerate_params(HhwParams base, double theta_v, double theta_r) {
  base.sigma_v = 0.0;
  base.sigma_r = 0.0;
  base.theta_v = theta_v;
  base.v0 = theta_v;
  base.theta_r = theta_r;
  base.r0 = theta_r;
  return base;
}

struct HhwState {
  double t = 0.0;
  double s = 1.0;
  double v = 0.5;
  double r = 0.05;
};

inline Points to_points(const std::vector<HhwState>& states) {
  Points p(static_cast<Eigen::Index>(states.size()), 4);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    p(row, hhw_axis_t) = states[i].t;
    p(row, hhw_axis_s) = states[i].s;
    p(row, hhw_axis_v) = states[i].v;
    p(row, hhw_axis_r) = states[i].r;
  }
  return p;
}

struct HhwForwardConfig {
  std::size_t n_neurons = 2000;
  double weight_scale = 3.0;
  // Per-axis weight scales (t, S, v, r); empty means weight_scale on every axis.
  std::vector<double> axis_scales{3.0, 4.0, 1.0, 1.0};
  std::size_t interior_points = 8000;
  // Tensor-grid counts over the remaining axes (increasing axis order).
  std::vector<std::size_t> terminal_counts{20, 5, 5};     // (S, v, r) at t = T
  std::vector<std::size_t> s_facet_counts{10, 10, 5};     // (t, v, r) at S = 0 and S = s_max
  std::vector<std::size_t> v_facet_counts{10, 10, 5};     // (t, S, r) at v = 0 and v = v_max
  BlockWeights weights{1.0, 10.0, 3.0};
  // Weight of the dV/dv = 0 rows at v = v_max, separate from the other boundaries.
  double saturation_weight = 0.3;
  SolverConfig solver;
};

inline CollocationSet hhw_collocation(const HhwParams& params, const HhwForwardConfig& cfg,
                                      std::uint64_t seed) {
  const DomainBox domain = params.domain();
  CollocationSet c;
  c.interior = latin_hypercube(seed ^ 0x9E3779B97F4A7C15ULL, domain, cfg.interior_points);
  c.facets.push_back(facet_points(domain, hhw_axis_t, Side::upper, cfg.terminal_counts));
  c.facets.push_back(facet_points(domain, hhw_axis_s, Side::lower, cfg.s_facet_counts));
  c.facets.push_back(facet_points(domain, hhw_axis_s, Side::upper, cfg.s_facet_counts));
  c.facets.push_back(facet_points(domain, hhw_axis_v, Side::lower, cfg.v_facet_counts));
  c.facets.push_back(facet_points(domain, hhw_axis_v, Side::upper, cfg.v_facet_counts));
  return c;
}

/// Per-point coefficients of the pricing operator, one entry per term.
struct HhwOperatorCoefficients {
  Vector drift_s, drift_v, drift_r;          // r S, kappa_v (theta_v - v), kappa_r (theta_r - r)
  Vector diff_ss, diff_sv, diff_sr, diff_vv;  // 1/2 v S^2, rho_sv sigma_v v S, rho_sr sigma_r S sqrt(v), 1/2 sigma_v^2 v
  double diff_rr = 0.0;                       // 1/2 sigma_r^2
  Vector discount;                            // -r
};

inline HhwOperatorCoefficients hhw_coefficients(const HhwParams& p, const Points& points) {
  const auto s = points.col(hhw_axis_s).array();
  const Eigen::ArrayXd v = points.col(hhw_axis_v).array().max(0.0);
  const auto r = points.col(hhw_axis_r).array();
  HhwOperatorCoefficients c;
  c.drift_s = (r * s).matrix();
  c.drift_v = (p.kappa_v * (p.theta_v - v)).matrix();
  c.drift_r = (p.kappa_r * (p.theta_r - r)).matrix();
  c.diff_ss = (0.5 * v * s.square()).matrix();
  c.diff_sv = (p.rho_sv * p.sigma_v * v * s).matrix();
  c.diff_sr = (p.rho_sr * p.sigma_r * s * v.sqrt()).matrix();
  c.diff_vv = (0.5 * p.sigma_v * p.sigma_v * v).matrix();
  c.diff_rr = 0.5 * p.sigma_r * p.sigma_r;
  c.discount = (-r).matrix();
  return c;
}

/// Rows of the full pricing operator applied to every feature at `points`.
inline Matrix hhw_operator_rows(const FeatureBank& bank, const HhwParams& p, const Points& points) {
  const FeatureJet jet = bank.at(points);
  const HhwOperatorCoefficients c = hhw_coefficients(p, points);
  Matrix rows = jet.first(hhw_axis_t);
  rows.noalias() += c.drift_s.asDiagonal() * jet.first(hhw_axis_s);
  rows.noalias() += c.drift_v.asDiagonal() * jet.first(hhw_axis_v);
  rows.noalias() += c.drift_r.asDiagonal() * jet.first(hhw_axis_r);
  rows.noalias() += c.diff_ss.asDiagonal() * jet.second(hhw_axis_s, hhw_axis_s);
  if (p.rho_sv != 0.0 && p.sigma_v != 0.0)
    rows.noalias() += c.diff_sv.asDiagonal() * jet.second(hhw_axis_s, hhw_axis_v);
  if (p.rho_sr != 0.0 && p.sigma_r != 0.0)
    rows.noalias() += c.diff_sr.asDiagonal() * jet.second(hhw_axis_s, hhw_axis_r);
  if (p.sigma_v != 0.0) rows.noalias() += c.diff_vv.asDiagonal() * jet.second(hhw_axis_v, hhw_axis_v);
  if (p.sigma_r != 0.0) rows += c.diff_rr * jet.second(hhw_axis_r, hhw_axis_r);
  rows.noalias() += c.discount.asDiagonal() * jet.value();
  return rows;
}

inline LinearSystem assemble_hhw(const FeatureBank& bank, const HhwParams& params,
                                 const CollocationSet& colloc, BlockWeights weights = {1.0, 10.0, 3.0},
                                 double saturation_weight = 0.3) {
  params.validate();
  require<InvalidDomain>(bank.domain() == params.domain(),
                         "feature bank domain must be [0,T] x [0,s_max] x [0,v_max] x [r_min,r_max]");
  const auto* terminal = colloc.find({hhw_axis_t, Side::upper});
  const auto* s_zero = colloc.find({hhw_axis_s, Side::lower});
  const auto* s_far = colloc.find({hhw_axis_s, Side::upper});
  const auto* v_zero = colloc.find({hhw_axis_v, Side::lower});
  const auto* v_far = colloc.find({hhw_axis_v, Side::upper});
  require(terminal && s_zero && s_far && v_zero && v_far,
          "collocation set must contain t=T, S=0, S=s_max, v=0 and v=v_max facets");
  require(colloc.total_points() > bank.n_neurons(), "collocation points must outnumber neurons");

  LinearSystem sys(bank.n_neurons());
  sys.append_block(hhw_operator_rows(bank, params, colloc.interior),
                   Vector::Zero(colloc.interior.rows()), {BlockKind::pde, {}}, weights.pde);

  const Vector payoff = terminal->points.col(hhw_axis_s).unaryExpr(
      [k = params.strike](double s) { return call_payoff(s, k); });
  sys.append_block(bank.features(terminal->points), payoff, {BlockKind::terminal, {}},
                   weights.terminal);

  // Vanishing value as S -> 0.
  sys.append_block(bank.features(s_zero->points), Vector::Zero(s_zero->points.rows()),
                   {BlockKind::boundary, to_string(s_zero->id)}, weights.boundary);
  // Linear growth as S -> infinity.
  sys.append_block(bank.second_derivative(s_far->points, hhw_axis_s, hhw_axis_s),
                   Vector::Zero(s_far->points.rows()), {BlockKind::boundary, to_string(s_far->id)},
                   weights.boundary);
  // v = 0: the operator itself, with its diffusion terms switched off by v = 0.
  sys.append_block(hhw_operator_rows(bank, params, v_zero->points),
                   Vector::Zero(v_zero->points.rows()), {BlockKind::boundary, to_string(v_zero->id)},
                   weights.boundary);
  // Sensitivity saturation as v -> infinity.
  sys.append_block(bank.derivative(v_far->points, hhw_axis_v), Vector::Zero(v_far->points.rows()),
                   {BlockKind::boundary, to_string(v_far->id)}, saturation_weight);
  return sys;
}

inline PielmSolution solve_hhw(const HhwParams& params, const HhwForwardConfig& cfg,
                               std::uint64_t seed) {
  params.validate();
  auto bank = std::make_shared<const FeatureBank>(seed, cfg.n_neurons, params.domain(),
                                                  cfg.weight_scale, cfg.axis_scales);
  const LinearSystem sys =
      assemble_hhw(*bank, params, hhw_collocation(params, cfg, seed), cfg.weights,
                   cfg.saturation_weight);
  SolveReport report = solve(sys, cfg.solver);
  Vector c = report.coefficients;
  return PielmSolution(std::move(bank), std::move(c), params.digest(), std::move(report));
}

/// Values on the (S, t) plane at fixed (v, r); rows follow t_grid, columns s_grid.
inline PricingSurface hhw_slice(const PielmSolution& solution, double v, double r,
                                const Vector& s_grid, const Vector& t_grid) {
  require<ShapeMismatch>(solution.bank().dim() == 4, "slice evaluation needs a 4D solution");
  std::vector<HhwState> states;
  states.reserve(static_cast<std::size_t>(s_grid.size() * t_grid.size()));
  for (Eigen::Index i = 0; i < t_grid.size(); ++i)
    for (Eigen::Index j = 0; j < s_grid.size(); ++j) states.push_back({t_grid[i], s_grid[j], v, r});
  const Vector flat = solution.evaluate(to_points(states));
  PricingSurface surface{s_grid, t_grid, Matrix(t_grid.size(), s_grid.size())};
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < t_grid.size(); ++i)
    for (Eigen::Index j = 0; j < s_grid.size(); ++j) surface.values(i, j) = flat[k++];
  return surface;
}

struct DegeneracyReport {
  double theta_v = 0.0;
  double theta_r = 0.0;
  MetricsReport error;  // slice at (v, r) = (theta_v, theta_r) vs the closed form
  PricingSurface slice;
};

/// Solves with variance and rate frozen at (theta_v, theta_r) and compares the
/// (S, t) slice with Black-Scholes at sigma = sqrt(theta_v), r = theta_r.
inline DegeneracyReport degeneracy_check(const HhwParams& base, double theta_v, double theta_r,
                                         const HhwForwardConfig& cfg, std::uint64_t seed,
                                         std::size_t n_s = 61, std::size_t n_t = 41) {
  const HhwParams p = degenerate_params(base, theta_v, theta_r);
  const auto run = timed([&] { return solve_hhw(p, cfg, seed); });
  BsParams bs;
  bs.strike = p.strike;
  bs.maturity = p.maturity;
  bs.volatility = std::sqrt(theta_v);
  bs.rate = theta_r;
  bs.s_max = p.s_max;
  const Vector s_grid = detail::linspace(0.0, p.s_max, n_s);
  const Vector t_grid = detail::linspace(0.0, p.maturity, n_t);
  DegeneracyReport report{theta_v, theta_r, {}, hhw_slice(run.result, theta_v, theta_r, s_grid, t_grid)};
  report.error = surface_error(report.slice, bs);
  report.error.wall_time_seconds = run.seconds;
  return report;
}

/// Seeded interior query states away from the truncation faces: t in
/// [0, 3T/4], S in [0.6K, 1.5K], v in [0.05, 0.7], r in [0, 0.1] (clipped to
/// the domain).
inline std::vector<HhwState> hhw_query_states(const HhwParams& p, std::size_t n, std::uint64_t seed) {
  const DomainBox box({0.0, 0.6 * p.strike, std::min(0.05, 0.5 * p.v_max), std::max(0.0, p.r_min)},
                      {0.75 * p.maturity, std::min(1.5 * p.strike, p.s_max), std::min(0.7, p.v_max),
                       std::min(0.1, p.r_max)});
  const Points x = latin_hypercube(seed, box, n);
  std::vector<HhwState> states;
  for (Eigen::Index i = 0; i < x.rows(); ++i) states.push_back({x(i, 0), x(i, 1), x(i, 2), x(i, 3)});
  return states;
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle

struct McConfig {
  std::size_t n_paths = 200000;
  std::size_t n_steps = 200;
  std::uint64_t seed = 20240917;

  void validate() const {
    require(n_paths >= 100, "Monte Carlo needs at least 100 paths");
    require(n_steps >= 10, "Monte Carlo needs at least 10 time steps");
  }
};

struct McEstimate {
  double price = 0.0;
  double std_error = 0.0;
};

/// Lower-triangular L with L L^T = corr. Zero pivots (semidefinite input) leave
/// the corresponding column zero.
inline Matrix3 correlation_cholesky(const Matrix3& corr) {
  Matrix3 l = Matrix3::Zero();
  for (int j = 0; j < 3; ++j) {
    double d = corr(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    require<CorrelationError>(d >= -1e-12, "correlation matrix is not positive semidefinite");
    const double pivot = d > 1e-14 ? std::sqrt(d) : 0.0;
    l(j, j) = pivot;
    for (int i = j + 1; i < 3; ++i) {
      double x = corr(i, j);
      for (int k = 0; k < j; ++k) x -= l(i, k) * l(j, k);
      l(i, j) = pivot > 0.0 ? x / pivot : 0.0;
    }
  }
  return l;
}

namespace detail {

// Discounted payoff of one path. The path's random stream depends only on
// (seed, path index).
inline double hhw_path(const HhwParams& p, const HhwState& start, const Matrix3& chol,
                       std::size_t n_steps, std::uint64_t seed, std::uint64_t path) {
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(path)));
  std::normal_distribution<double> normal;
  const double horizon = p.maturity - start.t;
  const double dt = horizon / static_cast<double>(n_steps);
  const double sqrt_dt = std::sqrt(dt);
  double log_s = std::log(start.s);
  double v = start.v;
  double r = start.r;
  double integral = 0.0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double e0 = normal(rng), e1 = normal(rng), e2 = normal(rng);
    const double zs = chol(0, 0) * e0;
    const double zv = chol(1, 0) * e0 + chol(1, 1) * e1;
    const double zr = chol(2, 0) * e0 + chol(2, 1) * e1 + chol(2, 2) * e2;
    const double vp = std::max(v, 0.0);  // full truncation
    const double sqrt_v = std::sqrt(vp);
    log_s += (r - 0.5 * vp) * dt + sqrt_v * sqrt_dt * zs;
    v += p.kappa_v * (p.theta_v - vp) * dt + p.sigma_v * sqrt_v * sqrt_dt * zv;
    const double r_next = r + p.kappa_r * (p.theta_r - r) * dt + p.sigma_r * sqrt_dt * zr;
    integral += 0.5 * (r + r_next) * dt;
    r = r_next;
  }
  return call_payoff(std::exp(log_s), p.strike) * std::exp(-integral);
}

}  // namespace detail

/// Euler scheme on (log S, v, r) with full truncation of v and trapezoidal
/// discounting. Independent of the number of worker threads.
inline McEstimate mc_price_hhw(const HhwParams& params, const HhwState& start, const McConfig& cfg,
                               std::size_t n_workers = 0) {
  params.validate();
  cfg.validate();
  require(start.s > 0.0, "Monte Carlo start spot must be positive");
  require(start.t >= 0.0 && start.t < params.maturity, "Monte Carlo start time must lie in [0, T)");
  const Matrix3 chol = correlation_cholesky(params.correlation());

  std::vector<double> payoffs(cfg.n_paths);
  if (n_workers == 0) n_workers = std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, cfg.n_paths);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      payoffs[i] = detail::hhw_path(params, start, chol, cfg.n_steps, cfg.seed, i);
  };
  if (n_workers == 1) {
    work(0, cfg.n_paths);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (cfg.n_paths + n_workers - 1) / n_workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(cfg.n_paths, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }

  double sum = 0.0;
  for (double x : payoffs) sum += x;
  const double n = static_cast<double>(cfg.n_paths);
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : payoffs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

// ---------------------------------------------------------------------------
// Comparison against Black-Scholes

enum class SweepAxis { sigma, rate };

struct DifferenceRow {
  double sweep_value;
  double hhw_price;
  double bs_price;
  double difference;
};

/// Black-Scholes price with the same strike, maturity, and (t, S) as `at`, and
/// constant volatility/rate taken from the state.
inline double matched_bs_price(const HhwParams& p, const HhwState& at, double sigma, double rate) {
  BsParams bs;
  bs.strike = p.strike;
  bs.maturity = p.maturity;
  bs.volatility = sigma;
  bs.rate = rate;
  bs.s_max = std::max(p.s_max, at.s + p.strike);
  return bs_closed_form(bs, at.s, at.t);
}

/// HHW minus Black-Scholes price while sweeping the initial volatility
/// sqrt(v) or the initial short rate r of the query state.
inline std::vector<DifferenceRow> hhw_minus_bs_curve(const PielmSolution& solution,
                                                     const HhwParams& params, SweepAxis axis,
                                                     const std::vector<double>& values,
                                                     const HhwState& at) {
  std::vector<HhwState> states;
  for (double x : values) {
    HhwState s = at;
    if (axis == SweepAxis::sigma) {
      require(x >= 0.0, "volatility sweep values must be non-negative");
      s.v = x * x;
    } else {
      s.r = x;
    }
    states.push_back(s);
  }
  const Vector hhw = solution.evaluate(to_points(states));
  std::vector<DifferenceRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& s = states[i];
    const double bs = matched_bs_price(params, s, std::sqrt(s.v), s.r);
    const double h = hhw[static_cast<Eigen::Index>(i)];
    rows.push_back({values[i], h, bs, h - bs});
  }
  return rows;
}

/// HHW minus Black-Scholes across spot prices for one initial volatility.
inline std::vector<DifferenceRow> hhw_minus_bs_profile(const PielmSolution& solution,
                                                       const HhwParams& params, double sigma,
                                                       const std::vector<double>& spots,
                                                       const HhwState& at) {
  std::vector<HhwState> states;
  for (double s : spots) states.push_back({at.t, s, sigma * sigma, at.r});
  const Vector hhw = solution.evaluate(to_points(states));
  std::vector<DifferenceRow> rows;
  for (std::size_t i = 0; i < spots.size(); ++i) {
    const double bs = matched_bs_price(params, states[i], sigma, at.r);
    const double h = hhw[static_cast<Eigen::Index>(i)];
    rows.push_back({spots[i], h, bs, h - bs});
  }
  return rows;
}

}  // namespace pielm
