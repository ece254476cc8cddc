#pragma once

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
#include <sstream>

namespace pielm {

// Domain axes for the Black-Scholes problem.
inline constexpr std::size_t bs_axis_s = 0;
inline constexpr std::size_t bs_axis_t = 1;

struct BsParams {
  double strike = 1.0;
  double maturity = 1.0;
  double rate = 0.05;
  double volatility = 0.20;
  double s_max = 3.0;

  void validate() const {
    require(strike > 0.0, "strike must be positive");
    require(maturity > 0.0, "maturity must be positive");
    require(s_max > 0.0, "s_max must be positive");
    require(volatility >= 0.0, "volatility must be non-negative");
    require(s_max > strike, "s_max must exceed the strike");
    require(std::isfinite(rate), "rate must be finite");
  }

  DomainBox domain() const { return DomainBox({0.0, 0.0}, {s_max, maturity}); }

  std::string digest() const {
    std::ostringstream os;
    os.precision(17);
    os << "bs{K=" << strike << ",T=" << maturity << ",r=" << rate << ",sigma=" << volatility
       << ",s_max=" << s_max << "}";
    return os.str();
  }
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double call_payoff(double s, double strike) { return std::max(s - strike, 0.0); }

/// European call price at (S, t) under constant volatility and rate.
inline double bs_closed_form(const BsParams& p, double s, double t) {
  require(s >= 0.0, "spot must be non-negative");
  require(t >= 0.0 && t <= p.maturity * (1.0 + 1e-12), "time must lie in [0, T]");
  const double tau = std::max(p.maturity - t, 0.0);
  if (s == 0.0) return 0.0;
  if (tau == 0.0) return call_payoff(s, p.strike);
  const double discount = std::exp(-p.rate * tau);
  if (p.volatility == 0.0) return std::max(s - p.strike * discount, 0.0);
  const double vol_sqrt = p.volatility * std::sqrt(tau);
  const double d1 =
      (std::log(s / p.strike) + (p.rate + 0.5 * p.volatility * p.volatility) * tau) / vol_sqrt;
  const double d2 = d1 - vol_sqrt;
  return s * normal_cdf(d1) - p.strike * discount * normal_cdf(d2);
}

struct BlockWeights {
  double pde = 1.0;
  double terminal = 10.0;
  double boundary = 10.0;
};

struct BsForwardConfig {
  std::size_t n_neurons = 1500;
  double weight_scale = 6.0;
  std::array<std::size_t, 2> interior_counts{71, 71};  // (S, t)
  std::size_t facet_points = 150;
  // An unweighted terminal block rings less at the payoff kink; the ringing
  // otherwise travels back to t = 0 along the low-S region.
  BlockWeights weights{1.0, 1.0, 10.0};
  SolverConfig solver;
};

/// Interior tensor grid plus the S = 0, S = s_max and t = T facets.
inline CollocationSet bs_collocation(const BsParams& params, const BsForwardConfig& cfg) {
  const DomainBox domain = params.domain();
  CollocationSet c;
  c.interior = tensor_grid(domain, {cfg.interior_counts[0], cfg.interior_counts[1]});
  c.facets.push_back(facet_points(domain, bs_axis_s, Side::lower, {cfg.facet_points}));
  c.facets.push_back(facet_points(domain, bs_axis_s, Side::upper, {cfg.facet_points}));
  c.facets.push_back(facet_points(domain, bs_axis_t, Side::upper, {cfg.facet_points}));
  return c;
}

/// Caches every feature matrix the Black-Scholes residual rows need, so the
/// system can be re-assembled for any (sigma, r) with a few matrix sums.
class BsAssembler {
 public:
  BsAssembler(const FeatureBank& bank, const BsParams& params, const CollocationSet& colloc,
              BlockWeights weights = {})
      : n_neurons_(bank.n_neurons()), weights_(weights), strike_(params.strike) {
    params.validate();
    require<InvalidDomain>(bank.domain() == params.domain(),
                           "feature bank domain must be [0, s_max] x [0, T]");
    const auto* s_zero = colloc.find({bs_axis_s, Side::lower});
    const auto* s_far = colloc.find({bs_axis_s, Side::upper});
    const auto* terminal = colloc.find({bs_axis_t, Side::upper});
    require(s_zero && s_far && terminal,
            "collocation set must contain S=0, S=s_max and t=T facets");
    require(colloc.interior.rows() > 0, "collocation set has no interior points");
    require(colloc.total_points() > bank.n_neurons(),
            "collocation points must outnumber neurons");

    const FeatureJet in = bank.at(colloc.interior);
    const Vector s = colloc.interior.col(bs_axis_s);
    phi_ = in.value();
    phi_t_ = in.first(bs_axis_t);
    s_phi_s_ = s.asDiagonal() * in.first(bs_axis_s);
    s2_phi_ss_ = s.array().square().matrix().asDiagonal() * in.second(bs_axis_s, bs_axis_s);

    terminal_phi_ = bank.features(terminal->points);
    terminal_rhs_ = terminal->points.col(bs_axis_s).unaryExpr(
        [k = params.strike](double x) { return call_payoff(x, k); });
    zero_phi_ = bank.features(s_zero->points);
    far_phi_ss_ = bank.second_derivative(s_far->points, bs_axis_s, bs_axis_s);
    far_facet_ = to_string(s_far->id);
    zero_facet_ = to_string(s_zero->id);
  }

  /// Interior operator rows: phi_t + 0.5 sigma^2 S^2 phi_SS + r S phi_S - r phi.
  Matrix pde_rows(double sigma, double rate) const {
    return phi_t_ + (0.5 * sigma * sigma) * s2_phi_ss_ + rate * (s_phi_s_ - phi_);
  }

  LinearSystem assemble(double sigma, double rate) const {
    LinearSystem sys(n_neurons_);
    sys.append_block(pde_rows(sigma, rate), Vector::Zero(phi_.rows()), {BlockKind::pde, {}},
                     weights_.pde);
    sys.append_block(terminal_phi_, terminal_rhs_, {BlockKind::terminal, {}}, weights_.terminal);
    sys.append_block(zero_phi_, Vector::Zero(zero_phi_.rows()), {BlockKind::boundary, zero_facet_},
                     weights_.boundary);
    sys.append_block(far_phi_ss_, Vector::Zero(far_phi_ss_.rows()),
                     {BlockKind::boundary, far_facet_}, weights_.boundary);
    return sys;
  }

 private:
  std::size_t n_neurons_;
  BlockWeights weights_;
  double strike_;
  Matrix phi_, phi_t_, s_phi_s_, s2_phi_ss_;
  Matrix terminal_phi_;
  Vector terminal_rhs_;
  Matrix zero_phi_;
  Matrix far_phi_ss_;
  std::string zero_facet_, far_facet_;
};

inline LinearSystem assemble_bs(const FeatureBank& bank, const BsParams& params,
                                const CollocationSet& colloc, BlockWeights weights = {}) {
  return BsAssembler(bank, params, colloc, weights).assemble(params.volatility, params.rate);
}

inline std::shared_ptr<const FeatureBank> make_bs_bank(const BsParams& params,
                                                       const BsForwardConfig& cfg,
                                                       std::uint64_t seed) {
  return std::make_shared<const FeatureBank>(seed, cfg.n_neurons, params.domain(),
                                             cfg.weight_scale);
}

inline PielmSolution solve_bs(const BsParams& params, const BsForwardConfig& cfg,
                              std::uint64_t seed) {
  params.validate();
  auto bank = make_bs_bank(params, cfg, seed);
  const LinearSystem sys = assemble_bs(*bank, params, bs_collocation(params, cfg), cfg.weights);
  SolveReport report = solve(sys, cfg.solver);
  Vector c = report.coefficients;
  return PielmSolution(std::move(bank), std::move(c), params.digest(), std::move(report));
}

struct PricingSurface {
  Vector s_grid;
  Vector t_grid;
  Matrix values;  // |t| x |s|
};

inline PricingSurface eval_surface(const PielmSolution& solution, const Vector& s_grid,
                                   const Vector& t_grid) {
  require<ShapeMismatch>(solution.bank().dim() == 2, "surface evaluation needs a 2D solution");
  Points pts(s_grid.size() * t_grid.size(), 2);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < t_grid.size(); ++i)
    for (Eigen::Index j = 0; j < s_grid.size(); ++j, ++row) {
      pts(row, bs_axis_s) = s_grid[j];
      pts(row, bs_axis_t) = t_grid[i];
    }
  const Vector v = solution.evaluate(pts);
  PricingSurface surface{s_grid, t_grid, Matrix(t_grid.size(), s_grid.size())};
  row = 0;
  for (Eigen::Index i = 0; i < t_grid.size(); ++i)
    for (Eigen::Index j = 0; j < s_grid.size(); ++j) surface.values(i, j) = v[row++];
  return surface;
}

inline Matrix closed_form_surface(const BsParams& params, const Vector& s_grid, const Vector& t_grid) {
  Matrix m(t_grid.size(), s_grid.size());
  for (Eigen::Index i = 0; i < t_grid.size(); ++i)
    for (Eigen::Index j = 0; j < s_grid.size(); ++j)
      m(i, j) = bs_closed_form(params, s_grid[j], t_grid[i]);
  return m;
}

/// Evaluation grid spanning the whole (S, t) domain, endpoints included.
inline std::pair<Vector, Vector> bs_eval_grid(const BsParams& params, std::size_t n_s = 101,
                                              std::size_t n_t = 101) {
  return {detail::linspace(0.0, params.s_max, n_s), detail::linspace(0.0, params.maturity, n_t)};
}

/// Error of the surface against the closed form, flattened over the grid.
inline MetricsReport surface_error(const PricingSurface& surface, const BsParams& params) {
  const Matrix ref = closed_form_surface(params, surface.s_grid, surface.t_grid);
  const Eigen::Map<const Vector> pred(surface.values.data(), surface.values.size());
  const Eigen::Map<const Vector> exact(ref.data(), ref.size());
  return compare(pred, exact);
}

}  // namespace pielm
