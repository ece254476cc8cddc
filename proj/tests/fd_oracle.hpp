#pragma once

// Central-difference oracle for feature derivatives. Features are re-evaluated
// from the bank's hidden parameters in long double, so the comparison sees the
// truncation error of the stencil but not double-precision cancellation.

#include "pielm/feature_basis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace pielm::testing {

inline long double feature_ld(const FeatureBank& bank, Eigen::Index neuron, const std::vector<long double>& x) {
  long double arg = bank.biases()[neuron];
  for (std::size_t c = 0; c < bank.dim(); ++c) {
    const long double z =
        (2.0L / bank.domain().width(c)) * (x[c] - static_cast<long double>(bank.domain().lower(c))) - 1.0L;
    arg += static_cast<long double>(bank.weights()(neuron, static_cast<Eigen::Index>(c))) * z;
  }
  return std::tanh(arg);
}

inline std::vector<long double> row_ld(const Points& p, Eigen::Index i) {
  std::vector<long double> x(static_cast<std::size_t>(p.cols()));
  for (Eigen::Index c = 0; c < p.cols(); ++c) x[static_cast<std::size_t>(c)] = p(i, c);
  return x;
}

inline long double fd_first(const FeatureBank& bank, Eigen::Index n, std::vector<long double> x,
                            std::size_t axis, long double h) {
  auto plus = x, minus = x;
  plus[axis] += h;
  minus[axis] -= h;
  return (feature_ld(bank, n, plus) - feature_ld(bank, n, minus)) / (2.0L * h);
}

inline long double fd_second(const FeatureBank& bank, Eigen::Index n, const std::vector<long double>& x,
                             std::size_t j, std::size_t k, long double h) {
  auto at = [&](long double dj, long double dk) {
    auto y = x;
    y[j] += dj;
    y[k] += dk;
    return feature_ld(bank, n, y);
  };
  if (j == k) return (at(h, 0) - 2.0L * at(0, 0) + at(-h, 0)) / (h * h);
  return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0L * h * h);
}

/// Second-order stencil with its leading h^2 error removed by one Richardson step.
inline long double fd_second_extrapolated(const FeatureBank& bank, Eigen::Index n,
                                          const std::vector<long double>& x, std::size_t j, std::size_t k,
                                          long double h) {
  return (4.0L * fd_second(bank, n, x, j, k, h / 2) - fd_second(bank, n, x, j, k, h)) / 3.0L;
}

inline double rel_err(double analytic, long double oracle) {
  return static_cast<double>(std::abs(analytic - oracle) / std::max(std::abs(oracle), 1e-12L));
}

inline Points uniform_points(const DomainBox& box, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Points p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(box.dim()));
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (std::size_t c = 0; c < box.dim(); ++c) p(i, static_cast<Eigen::Index>(c)) = box.lower(c) + u(rng) * box.width(c);
  return p;
}

struct DerivativeCheck {
  double first = 0.0;             // worst relative error, h = 1e-4 central difference
  double second = 0.0;            // worst relative error, h = 1e-3 second-order stencil
  double second_extrapolated = 0.0;
};

/// 100 random (point, neuron) pairs per axis and per axis pair.
inline DerivativeCheck check_derivatives(const FeatureBank& bank, std::uint64_t seed, std::size_t n_pairs = 100) {
  DerivativeCheck out;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> neuron(0, static_cast<Eigen::Index>(bank.n_neurons()) - 1);
  for (std::size_t j = 0; j < bank.dim(); ++j) {
    const Points p = uniform_points(bank.domain(), n_pairs, seed + 31 * j);
    const Matrix d1 = bank.derivative(p, j);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const Eigen::Index n = neuron(rng);
      out.first = std::max(out.first, rel_err(d1(i, n), fd_first(bank, n, row_ld(p, i), j, 1e-4L)));
    }
    for (std::size_t k = j; k < bank.dim(); ++k) {
      const Points q = uniform_points(bank.domain(), n_pairs, seed + 1000 + 31 * j + k);
      const Matrix d2 = bank.second_derivative(q, j, k);
      for (Eigen::Index i = 0; i < q.rows(); ++i) {
        const Eigen::Index n = neuron(rng);
        const auto x = row_ld(q, i);
        out.second = std::max(out.second, rel_err(d2(i, n), fd_second(bank, n, x, j, k, 1e-3L)));
        out.second_extrapolated =
            std::max(out.second_extrapolated, rel_err(d2(i, n), fd_second_extrapolated(bank, n, x, j, k, 1e-3L)));
      }
    }
  }
  return out;
}

}  // namespace pielm::testing
