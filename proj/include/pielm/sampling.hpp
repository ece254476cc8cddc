#pragma once

#include "pielm/core.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>

namespace pielm {

enum class Side { lower, upper };

struct FacetId {
  std::size_t axis = 0;
  Side side = Side::lower;

  friend bool operator==(const FacetId&, const FacetId&) = default;
};

inline std::string to_string(const FacetId& id) {
  return "axis" + std::to_string(id.axis) + (id.side == Side::lower ? "-lower" : "-upper");
}

/// Points on one face of a box; coordinate `id.axis` is pinned to the bound.
struct FacetSet {
  Points points;
  FacetId id;
};

struct CollocationSet {
  Points interior;
  std::vector<FacetSet> facets;

  std::size_t total_points() const {
    std::size_t n = static_cast<std::size_t>(interior.rows());
    for (const auto& f : facets) n += static_cast<std::size_t>(f.points.rows());
    return n;
  }

  const FacetSet* find(FacetId id) const {
    for (const auto& f : facets)
      if (f.id == id) return &f;
    return nullptr;
  }
};

namespace detail {

inline Vector linspace(double lo, double hi, std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    v[static_cast<Eigen::Index>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  // Endpoints exactly.
  v[0] = lo;
  v[static_cast<Eigen::Index>(n - 1)] = hi;
  return v;
}

// Tensor product over `axes`, other columns left untouched. The last listed
// axis varies fastest.
inline Points tensor_product(const DomainBox& domain, const std::vector<std::size_t>& axes,
                             const std::vector<std::size_t>& counts) {
  std::size_t total = 1;
  for (auto c : counts) total *= c;
  Points p = Points::Zero(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(domain.dim()));
  std::vector<Vector> lines;
  for (std::size_t a = 0; a < axes.size(); ++a)
    lines.push_back(linspace(domain.lower(axes[a]), domain.upper(axes[a]), counts[a]));
  for (std::size_t row = 0; row < total; ++row) {
    std::size_t rem = row;
    for (std::size_t a = axes.size(); a-- > 0;) {
      const std::size_t idx = rem % counts[a];
      rem /= counts[a];
      p(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(axes[a])) =
          lines[a][static_cast<Eigen::Index>(idx)];
    }
  }
  return p;
}

}  // namespace detail

/// Full tensor grid of per-axis linspaces, endpoints included.
inline Points tensor_grid(const DomainBox& domain, const std::vector<std::size_t>& counts) {
  require<ShapeMismatch>(counts.size() == domain.dim(), "one count per axis required");
  for (auto c : counts) require(c >= 2, "tensor grid needs at least 2 points per axis");
  std::vector<std::size_t> axes(domain.dim());
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  return detail::tensor_product(domain, axes, counts);
}

/// Latin hypercube: on each axis, exactly one sample in every stratum
/// [lower + k*w/n, lower + (k+1)*w/n).
inline Points latin_hypercube(std::uint64_t seed, const DomainBox& domain, std::size_t n) {
  require(n >= 1, "latin hypercube needs at least one point");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto rows = static_cast<Eigen::Index>(n);
  Points p(rows, static_cast<Eigen::Index>(domain.dim()));
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < domain.dim(); ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const double w = domain.width(j) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double k = static_cast<double>(perm[i]);
      double x = domain.lower(j) + (k + unit(rng)) * w;
      // Guard the half-open stratum against rounding up into the next one.
      x = std::min(x, std::nextafter(domain.lower(j) + (k + 1.0) * w, domain.lower(j)));
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
    }
  }
  return p;
}

/// Tensor grid over all axes except `axis`, which is pinned to the chosen bound.
/// `counts_other_axes` lists counts for the remaining axes in increasing axis order.
inline FacetSet facet_points(const DomainBox& domain, std::size_t axis, Side side,
                             const std::vector<std::size_t>& counts_other_axes) {
  require(axis < domain.dim(), "facet axis " + std::to_string(axis) + " out of range");
  require<ShapeMismatch>(counts_other_axes.size() + 1 == domain.dim(),
                         "facet needs one count per remaining axis");
  std::vector<std::size_t> axes;
  for (std::size_t j = 0; j < domain.dim(); ++j)
    if (j != axis) axes.push_back(j);
  for (auto c : counts_other_axes) require(c >= 2, "facet grid needs at least 2 points per axis");
  FacetSet facet;
  facet.id = {axis, side};
  facet.points = domain.dim() == 1 ? Points::Zero(1, 1)
                                   : detail::tensor_product(domain, axes, counts_other_axes);
  const double bound = side == Side::lower ? domain.lower(axis) : domain.upper(axis);
  facet.points.col(static_cast<Eigen::Index>(axis)).setConstant(bound);
  return facet;
}

}  // namespace pielm
