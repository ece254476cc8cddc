#include "pielm/sampling.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace pielm;

TEST_CASE("tensor grid includes endpoints", "[sampling]") {
  const Points p = tensor_grid(DomainBox({0.0}, {1.0}), {3});
  REQUIRE(p.rows() == 3);
  CHECK(p(0, 0) == 0.0);
  CHECK(p(1, 0) == 0.5);
  CHECK(p(2, 0) == 1.0);
}

TEST_CASE("tensor grid cardinality is the product of counts", "[sampling]") {
  const Points p = tensor_grid(DomainBox({0.0, -1.0}, {2.0, 1.0}), {3, 2});
  CHECK(p.rows() == 6);
  CHECK(p.cols() == 2);
}

TEST_CASE("tensor grid rejects fewer than two points per axis", "[sampling]") {
  CHECK_THROWS_AS(tensor_grid(DomainBox({0.0}, {1.0}), {1}), InvalidArgument);
  CHECK_THROWS_AS(tensor_grid(DomainBox({0.0, 0.0}, {1.0, 1.0}), {3}), ShapeMismatch);
}

TEST_CASE("latin hypercube puts one sample in every stratum", "[sampling]") {
  const DomainBox box({0.0, -0.05, 0.0, 1.0}, {2.0, 0.2, 1.5, 4.0});
  const std::size_t n = 257;
  const Points p = latin_hypercube(99, box, n);
  REQUIRE(p.rows() == static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < box.dim(); ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    std::sort(col.begin(), col.end());
    const double w = box.width(j) / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      INFO("axis " << j << " stratum " << k);
      CHECK(col[k] >= box.lower(j) + static_cast<double>(k) * w);
      CHECK(col[k] < box.lower(j) + static_cast<double>(k + 1) * w);
    }
  }
}

TEST_CASE("latin hypercube is deterministic per seed", "[sampling]") {
  const DomainBox box({0.0, 0.0}, {1.0, 1.0});
  CHECK(latin_hypercube(5, box, 40) == latin_hypercube(5, box, 40));
  CHECK(latin_hypercube(5, box, 40) != latin_hypercube(6, box, 40));
}

TEST_CASE("latin hypercube with one point stays inside", "[sampling]") {
  const DomainBox box({1.0, 2.0}, {3.0, 5.0});
  const Points p = latin_hypercube(1, box, 1);
  REQUIRE(p.rows() == 1);
  CHECK(box.contains(p.row(0).transpose()));
  CHECK_THROWS_AS(latin_hypercube(1, box, 0), InvalidArgument);
}

TEST_CASE("facet points pin one coordinate to the bound exactly", "[sampling]") {
  const DomainBox box({0.3, 0.0}, {2.0, 1.7});
  const FacetSet lower = facet_points(box, 0, Side::lower, {4});
  REQUIRE(lower.points.rows() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(lower.points(i, 0) == 0.3);
  const FacetSet upper = facet_points(box, 1, Side::upper, {5});
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(upper.points(i, 1) == 1.7);
  CHECK(upper.id == FacetId{1, Side::upper});
  CHECK_THROWS_AS(facet_points(box, 2, Side::lower, {4}), InvalidArgument);
}

TEST_CASE("every sampler stays in the closed domain", "[sampling]") {
  const DomainBox box({0.0, 0.0, 0.0, -0.05}, {2.0, 3.0, 1.5, 0.2});
  auto inside = [&](const Points& p) {
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      if (!box.contains(p.row(i).transpose())) return false;
    return true;
  };
  CHECK(inside(tensor_grid(box, {3, 4, 2, 5})));
  CHECK(inside(latin_hypercube(3, box, 500)));
  for (std::size_t axis = 0; axis < 4; ++axis) {
    CHECK(inside(facet_points(box, axis, Side::lower, {3, 3, 3}).points));
    CHECK(inside(facet_points(box, axis, Side::upper, {3, 3, 3}).points));
  }
}
