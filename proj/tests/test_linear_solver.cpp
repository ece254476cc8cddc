#include "pielm/linear_solver.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

using namespace pielm;
using Catch::Approx;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = n(rng);
  return a;
}

LinearSystem single_block(const Matrix& a, const Vector& b, double weight = 1.0) {
  LinearSystem sys(static_cast<std::size_t>(a.cols()));
  sys.append_block(a, b, {BlockKind::pde, {}}, weight);
  return sys;
}

}  // namespace

TEST_CASE("appending a block adds its rows", "[linear_solver]") {
  LinearSystem sys(4);
  sys.append_block(Matrix::Ones(10, 4), Vector::Zero(10), {BlockKind::terminal, {}}, 1.0);
  CHECK(sys.n_rows() == 10);
  sys.append_block(Matrix::Ones(3, 4), Vector::Zero(3), {BlockKind::boundary, "axis0-lower"}, 2.0);
  CHECK(sys.n_rows() == 13);
  const auto tags = sys.row_tags();
  REQUIRE(tags.size() == 13);
  CHECK(tags.front() == "terminal");
  CHECK(tags.back() == "boundary:axis0-lower");
}

TEST_CASE("block weight scales stored rows linearly", "[linear_solver]") {
  const Matrix a = random_matrix(6, 3, 1);
  const Vector b = Vector::LinSpaced(6, 1.0, 6.0);
  const LinearSystem one = single_block(a, b, 1.0);
  const LinearSystem two = single_block(a, b, 2.0);
  CHECK(two.matrix().norm() == Approx(2.0 * one.matrix().norm()).epsilon(1e-14));
  CHECK(two.rhs().norm() == Approx(2.0 * one.rhs().norm()).epsilon(1e-14));
  // Blocks are also normalized by the square root of their row count.
  CHECK(one.matrix().norm() == Approx(a.norm() / std::sqrt(6.0)).epsilon(1e-14));
}

TEST_CASE("mismatched blocks are rejected", "[linear_solver]") {
  LinearSystem sys(3);
  CHECK_THROWS_AS(sys.append_block(Matrix::Ones(4, 3), Vector::Zero(5), {}, 1.0), ShapeMismatch);
  CHECK_THROWS_AS(sys.append_block(Matrix::Ones(4, 2), Vector::Zero(4), {}, 1.0), ShapeMismatch);
  CHECK_THROWS_AS(sys.append_block(Matrix::Ones(4, 3), Vector::Zero(4), {}, 0.0), InvalidArgument);
}

TEST_CASE("consistent system is solved exactly", "[linear_solver]") {
  Matrix a = Matrix::Zero(7, 4);
  a.topRows(4) = Matrix::Identity(4, 4);
  Vector b = Vector::Zero(7);
  b.head(4) << 1.5, -2.0, 0.25, 3.0;
  const SolveReport rep = solve(single_block(a, b), SolveMethod{Pinv{}});
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(rep.coefficients[i] == Approx(b[i]).epsilon(1e-14));
  CHECK(rep.rank_estimate == 4);
}

TEST_CASE("pinv satisfies the normal equations on a random full-rank system", "[linear_solver]") {
  const Matrix a = random_matrix(200, 50, 2);
  const Vector b = random_matrix(200, 1, 3).col(0);
  const SolveReport rep = solve(single_block(a, b), SolverConfig{});
  CHECK_FALSE(rep.fell_back);
  CHECK(rep.rank_estimate == 50);
  CHECK(rep.normal_residual <= 1e-8 * rep.rhs_projection_norm);
  CHECK(satisfies_normal_equations(rep));
}

TEST_CASE("pinv returns the minimum-norm solution of a rank-deficient system", "[linear_solver]") {
  // Columns 0 and 2 are identical. Reference values from an exact rational
  // computation of pinv(A) b.
  Matrix a(6, 3);
  a << 1, 2, 1,
       0, 1, 0,
       3, 1, 3,
       1, 1, 1,
       2, 0, 2,
       1, 3, 1;
  const Vector b = Vector::LinSpaced(6, 1.0, 6.0);
  const SolveReport rep = solve(single_block(a, b), SolveMethod{Pinv{1e-10}});
  CHECK(rep.rank_estimate == 2);
  CHECK(rep.coefficients[0] == Approx(219.0 / 350.0).epsilon(1e-12));
  CHECK(rep.coefficients[1] == Approx(194.0 / 175.0).epsilon(1e-12));
  CHECK(rep.coefficients[2] == Approx(219.0 / 350.0).epsilon(1e-12));
  CHECK(rep.coefficients[0] == Approx(rep.coefficients[2]).epsilon(1e-13));
  CHECK(satisfies_normal_equations(rep));
}

TEST_CASE("ridge coefficients shrink as lambda grows", "[linear_solver]") {
  const Matrix a = random_matrix(60, 20, 4);
  const Vector b = random_matrix(60, 1, 5).col(0);
  const LinearSystem sys = single_block(a, b);
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {1e-8, 1e-4, 1e-2, 1e-1, 1.0, 10.0, 100.0}) {
    const double norm = solve(sys, SolveMethod{Ridge{lambda}}).coefficients.norm();
    INFO("lambda " << lambda);
    CHECK(norm <= previous);
    previous = norm;
  }
}

TEST_CASE("ridge matches the regularized normal equations", "[linear_solver]") {
  const Matrix a = random_matrix(30, 5, 6);
  const Vector b = random_matrix(30, 1, 7).col(0);
  const LinearSystem sys = single_block(a, b);
  const Matrix as = sys.matrix();
  const Vector bs = sys.rhs();
  Matrix normal = as.transpose() * as;
  normal.diagonal().array() += 0.3;
  const Vector expected = normal.ldlt().solve(as.transpose() * bs);
  const SolveReport rep = solve(sys, SolveMethod{Ridge{0.3}});
  CHECK((rep.coefficients - expected).norm() <= 1e-12 * expected.norm());
  CHECK_THROWS_AS(solve(sys, SolveMethod{Ridge{0.0}}), InvalidArgument);
}

TEST_CASE("solve reports are deterministic", "[linear_solver]") {
  const Matrix a = random_matrix(80, 30, 8);
  const Vector b = random_matrix(80, 1, 9).col(0);
  const LinearSystem sys = single_block(a, b);
  const SolveReport r1 = solve(sys, SolverConfig{});
  const SolveReport r2 = solve(sys, SolverConfig{});
  CHECK(r1.coefficients == r2.coefficients);
  CHECK(r1.normal_residual == r2.normal_residual);
  CHECK(r1.rank_estimate == r2.rank_estimate);
  CHECK(r1.condition_estimate == r2.condition_estimate);
}

TEST_CASE("underdetermined and non-finite systems are errors", "[linear_solver]") {
  CHECK_THROWS_AS(solve(single_block(random_matrix(3, 5, 1), Vector::Zero(3)), SolverConfig{}), SolverError);
  CHECK_THROWS_AS(solve(single_block(random_matrix(5, 5, 1), Vector::Zero(5)), SolverConfig{}), SolverError);
  Matrix bad = random_matrix(10, 3, 1);
  bad(2, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve(single_block(bad, Vector::Zero(10)), SolverConfig{}), SolverError);
}

TEST_CASE("ill-conditioned pinv solves fall back to ridge", "[linear_solver]") {
  Matrix a = random_matrix(40, 6, 10);
  // Perturbed along a fresh direction, so the pair is nearly but not exactly dependent.
  a.col(5) = a.col(4) + 1e-9 * random_matrix(40, 1, 12).col(0);
  const Vector b = random_matrix(40, 1, 11).col(0);
  SolverConfig cfg;
  cfg.method = Pinv{1e-14};
  cfg.fallback_condition = 1e6;
  cfg.fallback_lambda = 1e-6;
  const SolveReport rep = solve(single_block(a, b), cfg);
  CHECK(rep.fell_back);
  CHECK(std::holds_alternative<Ridge>(rep.method));
  CHECK(rep.condition_estimate > 1e6);

  cfg.fallback_condition = 1e12;
  cfg.method = Pinv{1e-6};
  const SolveReport truncated = solve(single_block(a, b), cfg);
  CHECK_FALSE(truncated.fell_back);
  CHECK(truncated.rank_estimate == 5);
}
