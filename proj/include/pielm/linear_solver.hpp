#pragma once

#include "pielm/core.hpp"

#include <lapacke.h>

#include <cmath>
#include <limits>
#include <string>
#include <variant>

namespace pielm {

enum class BlockKind { pde, terminal, boundary };

struct BlockTag {
  BlockKind kind = BlockKind::pde;
  std::string facet;  // empty unless kind == boundary

  std::string label() const {
    switch (kind) {
      case BlockKind::pde: return "pde";
      case BlockKind::terminal: return "terminal";
      case BlockKind::boundary: return "boundary:" + facet;
    }
    return "unknown";
  }
};

/// Stacked residual rows A c = b. Each appended block is scaled by
/// weight / sqrt(rows in block), so collocation density does not reweight
/// the least-squares objective.
class LinearSystem {
 public:
  struct Block {
    Matrix rows;
    Vector rhs;
    BlockTag tag;
    double weight;
  };

  explicit LinearSystem(std::size_t n_cols) : n_cols_(n_cols) {
    require(n_cols >= 1, "linear system needs at least one unknown");
  }

  LinearSystem& append_block(Matrix rows, Vector rhs, BlockTag tag, double weight) {
    require<ShapeMismatch>(static_cast<std::size_t>(rows.cols()) == n_cols_,
                           "block has " + std::to_string(rows.cols()) + " columns, system has " +
                               std::to_string(n_cols_));
    require<ShapeMismatch>(rows.rows() == rhs.size(),
                           "block rhs length " + std::to_string(rhs.size()) +
                               " does not match row count " + std::to_string(rows.rows()));
    require(weight > 0.0 && std::isfinite(weight), "block weight must be positive");
    require(rows.rows() > 0, "empty block");
    const double scale = weight / std::sqrt(static_cast<double>(rows.rows()));
    rows *= scale;
    rhs *= scale;
    n_rows_ += static_cast<std::size_t>(rows.rows());
    blocks_.push_back({std::move(rows), std::move(rhs), std::move(tag), weight});
    return *this;
  }

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  /// Per-row tag labels, in stacking order.
  std::vector<std::string> row_tags() const {
    std::vector<std::string> tags;
    tags.reserve(n_rows_);
    for (const auto& b : blocks_) tags.insert(tags.end(), static_cast<std::size_t>(b.rows.rows()), b.tag.label());
    return tags;
  }

  Matrix matrix() const {
    Matrix a(static_cast<Eigen::Index>(n_rows_), static_cast<Eigen::Index>(n_cols_));
    Eigen::Index r = 0;
    for (const auto& b : blocks_) {
      a.middleRows(r, b.rows.rows()) = b.rows;
      r += b.rows.rows();
    }
    return a;
  }

  Vector rhs() const {
    Vector v(static_cast<Eigen::Index>(n_rows_));
    Eigen::Index r = 0;
    for (const auto& b : blocks_) {
      v.segment(r, b.rhs.size()) = b.rhs;
      r += b.rhs.size();
    }
    return v;
  }

 private:
  std::size_t n_cols_;
  std::size_t n_rows_ = 0;
  std::vector<Block> blocks_;
};

/// Truncated-SVD pseudoinverse; singular values below tol * sigma_max are dropped.
struct Pinv {
  double tol = 1e-10;
};

/// Tikhonov-regularized normal equations (A^T A + lambda I) c = A^T b.
struct Ridge {
  double lambda = 1e-8;
};

using SolveMethod = std::variant<Pinv, Ridge>;

inline std::string to_string(const SolveMethod& m) {
  if (const auto* p = std::get_if<Pinv>(&m)) return "pinv(tol=" + std::to_string(p->tol) + ")";
  return "ridge(lambda=" + std::to_string(std::get<Ridge>(m).lambda) + ")";
}

struct SolverConfig {
  SolveMethod method = Pinv{};
  // Ridge parameters used when a pinv solve is ill-conditioned beyond
  // `fallback_condition` or produces non-finite coefficients.
  double fallback_lambda = 1e-8;
  double fallback_condition = 1e12;
};

struct SolveReport {
  Vector coefficients;
  double normal_residual = 0.0;      // ||A^T (A c - b)||_inf on the weighted system
  double rhs_projection_norm = 0.0;  // ||A^T b||_inf
  std::size_t rank_estimate = 0;
  double condition_estimate = 0.0;   // sigma_max / smallest retained sigma (pinv only)
  SolveMethod method;
  bool fell_back = false;
};

namespace detail {

inline void check_solvable(const Matrix& a, const Vector& b) {
  require<SolverError>(a.rows() > a.cols(),
                       "system is not overdetermined: " + std::to_string(a.rows()) + " rows for " +
                           std::to_string(a.cols()) + " unknowns");
  require<SolverError>(a.allFinite() && b.allFinite(), "system contains non-finite entries");
}

inline void finish_report(SolveReport& report, const Matrix& a, const Vector& b) {
  const Vector residual = a * report.coefficients - b;
  report.normal_residual = (a.transpose() * residual).cwiseAbs().maxCoeff();
  report.rhs_projection_norm = (a.transpose() * b).cwiseAbs().maxCoeff();
}

inline SolveReport solve_pinv(const Matrix& a, const Vector& b, double tol) {
  require(tol >= 0.0, "pinv tolerance must be non-negative");
  const auto m = static_cast<lapack_int>(a.rows());
  const auto n = static_cast<lapack_int>(a.cols());
  Matrix work = a;
  Vector rhs = b;
  Vector sv(n);
  lapack_int rank = 0;
  const lapack_int info = LAPACKE_dgelsd(LAPACK_COL_MAJOR, m, n, 1, work.data(), m, rhs.data(), m,
                                         sv.data(), tol, &rank);
  require<SolverError>(info == 0, "SVD least-squares solve failed (info=" + std::to_string(info) + ")");
  SolveReport report;
  report.coefficients = rhs.head(n);
  report.rank_estimate = static_cast<std::size_t>(rank);
  report.condition_estimate =
      rank > 0 ? sv[0] / sv[rank - 1] : std::numeric_limits<double>::infinity();
  report.method = Pinv{tol};
  return report;
}

inline SolveReport solve_ridge(const Matrix& a, const Vector& b, double lambda) {
  require(lambda > 0.0, "ridge lambda must be positive");
  Matrix normal = a.transpose() * a;
  normal.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(normal);
  require<SolverError>(llt.info() == Eigen::Success, "ridge normal matrix is not positive definite");
  SolveReport report;
  report.coefficients = llt.solve(a.transpose() * b);
  report.rank_estimate = static_cast<std::size_t>(a.cols());
  report.condition_estimate = std::numeric_limits<double>::quiet_NaN();
  report.method = Ridge{lambda};
  return report;
}

}  // namespace detail

/// Solves with exactly the requested method.
inline SolveReport solve(const LinearSystem& system, const SolveMethod& method) {
  const Matrix a = system.matrix();
  const Vector b = system.rhs();
  detail::check_solvable(a, b);
  SolveReport report = std::holds_alternative<Pinv>(method)
                           ? detail::solve_pinv(a, b, std::get<Pinv>(method).tol)
                           : detail::solve_ridge(a, b, std::get<Ridge>(method).lambda);
  require<SolverError>(report.coefficients.allFinite(), "solve produced non-finite coefficients");
  detail::finish_report(report, a, b);
  return report;
}

/// Solves per config, falling back from pinv to ridge on severe ill-conditioning.
inline SolveReport solve(const LinearSystem& system, const SolverConfig& config) {
  const Matrix a = system.matrix();
  const Vector b = system.rhs();
  detail::check_solvable(a, b);
  SolveReport report;
  if (const auto* p = std::get_if<Pinv>(&config.method)) {
    report = detail::solve_pinv(a, b, p->tol);
    if (!report.coefficients.allFinite() || report.condition_estimate > config.fallback_condition) {
      const double cond = report.condition_estimate;
      report = detail::solve_ridge(a, b, config.fallback_lambda);
      report.condition_estimate = cond;
      report.fell_back = true;
    }
  } else {
    report = detail::solve_ridge(a, b, std::get<Ridge>(config.method).lambda);
  }
  require<SolverError>(report.coefficients.allFinite(), "solve produced non-finite coefficients");
  detail::finish_report(report, a, b);
  return report;
}

/// The optimality bound every pinv solve is held to.
inline bool satisfies_normal_equations(const SolveReport& report, double rel_tol = 1e-8) {
  return report.normal_residual <= rel_tol * (1.0 + report.rhs_projection_norm);
}

}  // namespace pielm
