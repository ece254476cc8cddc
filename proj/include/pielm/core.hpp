#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pielm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One point per row.
using Points = Eigen::MatrixXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct InvalidDomain : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct SolverError : Error {
  using Error::Error;
};

struct CorrelationError : Error {
  using Error::Error;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

template <typename E = InvalidArgument>
inline void require(bool condition, const std::string& message) {
  if (!condition) throw E(message);
}

/// Axis-aligned box [lower, upper] in physical coordinates.
class DomainBox {
 public:
  DomainBox(std::vector<double> lower, std::vector<double> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    require<InvalidDomain>(!lower_.empty(), "domain must have at least one axis");
    require<InvalidDomain>(lower_.size() == upper_.size(),
                           "domain bounds have different dimensions");
    for (std::size_t j = 0; j < lower_.size(); ++j) {
      require<InvalidDomain>(upper_[j] > lower_[j],
                             "domain axis " + std::to_string(j) + " has non-positive width");
    }
  }

  std::size_t dim() const { return lower_.size(); }
  double lower(std::size_t axis) const { return lower_.at(axis); }
  double upper(std::size_t axis) const { return upper_.at(axis); }
  double width(std::size_t axis) const { return upper_.at(axis) - lower_.at(axis); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }

  bool contains(const Eigen::Ref<const Vector>& x, double slack = 0.0) const {
    if (static_cast<std::size_t>(x.size()) != dim()) return false;
    for (std::size_t j = 0; j < dim(); ++j) {
      if (x[j] < lower_[j] - slack || x[j] > upper_[j] + slack) return false;
    }
    return true;
  }

  friend bool operator==(const DomainBox&, const DomainBox&) = default;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

inline Points points_from(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = n == 0 ? 0 : static_cast<Eigen::Index>(rows.begin()->size());
  Points p(n, d);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    require<ShapeMismatch>(static_cast<Eigen::Index>(row.size()) == d, "ragged point list");
    Eigen::Index j = 0;
    for (double v : row) p(i, j++) = v;
    ++i;
  }
  return p;
}

}  // namespace pielm
