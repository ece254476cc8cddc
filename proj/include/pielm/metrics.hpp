#pragma once

#include "pielm/core.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <type_traits>
#include <utility>

namespace pielm {

struct MetricsReport {
  double mse = 0.0;
  double rel_l2 = 0.0;
  double max_abs_error = 0.0;
  double wall_time_seconds = 0.0;
  std::size_t n_eval_points = 0;
  std::string config_echo;  // JSON text of the configuration that produced it
};

inline double mse(const Eigen::Ref<const Vector>& predicted, const Eigen::Ref<const Vector>& reference) {
  require<ShapeMismatch>(predicted.size() == reference.size(), "mse: length mismatch");
  require(predicted.size() > 0, "mse: empty input");
  return (predicted - reference).squaredNorm() / static_cast<double>(predicted.size());
}

inline double rel_l2(const Eigen::Ref<const Vector>& predicted, const Eigen::Ref<const Vector>& reference) {
  require<ShapeMismatch>(predicted.size() == reference.size(), "rel_l2: length mismatch");
  const double ref_norm = reference.norm();
  require(ref_norm > 0.0, "rel_l2: reference has zero norm");
  return (predicted - reference).norm() / ref_norm;
}

inline double max_abs_error(const Eigen::Ref<const Vector>& predicted,
                            const Eigen::Ref<const Vector>& reference) {
  require<ShapeMismatch>(predicted.size() == reference.size(), "max_abs_error: length mismatch");
  require(predicted.size() > 0, "max_abs_error: empty input");
  return (predicted - reference).cwiseAbs().maxCoeff();
}

inline MetricsReport compare(const Eigen::Ref<const Vector>& predicted,
                             const Eigen::Ref<const Vector>& reference) {
  MetricsReport r;
  r.mse = mse(predicted, reference);
  r.rel_l2 = rel_l2(predicted, reference);
  r.max_abs_error = max_abs_error(predicted, reference);
  r.n_eval_points = static_cast<std::size_t>(predicted.size());
  return r;
}

template <typename T>
struct Timed {
  T result;
  double seconds;
};

template <>
struct Timed<void> {
  double seconds;
};

/// Runs `fn` and measures wall time on the monotonic clock.
template <typename Fn>
auto timed(Fn&& fn) {
  using R = std::invoke_result_t<Fn>;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  if constexpr (std::is_void_v<R>) {
    std::invoke(std::forward<Fn>(fn));
    return Timed<void>{elapsed()};
  } else {
    R result = std::invoke(std::forward<Fn>(fn));
    const double s = elapsed();
    return Timed<R>{std::move(result), s};
  }
}

}  // namespace pielm
