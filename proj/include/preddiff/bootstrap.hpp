#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "preddiff/core.hpp"
#include "preddiff/random.hpp"

namespace preddiff {

namespace detail {

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("confidence level must lie in (0, 1)");
  }
}

}  // namespace detail

/// Percentile bootstrap over imputation rows.
///
/// Each replicate resamples the rows of `per_imputation` (uniformly, or in
/// proportion to `weights` when given), takes their column means and maps
/// them through `statistic`. Returns per-component (low, high) bounds.
template <class Statistic>
[[nodiscard]] std::pair<Vector, Vector> bootstrap_percentile(
    const RowMatrix& per_imputation, const std::optional<Vector>& weights,
    std::size_t n_boot, double level, std::uint64_t seed, Statistic&& statistic) {
  detail::check_level(level);
  const auto n = static_cast<std::size_t>(per_imputation.rows());
  if (n < 2) throw DomainError("bootstrap needs at least two values");
  if (n_boot < 1) throw DomainError("bootstrap needs at least one replicate");

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> uniform(0, n - 1);
  std::discrete_distribution<std::size_t> by_weight;
  if (weights) by_weight = std::discrete_distribution<std::size_t>(
      weights->data(), weights->data() + weights->size());

  Vector counts(static_cast<Eigen::Index>(n));
  std::vector<Vector> replicates;
  replicates.reserve(n_boot);
  for (std::size_t b = 0; b < n_boot; ++b) {
    counts.setZero();
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t idx = weights ? by_weight(rng) : uniform(rng);
      counts(static_cast<Eigen::Index>(idx)) += 1.0;
    }
    const Vector means =
        (counts.transpose() * per_imputation).transpose() / static_cast<double>(n);
    replicates.push_back(statistic(means));
  }

  const Eigen::Index dim = replicates.front().size();
  Vector low(dim);
  Vector high(dim);
  std::vector<double> column(n_boot);
  for (Eigen::Index k = 0; k < dim; ++k) {
    for (std::size_t b = 0; b < n_boot; ++b) column[b] = replicates[b](k);
    std::sort(column.begin(), column.end());
    low(k) = detail::sorted_quantile(column, (1.0 - level) / 2.0);
    high(k) = detail::sorted_quantile(column, (1.0 + level) / 2.0);
  }
  return {low, high};
}

/// Percentile bootstrap interval for the mean of `values`.
[[nodiscard]] inline std::pair<double, double> bootstrap_ci(
    std::span<const double> values, std::size_t n_boot, double level,
    std::uint64_t seed) {
  if (values.size() < 2) throw DomainError("bootstrap needs at least two values");
  RowMatrix column(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    column(static_cast<Eigen::Index>(i), 0) = values[i];
  }
  auto [low, high] = bootstrap_percentile(column, std::nullopt, n_boot, level,
                                          seed, [](const Vector& m) { return m; });
  return {low(0), high(0)};
}

}  // namespace preddiff
