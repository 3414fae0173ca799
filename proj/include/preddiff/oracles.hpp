#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "preddiff/relevance.hpp"

// Brute-force references over all 2^N coalitions of N feature sets.
// Coalitions are bit masks: bit i set means set i is kept at its sample value.

namespace preddiff {

inline constexpr std::size_t kMaxOracleSets = 15;

inline void check_oracle_size(std::size_t n_sets) {
  if (n_sets == 0) throw DomainError("need at least one feature set");
  if (n_sets > kMaxOracleSets) {
    throw CostGuardError("exhaustive coalition enumeration is limited to " +
                         std::to_string(kMaxOracleSets) + " feature sets, got " +
                         std::to_string(n_sets));
  }
}

using Coalition = std::uint32_t;

/// v(S) for every subset S of N players.
class CoalitionTable {
 public:
  CoalitionTable(std::size_t n_players, std::vector<double> values)
      : n_(n_players), values_(std::move(values)) {
    check_oracle_size(n_);
    if (values_.size() != (std::size_t{1} << n_)) {
      throw DomainError("coalition table needs 2^N entries");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw NumericalError("coalition value is not finite");
    }
  }

  template <class Fn>
  static CoalitionTable from_function(std::size_t n_players, Fn&& value) {
    check_oracle_size(n_players);
    std::vector<double> values(std::size_t{1} << n_players);
    for (Coalition s = 0; s < values.size(); ++s) values[s] = value(s);
    return CoalitionTable(n_players, std::move(values));
  }

  [[nodiscard]] std::size_t n_players() const { return n_; }
  [[nodiscard]] Coalition full() const {
    return static_cast<Coalition>((std::size_t{1} << n_) - 1);
  }
  [[nodiscard]] double operator()(Coalition s) const { return values_.at(s); }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

/// Exact ratio of two factorial products (fits 64 bits for N <= 15).
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  [[nodiscard]] double value() const {
    return static_cast<double>(num) / static_cast<double>(den);
  }
};

namespace detail {

inline std::uint64_t factorial(std::size_t n) {
  std::uint64_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

inline Rational reduced(std::uint64_t num, std::uint64_t den) {
  const std::uint64_t g = std::gcd(num, den);
  return {num / g, den / g};
}

}  // namespace detail

/// |S|! (N - |S| - 1)! / N!
[[nodiscard]] inline Rational shapley_weight(std::size_t coalition_size,
                                             std::size_t n_players) {
  return detail::reduced(
      detail::factorial(coalition_size) *
          detail::factorial(n_players - coalition_size - 1),
      detail::factorial(n_players));
}

/// |S|! (N - |S| - 2)! / (2 (N - 1)!)
[[nodiscard]] inline Rational interaction_weight(std::size_t coalition_size,
                                                 std::size_t n_players) {
  return detail::reduced(
      detail::factorial(coalition_size) *
          detail::factorial(n_players - coalition_size - 2),
      2 * detail::factorial(n_players - 1));
}

/// Shapley value of player j.
[[nodiscard]] inline double exact_shapley(const CoalitionTable& table,
                                          std::size_t j) {
  const std::size_t n = table.n_players();
  if (j >= n) throw DomainError("player index out of range");
  const Coalition bit = Coalition{1} << j;
  double phi = 0.0;
  for (Coalition s = 0; s <= table.full(); ++s) {
    if (s & bit) continue;
    const auto size = static_cast<std::size_t>(std::popcount(s));
    phi += shapley_weight(size, n).value() * (table(s | bit) - table(s));
  }
  return phi;
}

/// v(S u {i,j}) - v(S u {i}) - v(S u {j}) + v(S)
[[nodiscard]] inline double discrete_second_derivative(const CoalitionTable& table,
                                                       std::size_t i, std::size_t j,
                                                       Coalition s) {
  const Coalition bi = Coalition{1} << i;
  const Coalition bj = Coalition{1} << j;
  return table(s | bi | bj) - table(s | bi) - table(s | bj) + table(s);
}

/// Shapley interaction index of players i != j.
[[nodiscard]] inline double shapley_interaction_index(const CoalitionTable& table,
                                                      std::size_t i, std::size_t j) {
  const std::size_t n = table.n_players();
  if (i == j) throw DomainError("interaction index needs two distinct players");
  if (i >= n || j >= n) throw DomainError("player index out of range");
  const Coalition pair = (Coalition{1} << i) | (Coalition{1} << j);
  double total = 0.0;
  for (Coalition s = 0; s <= table.full(); ++s) {
    if (s & pair) continue;
    const auto size = static_cast<std::size_t>(std::popcount(s));
    total += interaction_weight(size, n).value() *
             discrete_second_derivative(table, i, j, s);
  }
  return total;
}

/// Mobius inversion over the subset lattice:
/// out[V] = sum over W subset of V of (-1)^(|V|-|W|) values[W].
template <class T>
[[nodiscard]] std::vector<T> mobius_inversion(std::vector<T> values) {
  const std::size_t size = values.size();
  if (size == 0 || (size & (size - 1)) != 0) {
    throw DomainError("subset table length must be a power of two");
  }
  for (std::size_t bit = 1; bit < size; bit <<= 1) {
    for (std::size_t v = 0; v < size; ++v) {
      if (v & bit) values[v] = values[v] - values[v ^ bit];
    }
  }
  return values;
}

/// Anchored decomposition of `f` at `query` with sets frozen at `anchor`.
///
/// Entry V holds f^V(query) = sum_{W subset V} (-1)^{|V|-|W|} f(query on W,
/// anchor elsewhere). Entries sum to f(query); any component whose set is at
/// its anchor value vanishes.
template <class Fn>
[[nodiscard]] std::vector<double> anchored_decomposition(
    Fn&& f, std::span<const FeatureSet> sets, const Sample& anchor,
    const Sample& query) {
  check_oracle_size(sets.size());
  require_pairwise_disjoint(sets);
  if (anchor.size() != query.size()) {
    throw SchemaError("anchor and query differ in width");
  }
  for (const auto& s : sets) s.check_width(static_cast<std::size_t>(anchor.size()));
  std::vector<double> values(std::size_t{1} << sets.size());
  for (Coalition w = 0; w < values.size(); ++w) {
    Sample point = anchor;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      if (!(w & (Coalition{1} << i))) continue;
      for (std::size_t c : sets[i].indices()) {
        point(static_cast<Eigen::Index>(c)) = query(static_cast<Eigen::Index>(c));
      }
    }
    values[w] = f(point);
  }
  return mobius_inversion(std::move(values));
}

enum class ValueKind {
  regression_observational,
  regression_interventional,
  classification_log,
};

namespace detail {

inline FeatureSet occluded_complement(std::span<const FeatureSet> partition,
                                      Coalition kept) {
  std::vector<FeatureSet> out;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    if (!(kept & (Coalition{1} << i))) out.push_back(partition[i]);
  }
  return set_union(out);
}

}  // namespace detail

/// One coalition table per model output.
///
/// v(S) occludes every set outside S and takes the m-value; the classification
/// kind applies log2 with the task's Laplace setting. v(full) is f(x) itself.
/// Coalition S draws its imputations with derive_seed(seed, S).
[[nodiscard]] inline std::vector<CoalitionTable> build_value_tables(
    const Model& model, const Task& task, const Sample& sample,
    std::span<const FeatureSet> partition, const Imputer& imputer, ValueKind kind,
    const EstimatorOptions& opts = {}) {
  check_oracle_size(partition.size());
  require_pairwise_disjoint(partition);
  detail::check_model_task(model, task);
  detail::check_sample(model, sample);
  if ((kind == ValueKind::classification_log) != task.is_classification()) {
    throw DomainError("value function kind does not match the task");
  }
  for (const auto& s : partition) s.check_width(model.n_features());

  const std::size_t n_out = model.n_outputs();
  const std::size_t size = std::size_t{1} << partition.size();
  std::vector<std::vector<double>> values(n_out, std::vector<double>(size));
  const Coalition full = static_cast<Coalition>(size - 1);
  for (Coalition s = 0; s < size; ++s) {
    Vector m;
    if (s == full) {
      m = model.predict_one(sample);
    } else {
      const FeatureSet occluded = detail::occluded_complement(partition, s);
      const ImputationBatch batch = imputer.sample(
          occluded, sample, opts.n_imputations, derive_seed(opts.seed, s));
      m = m_value(model, sample, occluded, batch);
    }
    for (std::size_t k = 0; k < n_out; ++k) {
      const double mk = m(static_cast<Eigen::Index>(k));
      values[k][s] = kind == ValueKind::classification_log
                         ? detail::log2_probability(mk, task)
                         : mk;
    }
  }
  std::vector<CoalitionTable> tables;
  tables.reserve(n_out);
  for (auto& v : values) tables.emplace_back(partition.size(), std::move(v));
  return tables;
}

[[nodiscard]] inline CoalitionTable build_value_table(
    const Model& model, const Task& task, const Sample& sample,
    std::span<const FeatureSet> partition, const Imputer& imputer, ValueKind kind,
    std::size_t output = 0, const EstimatorOptions& opts = {}) {
  if (output >= model.n_outputs()) throw DomainError("output index out of range");
  return build_value_tables(model, task, sample, partition, imputer, kind, opts)
      .at(output);
}

/// Value table over the empirical distribution of `data`: interventional
/// kinds enumerate marginally, observational ones by exact-match
/// conditioning. The classification kind uses exact-match conditioning.
[[nodiscard]] inline CoalitionTable build_value_table(
    const Model& model, const Task& task, const Sample& sample,
    std::span<const FeatureSet> partition, const Dataset& data, ValueKind kind,
    std::size_t output = 0) {
  const MatchMode mode = kind == ValueKind::regression_interventional
                             ? MatchMode::marginal
                             : MatchMode::exact_match;
  const ExhaustiveImputer imputer(data, mode);
  return build_value_table(model, task, sample, partition, imputer, kind, output);
}

}  // namespace preddiff
