#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "preddiff/error.hpp"

namespace preddiff {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One instance: a full feature vector in dataset column order.
using Sample = Eigen::VectorXd;

/// Ordered, duplicate-free group of column indices explained as one unit.
class FeatureSet {
 public:
  FeatureSet() = default;

  explicit FeatureSet(std::vector<std::size_t> indices)
      : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    if (std::adjacent_find(indices_.begin(), indices_.end()) !=
        indices_.end()) {
      throw DomainError("feature set contains a duplicate column index");
    }
    if (indices_.empty()) throw DomainError("feature set must not be empty");
  }

  FeatureSet(std::initializer_list<std::size_t> indices)
      : FeatureSet(std::vector<std::size_t>(indices)) {}

  [[nodiscard]] std::span<const std::size_t> indices() const {
    return indices_;
  }
  [[nodiscard]] std::size_t size() const { return indices_.size(); }
  [[nodiscard]] bool empty() const { return indices_.empty(); }
  [[nodiscard]] std::size_t operator[](std::size_t i) const {
    return indices_[i];
  }

  [[nodiscard]] bool contains(std::size_t column) const {
    return std::binary_search(indices_.begin(), indices_.end(), column);
  }

  [[nodiscard]] std::size_t max_index() const { return indices_.back(); }

  /// Throws SchemaError if any index is outside [0, width).
  void check_width(std::size_t width) const {
    if (empty()) throw DomainError("feature set must not be empty");
    if (max_index() >= width) {
      throw SchemaError("feature set references column " +
                        std::to_string(max_index()) + " but rows have width " +
                        std::to_string(width));
    }
  }

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;

 private:
  std::vector<std::size_t> indices_;
};

[[nodiscard]] inline bool disjoint(const FeatureSet& a, const FeatureSet& b) {
  auto ia = a.indices();
  auto ib = b.indices();
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ia.size() && j < ib.size()) {
    if (ia[i] == ib[j]) return false;
    if (ia[i] < ib[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return true;
}

[[nodiscard]] inline FeatureSet set_union(std::span<const FeatureSet> sets) {
  std::vector<std::size_t> all;
  for (const auto& s : sets) {
    all.insert(all.end(), s.indices().begin(), s.indices().end());
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return FeatureSet(std::move(all));
}

[[nodiscard]] inline FeatureSet set_union(const FeatureSet& a,
                                          const FeatureSet& b) {
  const FeatureSet both[] = {a, b};
  return set_union(both);
}

/// Throws DomainError unless every pair in `sets` is disjoint.
inline void require_pairwise_disjoint(std::span<const FeatureSet> sets) {
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      if (!disjoint(sets[i], sets[j])) {
        throw DomainError("feature sets " + std::to_string(i) + " and " +
                          std::to_string(j) + " overlap");
      }
    }
  }
}

/// Complement of `set` within [0, width).
[[nodiscard]] inline std::vector<std::size_t> complement(
    const FeatureSet& set, std::size_t width) {
  std::vector<std::size_t> rest;
  rest.reserve(width);
  for (std::size_t c = 0; c < width; ++c) {
    if (!set.contains(c)) rest.push_back(c);
  }
  return rest;
}

/// Rectangular table of finite feature vectors with named columns.
class Dataset {
 public:
  Dataset() = default;

  Dataset(RowMatrix values, std::vector<std::string> column_names)
      : values_(std::move(values)), names_(std::move(column_names)) {
    if (static_cast<std::size_t>(values_.cols()) != names_.size()) {
      throw SchemaError("dataset has " + std::to_string(values_.cols()) +
                        " columns but " + std::to_string(names_.size()) +
                        " column names");
    }
    if (!values_.allFinite()) {
      throw SchemaError("dataset contains non-finite values");
    }
  }

  /// Columns named x0, x1, ...
  explicit Dataset(RowMatrix values)
      : Dataset(values, default_names(static_cast<std::size_t>(values.cols()))) {}

  [[nodiscard]] std::size_t n_rows() const {
    return static_cast<std::size_t>(values_.rows());
  }
  [[nodiscard]] std::size_t n_cols() const {
    return static_cast<std::size_t>(values_.cols());
  }
  [[nodiscard]] const RowMatrix& values() const { return values_; }
  [[nodiscard]] const std::vector<std::string>& column_names() const {
    return names_;
  }

  [[nodiscard]] Sample row(std::size_t i) const {
    return values_.row(static_cast<Eigen::Index>(i)).transpose();
  }

  /// Index of the column called `name`; throws SchemaError if absent.
  [[nodiscard]] std::size_t column_index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw SchemaError("unknown column: " + name);
    return static_cast<std::size_t>(it - names_.begin());
  }

  static std::vector<std::string> default_names(std::size_t n) {
    std::vector<std::string> names;
    names.reserve(n);
    for (std::size_t i = 0; i < n; ++i) names.push_back("x" + std::to_string(i));
    return names;
  }

 private:
  RowMatrix values_;
  std::vector<std::string> names_;
};

/// Copy of `sample` with the columns of `set` overwritten by `block`.
[[nodiscard]] inline Sample with_block(const Sample& sample,
                                       const FeatureSet& set,
                                       const Eigen::Ref<const Vector>& block) {
  Sample out = sample;
  for (std::size_t k = 0; k < set.size(); ++k) {
    out(static_cast<Eigen::Index>(set[k])) = block(static_cast<Eigen::Index>(k));
  }
  return out;
}

/// Extracts the columns of `set` from `sample`.
[[nodiscard]] inline Vector gather(const Sample& sample, const FeatureSet& set) {
  Vector out(static_cast<Eigen::Index>(set.size()));
  for (std::size_t k = 0; k < set.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) =
        sample(static_cast<Eigen::Index>(set[k]));
  }
  return out;
}

/// Position of each column of `inner` inside `outer` (inner must be a subset).
[[nodiscard]] inline std::vector<std::size_t> positions_within(
    const FeatureSet& inner, const FeatureSet& outer) {
  std::vector<std::size_t> pos;
  pos.reserve(inner.size());
  auto o = outer.indices();
  for (std::size_t c : inner.indices()) {
    auto it = std::lower_bound(o.begin(), o.end(), c);
    if (it == o.end() || *it != c) {
      throw DomainError("column " + std::to_string(c) +
                        " is not part of the enclosing feature set");
    }
    pos.push_back(static_cast<std::size_t>(it - o.begin()));
  }
  return pos;
}

/// Shortest decimal text that parses back to exactly `value`.
[[nodiscard]] inline std::string format_number(double value) {
  std::array<char, 32> buf{};
  const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), result.ptr);
}

}  // namespace preddiff
