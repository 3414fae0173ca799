#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <utility>

#include "preddiff/model.hpp"
#include "preddiff/random.hpp"

namespace preddiff {

enum class Gate { logical_or, logical_and, logical_xor };

[[nodiscard]] inline Gate parse_gate(std::string_view name) {
  if (name == "or") return Gate::logical_or;
  if (name == "and") return Gate::logical_and;
  if (name == "xor") return Gate::logical_xor;
  throw DomainError("unknown gate: " + std::string(name));
}

/// Boolean gate on two binary features; inputs are read as value != 0.
class GateModel final : public Model {
 public:
  explicit GateModel(Gate gate) : Model(TaskKind::regression, 2, 1), gate_(gate) {}

  [[nodiscard]] static double evaluate(Gate gate, double x, double y) {
    const bool a = x != 0.0;
    const bool b = y != 0.0;
    switch (gate) {
      case Gate::logical_or:
        return (a || b) ? 1.0 : 0.0;
      case Gate::logical_and:
        return (a && b) ? 1.0 : 0.0;
      case Gate::logical_xor:
        return (a != b) ? 1.0 : 0.0;
    }
    return 0.0;
  }

 protected:
  RowMatrix do_predict(const RowMatrix& rows) const override {
    RowMatrix out(rows.rows(), 1);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      out(r, 0) = evaluate(gate_, rows(r, 0), rows(r, 1));
    }
    return out;
  }

 private:
  Gate gate_;
};

/// intercept + betas . x
class LinearModel final : public Model {
 public:
  LinearModel(Vector betas, double intercept)
      : Model(TaskKind::regression, static_cast<std::size_t>(betas.size()), 1),
        betas_(std::move(betas)),
        intercept_(intercept) {
    if (betas_.size() == 0) throw DomainError("linear model needs at least one coefficient");
  }

  [[nodiscard]] const Vector& betas() const { return betas_; }
  [[nodiscard]] double intercept() const { return intercept_; }

 protected:
  RowMatrix do_predict(const RowMatrix& rows) const override {
    RowMatrix out(rows.rows(), 1);
    out.col(0) = (rows * betas_).array() + intercept_;
    return out;
  }

 private:
  Vector betas_;
  double intercept_;
};

[[nodiscard]] constexpr double sign_of(double v) {
  return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
}

/// a^2 + 3b + sin(pi c) - d^3 / 2 + 2 sgn(a) |b|, with sgn(0) = 0.
[[nodiscard]] inline double synthetic_target(double a, double b, double c,
                                             double d) {
  return a * a + 3.0 * b + std::sin(std::numbers::pi * c) - d * d * d / 2.0 +
         2.0 * sign_of(a) * std::abs(b);
}

class SyntheticTargetModel final : public Model {
 public:
  SyntheticTargetModel() : Model(TaskKind::regression, 4, 1) {}

 protected:
  RowMatrix do_predict(const RowMatrix& rows) const override {
    RowMatrix out(rows.rows(), 1);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      out(r, 0) = synthetic_target(rows(r, 0), rows(r, 1), rows(r, 2), rows(r, 3));
    }
    return out;
  }
};

/// n rows of four i.i.d. standard-normal features named x_a .. x_d.
[[nodiscard]] inline Dataset generate_synthetic_dataset(std::size_t n,
                                                        std::uint64_t seed) {
  if (n < 1) throw DomainError("synthetic dataset needs n >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix values(static_cast<Eigen::Index>(n), 4);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) values(r, c) = normal(rng);
  }
  return Dataset(std::move(values), {"x_a", "x_b", "x_c", "x_d"});
}

}  // namespace preddiff
