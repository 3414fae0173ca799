#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "preddiff/builtin_models.hpp"
#include "preddiff/interaction.hpp"
#include "preddiff/oracles.hpp"

// End-to-end golden checks: the binary-gate tables (OR, AND, XOR on the
// uniform four-point design) and the linear-model closed form.

namespace preddiff {

/// Test hooks that corrupt engine output so the checks can be seen failing.
enum class ValidationFault { none, sign_flip_joint };

struct GoldenCheck {
  /// e.g. "or/raw-joint/(1,0)"
  std::string cell;
  double expected = 0.0;
  double actual = 0.0;
  double tolerance = 0.0;

  [[nodiscard]] double residual() const { return std::abs(actual - expected); }
  [[nodiscard]] bool passed() const { return residual() <= tolerance; }
};

struct ValidationReport {
  std::vector<GoldenCheck> checks;

  [[nodiscard]] bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed()) return false;
    }
    return true;
  }
  [[nodiscard]] std::vector<GoldenCheck> failures() const {
    std::vector<GoldenCheck> out;
    for (const auto& c : checks) {
      if (!c.passed()) out.push_back(c);
    }
    return out;
  }
};

/// Gate table entries in units of 1/4, samples ordered (0,0), (1,0), (0,1), (1,1).
struct GateTable {
  Gate gate;
  const char* name;
  std::array<double, 4> main_x, main_y, joint;
  std::array<double, 4> shielded_x, shielded_y, shielded_joint;
};

inline constexpr std::array<std::array<double, 2>, 4> kGateSamples{
    {{0, 0}, {1, 0}, {0, 1}, {1, 1}}};

inline const std::array<GateTable, 3>& gate_tables() {
  static const std::array<GateTable, 3> tables{{
      {Gate::logical_or, "or",
       {-2, 2, 0, 0}, {-2, 0, 2, 0}, {1, -1, -1, 1},
       {-1, 1, -1, 1}, {-1, -1, 1, 1}, {-1, 1, 1, -1}},
      {Gate::logical_and, "and",
       {0, 0, -2, 2}, {0, -2, 0, 2}, {-1, 1, 1, -1},
       {-1, 1, -1, 1}, {-1, -1, 1, 1}, {1, -1, -1, 1}},
      {Gate::logical_xor, "xor",
       {-2, 2, 2, -2}, {-2, 2, 2, -2}, {2, -2, -2, 2},
       {0, 0, 0, 0}, {0, 0, 0, 0}, {-2, 2, 2, -2}},
  }};
  return tables;
}

/// The uniform design {(0,0), (0,1), (1,0), (1,1)} with columns x, y.
[[nodiscard]] inline Dataset uniform_binary_dataset() {
  RowMatrix v(4, 2);
  v << 0, 0, 0, 1, 1, 0, 1, 1;
  return Dataset(std::move(v), {"x", "y"});
}

namespace detail {

inline std::string sample_label(const std::array<double, 2>& s) {
  return "(" + std::to_string(static_cast<int>(s[0])) + "," +
         std::to_string(static_cast<int>(s[1])) + ")";
}

}  // namespace detail

/// Raw and shielded effects of every gate at every sample against its table.
inline void check_gate_tables(ValidationReport& report, ValidationFault fault,
                              double tolerance = 1e-12) {
  const Dataset data = uniform_binary_dataset();
  const ExhaustiveImputer imputer(data, MatchMode::exact_match);
  for (const GateTable& table : gate_tables()) {
    const GateModel model(table.gate);
    for (std::size_t s = 0; s < kGateSamples.size(); ++s) {
      Sample x(2);
      x << kGateSamples[s][0], kGateSamples[s][1];
      const InteractionReport r =
          joint_effect(model, Task::regression(), x, FeatureSet{0}, FeatureSet{1}, imputer);
      double joint = r.joint.estimate(0);
      double shielded_joint = r.shielded_joint->estimate(0);
      if (fault == ValidationFault::sign_flip_joint) {
        joint = -joint;
        shielded_joint = -shielded_joint;
      }
      const std::string at = "/" + detail::sample_label(kGateSamples[s]);
      const std::string gate = table.name;
      const auto add = [&](const std::string& term, double expected_quarters, double actual) {
        report.checks.push_back({gate + "/" + term + at, expected_quarters / 4.0, actual, tolerance});
      };
      add("raw-main-x", table.main_x[s], r.main_y.estimate(0));
      add("raw-main-y", table.main_y[s], r.main_z.estimate(0));
      add("raw-joint", table.joint[s], joint);
      add("shielded-main-x", table.shielded_x[s], r.shielded_main_y->estimate(0));
      add("shielded-main-y", table.shielded_y[s], r.shielded_main_z->estimate(0));
      add("shielded-joint", table.shielded_joint[s], shielded_joint);
      add("completeness", 0.0, r.max_residual());
    }
  }
}

/// Deterministic table of `rows` rows with three independently drawn columns.
[[nodiscard]] inline Dataset linear_fixture_dataset(std::size_t rows = 1000,
                                                    std::uint64_t seed = 7) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix v(static_cast<Eigen::Index>(rows), 3);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < 3; ++c) v(r, c) = normal(rng) + static_cast<double>(c);
  }
  return Dataset(std::move(v), {"x0", "x1", "x2"});
}

/// Linear model relevances against beta_j (x_j - mean_j) and exact Shapley
/// values of the interventional value function, at a few rows.
inline void check_linear_closed_form(ValidationReport& report, double tolerance = 1e-10,
                                     std::size_t samples = 5) {
  const Dataset data = linear_fixture_dataset();
  Vector betas(3);
  betas << 2.0, 3.0, -1.0;
  const LinearModel model(betas, 0.5);
  const ExhaustiveImputer imputer(data, MatchMode::marginal);
  const Vector means = data.values().colwise().mean().transpose();
  const std::vector<FeatureSet> sets{FeatureSet{0}, FeatureSet{1}, FeatureSet{2}};
  for (std::size_t i = 0; i < samples; ++i) {
    const Sample x = data.row(i * 97 % data.n_rows());
    const auto rel = relevances(model, Task::regression(), x, sets, imputer);
    const CoalitionTable table = build_value_table(
        model, Task::regression(), x, sets, imputer, ValueKind::regression_interventional);
    for (std::size_t j = 0; j < 3; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double closed = betas(jj) * (x(jj) - means(jj));
      const std::string at = "/row" + std::to_string(i * 97 % data.n_rows()) + "/x" +
                             std::to_string(j);
      report.checks.push_back({"linear/relevance" + at, closed, rel[j].estimate(0), tolerance});
      report.checks.push_back({"linear/shapley" + at, closed, exact_shapley(table, j), tolerance});
    }
  }
}

[[nodiscard]] inline ValidationReport run_golden_checks(
    ValidationFault fault = ValidationFault::none) {
  ValidationReport report;
  check_gate_tables(report, fault);
  check_linear_closed_form(report);
  return report;
}

}  // namespace preddiff
