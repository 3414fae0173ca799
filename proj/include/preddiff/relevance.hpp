#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "preddiff/bootstrap.hpp"
#include "preddiff/imputers.hpp"
#include "preddiff/model.hpp"
#include "preddiff/random.hpp"

namespace preddiff {

/// Knobs shared by every estimator.
struct EstimatorOptions {
  /// Imputations per m-value; ignored by exact imputers.
  std::size_t n_imputations = 200;
  std::uint64_t seed = 0;
  /// Bootstrap replicates; 0 disables intervals.
  std::size_t bootstrap = 0;
  double level = 0.95;
};

enum class EffectKind {
  relevance,
  main,
  joint,
  shielded_main,
  shielded_joint,
  pair,
  triple,
  shielded_pair,
};

[[nodiscard]] inline std::string_view to_string(EffectKind kind) {
  switch (kind) {
    case EffectKind::relevance:
      return "relevance";
    case EffectKind::main:
      return "main";
    case EffectKind::joint:
      return "joint";
    case EffectKind::shielded_main:
      return "shielded-main";
    case EffectKind::shielded_joint:
      return "shielded-joint";
    case EffectKind::pair:
      return "pair";
    case EffectKind::triple:
      return "triple";
    case EffectKind::shielded_pair:
      return "shielded-pair";
  }
  return "unknown";
}

/// Point estimate (one entry per model output) with optional bootstrap bounds.
struct EffectReport {
  EffectKind kind = EffectKind::relevance;
  Vector estimate;
  Vector ci_low;
  Vector ci_high;
  std::size_t n_imputations = 0;
  /// Model rows spent on the computation that produced this term.
  std::uint64_t model_calls = 0;

  [[nodiscard]] bool has_interval() const { return ci_low.size() > 0; }
};

/// p -> (pN + 1) / (N + K)
[[nodiscard]] inline double laplace_correct(double p, std::size_t n_train,
                                            std::size_t n_classes) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability outside [0, 1]");
  if (n_train < 1) throw DomainError("Laplace correction needs N >= 1");
  if (n_classes < 2) throw DomainError("Laplace correction needs K >= 2");
  const double n = static_cast<double>(n_train);
  return (p * n + 1.0) / (n + static_cast<double>(n_classes));
}

namespace detail {

/// Rows equal to `sample` with the occluded columns replaced by each block.
inline RowMatrix imputed_rows(const Sample& sample, const FeatureSet& occluded,
                              const RowMatrix& blocks) {
  RowMatrix rows = sample.transpose().replicate(blocks.rows(), 1);
  for (std::size_t k = 0; k < occluded.size(); ++k) {
    rows.col(static_cast<Eigen::Index>(occluded[k])) =
        blocks.col(static_cast<Eigen::Index>(k));
  }
  return rows;
}

/// Column-wise weighted mean, accumulated as offsets from the first row so
/// that identical rows reproduce their value bit-exactly.
inline Vector weighted_mean(const RowMatrix& values, const Vector& weights) {
  const Vector ref = values.row(0).transpose();
  const RowMatrix offsets = values.rowwise() - ref.transpose();
  return ref + (weights.transpose() * offsets).transpose();
}

inline void check_batch(const FeatureSet& occluded, const ImputationBatch& batch) {
  if (!(batch.occluded == occluded)) {
    throw DomainError("imputation batch was drawn for a different feature set");
  }
  if (batch.size() == 0) throw DomainError("imputation batch is empty");
  batch.validate();
}

/// log2 of a (possibly Laplace-corrected) class probability.
inline double log2_probability(double p, const Task& task) {
  const double q = task.laplace ? laplace_correct(p, task.n_train, task.n_classes) : p;
  if (!(q > 0.0)) {
    throw NumericalError(
        "log of a vanishing probability; enable the Laplace correction");
  }
  return std::log2(q);
}

inline Vector log2_probabilities(const Vector& p, const Task& task) {
  Vector out(p.size());
  for (Eigen::Index c = 0; c < p.size(); ++c) out(c) = log2_probability(p(c), task);
  return out;
}

/// f(x) - m for regression, log2 f_c(x) - log2 m_c per class otherwise.
inline Vector centered(const Vector& fx, const Vector& m, const Task& task) {
  if (!task.is_classification()) return fx - m;
  return log2_probabilities(fx, task) - log2_probabilities(m, task);
}

/// Throws unless model and task describe the same kind of output.
inline void check_model_task(const Model& model, const Task& task) {
  task.validate();
  if (model.task() == TaskKind::classification_logits) {
    throw DomainError(
        "model emits logits; wrap it with temperature scaling to obtain "
        "calibrated probabilities first");
  }
  if (task.is_classification() != (model.task() != TaskKind::regression)) {
    throw DomainError("task kind " + std::string(to_string(task.kind)) +
                      " does not match model kind " +
                      std::string(to_string(model.task())));
  }
  if (task.is_classification() && model.n_outputs() != task.n_classes) {
    throw SchemaError("task declares " + std::to_string(task.n_classes) +
                      " classes but the model has " +
                      std::to_string(model.n_outputs()) + " outputs");
  }
}

inline void check_sample(const Model& model, const Sample& sample) {
  if (static_cast<std::size_t>(sample.size()) != model.n_features()) {
    throw SchemaError("sample has width " + std::to_string(sample.size()) +
                      ", model expects " + std::to_string(model.n_features()));
  }
  if (!sample.allFinite()) throw SchemaError("sample contains non-finite values");
}

/// Relevance of one set given a precomputed f(x); no f(x) call is counted.
inline EffectReport relevance_given(const Model& model, const Task& task,
                                    const Sample& sample, const Vector& fx,
                                    const FeatureSet& occluded,
                                    const Imputer& imputer,
                                    const EstimatorOptions& opts) {
  occluded.check_width(model.n_features());
  const ImputationBatch batch =
      imputer.sample(occluded, sample, opts.n_imputations, opts.seed);
  check_batch(occluded, batch);
  const RowMatrix outputs =
      model.predict(imputed_rows(sample, occluded, batch.blocks));
  const Vector m = weighted_mean(outputs, batch.weight_vector());

  EffectReport report;
  report.kind = EffectKind::relevance;
  report.estimate = centered(fx, m, task);
  report.n_imputations = batch.size();
  report.model_calls = batch.size();
  if (opts.bootstrap > 0 && batch.size() < 2) {
    report.ci_low = report.estimate;
    report.ci_high = report.estimate;
  } else if (opts.bootstrap > 0) {
    auto [low, high] = bootstrap_percentile(
        outputs, batch.weights, opts.bootstrap, opts.level,
        derive_seed(opts.seed, 0xb007),
        [&](const Vector& means) { return centered(fx, means, task); });
    report.ci_low = low.cwiseMin(report.estimate);
    report.ci_high = high.cwiseMax(report.estimate);
  }
  return report;
}

}  // namespace detail

/// Weighted average of model outputs over the imputed rows:
/// sum_j w_j f(x with occluded := block_j), one entry per output.
[[nodiscard]] inline Vector m_value(const Model& model, const Sample& sample,
                                    const FeatureSet& occluded,
                                    const ImputationBatch& batch) {
  detail::check_sample(model, sample);
  occluded.check_width(model.n_features());
  detail::check_batch(occluded, batch);
  const RowMatrix outputs =
      model.predict(detail::imputed_rows(sample, occluded, batch.blocks));
  return detail::weighted_mean(outputs, batch.weight_vector());
}

/// Prediction difference for occluding `occluded` at `sample`.
///
/// Regression: f(x) - m. Classification: log2 of the Laplace-corrected
/// class probability at x minus that of the m-value, for every class.
/// Costs n_imputations + 1 model rows.
[[nodiscard]] inline EffectReport relevance(const Model& model, const Task& task,
                                            const Sample& sample,
                                            const FeatureSet& occluded,
                                            const Imputer& imputer,
                                            const EstimatorOptions& opts = {}) {
  detail::check_model_task(model, task);
  detail::check_sample(model, sample);
  const Vector fx = model.predict_one(sample);
  EffectReport report =
      detail::relevance_given(model, task, sample, fx, occluded, imputer, opts);
  report.model_calls += 1;
  return report;
}

/// Relevances of several sets at one sample, sharing a single f(x) call:
/// total cost is sum of imputations + 1. Set i uses derive_seed(seed, i).
/// f(x) is stored in `prediction` when given.
[[nodiscard]] inline std::vector<EffectReport> relevances(
    const Model& model, const Task& task, const Sample& sample,
    std::span<const FeatureSet> sets, const Imputer& imputer,
    const EstimatorOptions& opts = {}, Vector* prediction = nullptr) {
  detail::check_model_task(model, task);
  detail::check_sample(model, sample);
  const Vector fx = model.predict_one(sample);
  if (prediction) *prediction = fx;
  std::vector<EffectReport> reports;
  reports.reserve(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    EstimatorOptions set_opts = opts;
    set_opts.seed = derive_seed(opts.seed, i);
    reports.push_back(detail::relevance_given(model, task, sample, fx, sets[i],
                                              imputer, set_opts));
  }
  return reports;
}

}  // namespace preddiff
