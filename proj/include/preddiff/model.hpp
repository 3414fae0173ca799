#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>

#include "preddiff/core.hpp"

namespace preddiff {

enum class TaskKind { regression, classification_probabilities, classification_logits };

[[nodiscard]] inline std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::regression:
      return "regression";
    case TaskKind::classification_probabilities:
      return "classification_probabilities";
    case TaskKind::classification_logits:
      return "classification_logits";
  }
  return "unknown";
}

[[nodiscard]] inline TaskKind parse_task_kind(std::string_view text) {
  if (text == "regression") return TaskKind::regression;
  if (text == "classification_probabilities" || text == "classification") {
    return TaskKind::classification_probabilities;
  }
  if (text == "classification_logits") return TaskKind::classification_logits;
  throw DomainError("unknown task kind: " + std::string(text));
}

/// What the explainer needs to know about the prediction target.
///
/// For classification, `n_train` and `n_classes` feed the Laplace correction
/// p -> (pN + 1) / (N + K). Turning `laplace` off is meant for analytic
/// fixtures whose probabilities never vanish.
struct Task {
  TaskKind kind = TaskKind::regression;
  std::size_t n_classes = 1;
  std::size_t n_train = 1;
  bool laplace = true;

  static Task regression() { return {}; }

  static Task classification(std::size_t n_classes, std::size_t n_train,
                             bool laplace = true) {
    Task t{TaskKind::classification_probabilities, n_classes, n_train, laplace};
    t.validate();
    return t;
  }

  [[nodiscard]] bool is_classification() const {
    return kind != TaskKind::regression;
  }

  void validate() const {
    if (is_classification()) {
      if (n_classes < 2) throw DomainError("classification needs K >= 2 classes");
      if (n_train < 1) throw DomainError("Laplace correction needs N >= 1");
    }
  }
};

/// Opaque batch predictor.
///
/// `predict` validates shapes and outputs and counts every predicted row;
/// subclasses implement `do_predict` only. The counter is the basis of all
/// model-call accounting and is safe to bump from several threads.
class Model {
 public:
  Model(TaskKind task, std::size_t n_features, std::size_t n_outputs)
      : task_(task), n_features_(n_features), n_outputs_(n_outputs) {
    if (n_outputs_ == 0) throw DomainError("model must have at least one output");
    if (task_ == TaskKind::regression && n_outputs_ != 1) {
      throw DomainError("regression models have exactly one output");
    }
  }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  virtual ~Model() = default;

  [[nodiscard]] TaskKind task() const { return task_; }
  [[nodiscard]] std::size_t n_features() const { return n_features_; }
  [[nodiscard]] std::size_t n_outputs() const { return n_outputs_; }

  /// Rows predicted so far.
  [[nodiscard]] std::uint64_t calls() const {
    return calls_.load(std::memory_order_relaxed);
  }
  void reset_calls() { calls_.store(0, std::memory_order_relaxed); }

  [[nodiscard]] RowMatrix predict(const RowMatrix& rows) const {
    if (static_cast<std::size_t>(rows.cols()) != n_features_) {
      throw SchemaError("model expects " + std::to_string(n_features_) +
                        " features, got rows of width " +
                        std::to_string(rows.cols()));
    }
    if (rows.rows() == 0) {
      return RowMatrix(0, static_cast<Eigen::Index>(n_outputs_));
    }
    RowMatrix out = do_predict(rows);
    calls_.fetch_add(static_cast<std::uint64_t>(rows.rows()),
                     std::memory_order_relaxed);
    if (out.rows() != rows.rows() ||
        static_cast<std::size_t>(out.cols()) != n_outputs_) {
      throw ModelError("model returned a " + std::to_string(out.rows()) + "x" +
                       std::to_string(out.cols()) + " matrix for " +
                       std::to_string(rows.rows()) + " rows and " +
                       std::to_string(n_outputs_) + " outputs");
    }
    if (!out.allFinite()) throw ModelError("model returned non-finite output");
    if (task_ == TaskKind::classification_probabilities) {
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        if (out.row(r).minCoeff() < 0.0 || out.row(r).maxCoeff() > 1.0 ||
            std::abs(out.row(r).sum() - 1.0) > 1e-9) {
          throw ModelError("row " + std::to_string(r) +
                           " is not a probability vector");
        }
      }
    }
    return out;
  }

  /// Single-row convenience wrapper.
  [[nodiscard]] Vector predict_one(const Sample& x) const {
    RowMatrix rows = x.transpose();
    return predict(rows).row(0).transpose();
  }

 protected:
  virtual RowMatrix do_predict(const RowMatrix& rows) const = 0;

 private:
  TaskKind task_;
  std::size_t n_features_;
  std::size_t n_outputs_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

/// Model from a per-row function returning all outputs.
class FunctionModel final : public Model {
 public:
  using RowFunction = std::function<Vector(const Eigen::Ref<const Vector>&)>;

  FunctionModel(TaskKind task, std::size_t n_features, std::size_t n_outputs,
                RowFunction fn)
      : Model(task, n_features, n_outputs), fn_(std::move(fn)) {}

  /// Scalar regression model.
  static FunctionModel regression(
      std::size_t n_features,
      std::function<double(const Eigen::Ref<const Vector>&)> fn) {
    return FunctionModel(TaskKind::regression, n_features, 1,
                         [fn = std::move(fn)](const Eigen::Ref<const Vector>& x) {
                           Vector v(1);
                           v(0) = fn(x);
                           return v;
                         });
  }

  FunctionModel(FunctionModel&& other) noexcept
      : Model(other.task(), other.n_features(), other.n_outputs()),
        fn_(std::move(other.fn_)) {}

 protected:
  RowMatrix do_predict(const RowMatrix& rows) const override {
    RowMatrix out(rows.rows(), static_cast<Eigen::Index>(n_outputs()));
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      Vector x = rows.row(r).transpose();
      out.row(r) = fn_(x).transpose();
    }
    return out;
  }

 private:
  RowFunction fn_;
};

}  // namespace preddiff
