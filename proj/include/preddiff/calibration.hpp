#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "preddiff/model.hpp"

namespace preddiff {

/// Row-wise softmax of logits / temperature, with max subtraction.
[[nodiscard]] inline RowMatrix softmax(const RowMatrix& logits, double temperature = 1.0) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError("temperature must be positive and finite");
  }
  RowMatrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto scaled = (logits.row(r) / temperature).eval();
    const auto shifted = (scaled.array() - scaled.maxCoeff()).exp().eval();
    out.row(r) = shifted / shifted.sum();
  }
  return out;
}

/// Mean negative log-likelihood of softmax(logits / T) at the given labels.
[[nodiscard]] inline double temperature_nll(const RowMatrix& logits,
                                            std::span<const std::size_t> labels,
                                            double temperature) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto scaled = (logits.row(r) / temperature).eval();
    const double top = scaled.maxCoeff();
    const double log_norm = top + std::log((scaled.array() - top).exp().sum());
    total += log_norm - scaled(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)]));
  }
  return total / static_cast<double>(logits.rows());
}

struct TemperatureFit {
  double temperature = 1.0;
  double nll = 0.0;
  /// The optimum sits on the edge of the search interval for log T.
  bool at_bound = false;
};

struct TemperatureSearch {
  double log_t_min = -4.0;
  double log_t_max = 4.0;
  double tolerance = 1e-6;
};

/// Temperature minimizing the mean NLL, by golden-section search on log T.
[[nodiscard]] inline TemperatureFit fit_temperature(const RowMatrix& logits,
                                                    std::span<const std::size_t> labels,
                                                    const TemperatureSearch& search = {}) {
  if (logits.rows() < 2) throw DomainError("temperature fit needs at least two rows");
  if (logits.cols() < 2) throw DomainError("temperature fit needs at least two classes");
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw SchemaError("logit rows and labels differ in length");
  }
  if (!logits.allFinite()) throw SchemaError("logits contain non-finite values");
  bool varied = false;
  for (std::size_t label : labels) {
    if (label >= static_cast<std::size_t>(logits.cols())) {
      throw DomainError("label " + std::to_string(label) + " out of range for " +
                        std::to_string(logits.cols()) + " classes");
    }
    varied = varied || label != labels.front();
  }
  if (!varied) throw DomainError("labels contain a single class; temperature is undefined");

  const auto nll = [&](double log_t) {
    return temperature_nll(logits, labels, std::exp(log_t));
  };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = search.log_t_min;
  double b = search.log_t_max;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = nll(c);
  double fd = nll(d);
  while (b - a > search.tolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = nll(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = nll(d);
    }
  }
  double best = (a + b) / 2.0;
  double best_nll = nll(best);
  // Golden section never evaluates the endpoints; compare them explicitly.
  // A tie means the loss is flat out to the edge (separable data), so the
  // optimum lies at or beyond it.
  for (double edge : {search.log_t_min, search.log_t_max}) {
    const double value = nll(edge);
    if (value <= best_nll) {
      best = edge;
      best_nll = value;
    }
  }
  TemperatureFit fit;
  fit.temperature = std::exp(best);
  fit.nll = best_nll;
  fit.at_bound = best - search.log_t_min < 2.0 * search.tolerance ||
                 search.log_t_max - best < 2.0 * search.tolerance;
  return fit;
}

/// Probability model softmax(logits(x) / T) over a logit-emitting model.
class TemperatureModel final : public Model {
 public:
  TemperatureModel(std::shared_ptr<const Model> logits, double temperature)
      : Model(TaskKind::classification_probabilities, checked(logits)->n_features(),
              logits->n_outputs()),
        logits_(std::move(logits)),
        temperature_(temperature) {
    if (!(temperature_ > 0.0) || !std::isfinite(temperature_)) {
      throw DomainError("temperature must be positive and finite");
    }
  }

  [[nodiscard]] double temperature() const { return temperature_; }
  [[nodiscard]] const Model& wrapped() const { return *logits_; }

 protected:
  RowMatrix do_predict(const RowMatrix& rows) const override {
    return softmax(logits_->predict(rows), temperature_);
  }

 private:
  static const std::shared_ptr<const Model>& checked(const std::shared_ptr<const Model>& m) {
    if (!m) throw DomainError("temperature model needs a wrapped model");
    if (m->task() != TaskKind::classification_logits) {
      throw DomainError("temperature scaling wraps a logit model");
    }
    if (m->n_outputs() < 2) throw DomainError("temperature scaling needs K >= 2 outputs");
    return m;
  }

  std::shared_ptr<const Model> logits_;
  double temperature_;
};

[[nodiscard]] inline std::shared_ptr<TemperatureModel> apply_temperature(
    std::shared_ptr<const Model> logits, double temperature) {
  return std::make_shared<TemperatureModel>(std::move(logits), temperature);
}

}  // namespace preddiff
