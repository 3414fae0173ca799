#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "preddiff/core.hpp"
#include "preddiff/random.hpp"

namespace preddiff {

/// Replacement values for an occluded feature set.
///
/// Row j of `blocks` holds the values for the columns of `occluded` in the
/// set's (sorted) column order. Without `weights` every row counts 1/n;
/// with them, expectations are exact weighted sums.
struct ImputationBatch {
  FeatureSet occluded;
  RowMatrix blocks;
  std::optional<Vector> weights;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(blocks.rows());
  }

  [[nodiscard]] bool weighted() const { return weights.has_value(); }

  [[nodiscard]] double weight(std::size_t j) const {
    return weights ? (*weights)(static_cast<Eigen::Index>(j))
                   : 1.0 / static_cast<double>(size());
  }

  /// Weight vector, uniform when the batch is unweighted.
  [[nodiscard]] Vector weight_vector() const {
    if (weights) return *weights;
    return Vector::Constant(static_cast<Eigen::Index>(size()),
                            1.0 / static_cast<double>(size()));
  }

  void validate() const {
    if (static_cast<std::size_t>(blocks.cols()) != occluded.size()) {
      throw SchemaError("imputation blocks have " + std::to_string(blocks.cols()) +
                        " columns for an occluded set of size " +
                        std::to_string(occluded.size()));
    }
    if (weights) {
      if (weights->size() != blocks.rows()) {
        throw SchemaError("imputation weights and blocks differ in length");
      }
      if (weights->size() > 0 &&
          (weights->minCoeff() < 0.0 || std::abs(weights->sum() - 1.0) > 1e-12)) {
        throw DomainError("imputation weights must be nonnegative and sum to 1");
      }
    }
  }
};

/// Sampler for q(occluded | remaining columns of x).
///
/// Implementations are immutable after construction. Every call receives its
/// own seed, so concurrent callers never share generator state.
class Imputer {
 public:
  virtual ~Imputer() = default;

  [[nodiscard]] virtual std::size_t n_cols() const = 0;
  [[nodiscard]] virtual std::string_view name() const = 0;

  /// Exact imputers enumerate weighted blocks and ignore `n` and `seed`.
  [[nodiscard]] virtual bool is_exact() const { return false; }

  [[nodiscard]] virtual ImputationBatch sample(const FeatureSet& occluded,
                                               const Sample& x, std::size_t n,
                                               std::uint64_t seed) const = 0;

 protected:
  void check_request(const FeatureSet& occluded, const Sample& x) const {
    occluded.check_width(n_cols());
    if (static_cast<std::size_t>(x.size()) != n_cols()) {
      throw SchemaError("conditioning sample has width " + std::to_string(x.size()) +
                        ", imputer was fitted on " + std::to_string(n_cols()) +
                        " columns");
    }
  }
};

/// Draws whole training rows uniformly with replacement and copies their
/// occluded columns. The conditioning values are ignored, so this imputer is
/// marginal (interventional).
class TrainSetImputer final : public Imputer {
 public:
  explicit TrainSetImputer(Dataset data) : data_(std::move(data)) {
    if (data_.n_rows() < 1) throw DomainError("train-set imputer needs a non-empty dataset");
  }

  [[nodiscard]] std::size_t n_cols() const override { return data_.n_cols(); }
  [[nodiscard]] std::string_view name() const override { return "train"; }

  [[nodiscard]] ImputationBatch sample(const FeatureSet& occluded, const Sample& x,
                                       std::size_t n,
                                       std::uint64_t seed) const override {
    check_request(occluded, x);
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, data_.n_rows() - 1);
    RowMatrix blocks(static_cast<Eigen::Index>(n),
                     static_cast<Eigen::Index>(occluded.size()));
    for (Eigen::Index j = 0; j < blocks.rows(); ++j) {
      const auto r = static_cast<Eigen::Index>(pick(rng));
      for (std::size_t k = 0; k < occluded.size(); ++k) {
        blocks(j, static_cast<Eigen::Index>(k)) =
            data_.values()(r, static_cast<Eigen::Index>(occluded[k]));
      }
    }
    return {occluded, std::move(blocks), std::nullopt};
  }

 private:
  Dataset data_;
};

[[nodiscard]] inline TrainSetImputer fit_train_set(const Dataset& data) {
  return TrainSetImputer(data);
}

/// Multivariate normal imputer sampling the Gaussian conditional of the
/// occluded columns given all other columns:
///   mean = mu_Y + S_YR S_RR^-1 (x_R - mu_R),  cov = S_YY - S_YR S_RR^-1 S_RY.
class GaussianImputer final : public Imputer {
 public:
  GaussianImputer(Vector mean, Eigen::MatrixXd covariance)
      : mean_(std::move(mean)), cov_(std::move(covariance)) {
    if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size()) {
      throw SchemaError("gaussian imputer mean and covariance disagree in size");
    }
    if (!mean_.allFinite() || !cov_.allFinite()) {
      throw DomainError("gaussian imputer parameters must be finite");
    }
  }

  [[nodiscard]] std::size_t n_cols() const override {
    return static_cast<std::size_t>(mean_.size());
  }
  [[nodiscard]] std::string_view name() const override { return "gaussian"; }
  [[nodiscard]] const Vector& mean() const { return mean_; }
  [[nodiscard]] const Eigen::MatrixXd& covariance() const { return cov_; }

  struct Conditional {
    Vector mean;
    Eigen::MatrixXd covariance;
  };

  /// Closed-form conditional of `occluded` given the other columns of x.
  [[nodiscard]] Conditional conditional(const FeatureSet& occluded,
                                        const Sample& x) const {
    check_request(occluded, x);
    const auto rest = complement(occluded, n_cols());
    const auto ny = static_cast<Eigen::Index>(occluded.size());
    const auto nr = static_cast<Eigen::Index>(rest.size());

    Vector mu_y(ny);
    Eigen::MatrixXd s_yy(ny, ny);
    for (Eigen::Index i = 0; i < ny; ++i) {
      mu_y(i) = mean_(static_cast<Eigen::Index>(occluded[i]));
      for (Eigen::Index j = 0; j < ny; ++j) {
        s_yy(i, j) = cov_(static_cast<Eigen::Index>(occluded[i]),
                          static_cast<Eigen::Index>(occluded[j]));
      }
    }
    if (nr == 0) return {mu_y, s_yy};

    Vector dx(nr);
    Eigen::MatrixXd s_rr(nr, nr);
    Eigen::MatrixXd s_yr(ny, nr);
    for (Eigen::Index i = 0; i < nr; ++i) {
      const auto ri = static_cast<Eigen::Index>(rest[i]);
      dx(i) = x(ri) - mean_(ri);
      for (Eigen::Index j = 0; j < nr; ++j) {
        s_rr(i, j) = cov_(ri, static_cast<Eigen::Index>(rest[j]));
      }
      for (Eigen::Index k = 0; k < ny; ++k) {
        s_yr(k, i) = cov_(static_cast<Eigen::Index>(occluded[k]), ri);
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s_rr);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
      throw NumericalError(
          "conditioning covariance is singular; refit the gaussian imputer "
          "with a positive ridge");
    }
    const Eigen::MatrixXd gain = llt.solve(s_yr.transpose()).transpose();
    Conditional c;
    c.mean = mu_y + gain * dx;
    c.covariance = s_yy - gain * s_yr.transpose();
    c.covariance = 0.5 * (c.covariance + c.covariance.transpose());
    return c;
  }

  [[nodiscard]] ImputationBatch sample(const FeatureSet& occluded, const Sample& x,
                                       std::size_t n,
                                       std::uint64_t seed) const override {
    const Conditional c = conditional(occluded, x);
    // Symmetric square root tolerates a rank-deficient Schur complement.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.covariance);
    const Eigen::MatrixXd root =
        eig.eigenvectors() *
        eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto dim = static_cast<Eigen::Index>(occluded.size());
    RowMatrix blocks(static_cast<Eigen::Index>(n), dim);
    Vector z(dim);
    for (Eigen::Index j = 0; j < blocks.rows(); ++j) {
      for (Eigen::Index k = 0; k < dim; ++k) z(k) = normal(rng);
      blocks.row(j) = (c.mean + root * z).transpose();
    }
    return {occluded, std::move(blocks), std::nullopt};
  }

 private:
  Vector mean_;
  Eigen::MatrixXd cov_;
};

/// Fits mean and (n-1)-normalised covariance, adding `ridge` to the diagonal.
/// Without an explicit ridge, 1e-6 * trace(S) / d is used.
[[nodiscard]] inline GaussianImputer fit_conditional_gaussian(
    const Dataset& data, std::optional<double> ridge = std::nullopt) {
  if (data.n_rows() < 2) throw DomainError("gaussian imputer needs at least 2 rows");
  if (ridge && !(*ridge >= 0.0)) throw DomainError("ridge must be >= 0");
  const RowMatrix& v = data.values();
  Vector mean = v.colwise().mean().transpose();
  const Eigen::MatrixXd centered = v.rowwise() - mean.transpose();
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(data.n_rows() - 1);
  const double d = static_cast<double>(data.n_cols());
  const double r = ridge.value_or(1e-6 * cov.trace() / d);
  cov.diagonal().array() += r;
  return GaussianImputer(std::move(mean), std::move(cov));
}

enum class MatchMode { exact_match, marginal };

[[nodiscard]] inline std::string_view to_string(MatchMode m) {
  return m == MatchMode::exact_match ? "exact-match" : "marginal";
}

/// Enumerates the distinct occluded blocks of `data` with their empirical
/// probabilities. In exact-match mode only rows equal to `conditioning` on
/// every non-occluded column take part; marginal mode uses all rows.
/// Blocks come out in lexicographic order.
[[nodiscard]] inline ImputationBatch exhaustive_conditional(
    const Dataset& data, const FeatureSet& occluded, const Sample& conditioning,
    MatchMode mode) {
  occluded.check_width(data.n_cols());
  if (static_cast<std::size_t>(conditioning.size()) != data.n_cols()) {
    throw SchemaError("conditioning sample width differs from dataset width");
  }
  const auto rest = complement(occluded, data.n_cols());
  const RowMatrix& v = data.values();
  std::map<std::vector<double>, std::size_t> counts;
  std::size_t total = 0;
  std::vector<double> key(occluded.size());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    if (mode == MatchMode::exact_match) {
      bool match = true;
      for (std::size_t c : rest) {
        if (v(r, static_cast<Eigen::Index>(c)) !=
            conditioning(static_cast<Eigen::Index>(c))) {
          match = false;
          break;
        }
      }
      if (!match) continue;
    }
    for (std::size_t k = 0; k < occluded.size(); ++k) {
      key[k] = v(r, static_cast<Eigen::Index>(occluded[k]));
    }
    ++counts[key];
    ++total;
  }
  if (total == 0) {
    throw DomainError(
        "no dataset row matches the conditioning values on the non-occluded "
        "columns");
  }
  ImputationBatch batch{occluded,
                        RowMatrix(static_cast<Eigen::Index>(counts.size()),
                                  static_cast<Eigen::Index>(occluded.size())),
                        Vector(static_cast<Eigen::Index>(counts.size()))};
  Eigen::Index j = 0;
  for (const auto& [block, count] : counts) {
    for (std::size_t k = 0; k < block.size(); ++k) {
      batch.blocks(j, static_cast<Eigen::Index>(k)) = block[k];
    }
    (*batch.weights)(j) = static_cast<double>(count) / static_cast<double>(total);
    ++j;
  }
  return batch;
}

/// Exact empirical imputer backed by exhaustive_conditional.
class ExhaustiveImputer final : public Imputer {
 public:
  ExhaustiveImputer(Dataset data, MatchMode mode)
      : data_(std::move(data)), mode_(mode) {
    if (data_.n_rows() < 1) throw DomainError("exhaustive imputer needs a non-empty dataset");
  }

  [[nodiscard]] std::size_t n_cols() const override { return data_.n_cols(); }
  [[nodiscard]] std::string_view name() const override { return "exhaustive"; }
  [[nodiscard]] bool is_exact() const override { return true; }
  [[nodiscard]] MatchMode mode() const { return mode_; }
  [[nodiscard]] const Dataset& data() const { return data_; }

  [[nodiscard]] ImputationBatch sample(const FeatureSet& occluded, const Sample& x,
                                       std::size_t /*n*/,
                                       std::uint64_t /*seed*/) const override {
    check_request(occluded, x);
    return exhaustive_conditional(data_, occluded, x, mode_);
  }

 private:
  Dataset data_;
  MatchMode mode_;
};

namespace detail {

/// Distinct sub-blocks at `positions` with their summed weights.
inline std::map<std::vector<double>, double> marginalize(
    const ImputationBatch& batch, const std::vector<std::size_t>& positions) {
  std::map<std::vector<double>, double> out;
  std::vector<double> key(positions.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    for (std::size_t k = 0; k < positions.size(); ++k) {
      key[k] = batch.blocks(static_cast<Eigen::Index>(j),
                            static_cast<Eigen::Index>(positions[k]));
    }
    out[key] += batch.weight(j);
  }
  return out;
}

}  // namespace detail

/// Breaks the dependence between two disjoint occluded sets Y and Z.
///
/// Requests for exactly Y u Z are served by drawing joint pairs
/// (y1, z1), (y2, z2) from the base imputer and emitting the crossed blocks
/// (y1, z2), (y2, z1), so the blocks follow q(Y|x) q(Z|x). For an exact base
/// the product of the two weighted marginals is enumerated instead. Any other
/// request is forwarded to the base unchanged.
class FactorizedImputer final : public Imputer {
 public:
  FactorizedImputer(std::shared_ptr<const Imputer> base, FeatureSet set_y,
                    FeatureSet set_z)
      : base_(std::move(base)), y_(std::move(set_y)), z_(std::move(set_z)) {
    if (!base_) throw DomainError("factorized imputer needs a base imputer");
    if (!disjoint(y_, z_)) throw DomainError("factorized sets must be disjoint");
    y_.check_width(base_->n_cols());
    z_.check_width(base_->n_cols());
    joint_ = set_union(y_, z_);
    pos_y_ = positions_within(y_, joint_);
    pos_z_ = positions_within(z_, joint_);
  }

  [[nodiscard]] std::size_t n_cols() const override { return base_->n_cols(); }
  [[nodiscard]] std::string_view name() const override { return "factorized"; }
  [[nodiscard]] bool is_exact() const override { return base_->is_exact(); }
  [[nodiscard]] const FeatureSet& joint_set() const { return joint_; }

  [[nodiscard]] ImputationBatch sample(const FeatureSet& occluded, const Sample& x,
                                       std::size_t n,
                                       std::uint64_t seed) const override {
    if (!(occluded == joint_)) return base_->sample(occluded, x, n, seed);
    check_request(occluded, x);
    return base_->is_exact() ? cross_exact(x) : cross_sampled(x, n, seed);
  }

 private:
  [[nodiscard]] ImputationBatch cross_sampled(const Sample& x, std::size_t n,
                                              std::uint64_t seed) const {
    const std::size_t pairs = (n + 1) / 2;
    const ImputationBatch draws = base_->sample(joint_, x, 2 * pairs, seed);
    if (draws.weighted()) {
      throw DomainError("sampling base imputer returned weighted blocks");
    }
    RowMatrix blocks(static_cast<Eigen::Index>(n),
                     static_cast<Eigen::Index>(joint_.size()));
    for (std::size_t p = 0; p < pairs; ++p) {
      const auto first = static_cast<Eigen::Index>(2 * p);
      const auto second = first + 1;
      for (Eigen::Index out = first; out <= second; ++out) {
        if (static_cast<std::size_t>(out) >= n) break;
        const Eigen::Index y_src = out;
        const Eigen::Index z_src = (out == first) ? second : first;
        for (std::size_t k : pos_y_) {
          const auto kk = static_cast<Eigen::Index>(k);
          blocks(out, kk) = draws.blocks(y_src, kk);
        }
        for (std::size_t k : pos_z_) {
          const auto kk = static_cast<Eigen::Index>(k);
          blocks(out, kk) = draws.blocks(z_src, kk);
        }
      }
    }
    return {joint_, std::move(blocks), std::nullopt};
  }

  [[nodiscard]] ImputationBatch cross_exact(const Sample& x) const {
    const ImputationBatch joint = base_->sample(joint_, x, 0, 0);
    const auto my = detail::marginalize(joint, pos_y_);
    const auto mz = detail::marginalize(joint, pos_z_);
    const auto rows = static_cast<Eigen::Index>(my.size() * mz.size());
    ImputationBatch out{joint_,
                        RowMatrix(rows, static_cast<Eigen::Index>(joint_.size())),
                        Vector(rows)};
    Eigen::Index j = 0;
    for (const auto& [yb, wy] : my) {
      for (const auto& [zb, wz] : mz) {
        for (std::size_t k = 0; k < pos_y_.size(); ++k) {
          out.blocks(j, static_cast<Eigen::Index>(pos_y_[k])) = yb[k];
        }
        for (std::size_t k = 0; k < pos_z_.size(); ++k) {
          out.blocks(j, static_cast<Eigen::Index>(pos_z_[k])) = zb[k];
        }
        (*out.weights)(j) = wy * wz;
        ++j;
      }
    }
    return out;
  }

  std::shared_ptr<const Imputer> base_;
  FeatureSet y_;
  FeatureSet z_;
  FeatureSet joint_;
  std::vector<std::size_t> pos_y_;
  std::vector<std::size_t> pos_z_;
};

/// Wraps `base` so that joint draws for Y u Z factorize.
[[nodiscard]] inline std::shared_ptr<const FactorizedImputer> factorize(
    std::shared_ptr<const Imputer> base, const FeatureSet& set_y,
    const FeatureSet& set_z) {
  return std::make_shared<const FactorizedImputer>(std::move(base), set_y, set_z);
}

}  // namespace preddiff
