#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "preddiff/oracles.hpp"
#include "preddiff/relevance.hpp"

// Joint effects between disjoint feature sets, anchored at the explained
// sample. Every term of one decomposition is computed from a single shared
// batch of joint imputations, which makes the completeness relation hold
// per imputation rather than only in expectation.

namespace preddiff {

/// Shielded regrouping of a two-set decomposition.
struct ShieldedTerms {
  Vector main_y;
  Vector main_z;
  Vector joint;
};

/// shielded main = raw joint + raw main; shielded joint = -raw joint.
[[nodiscard]] inline ShieldedTerms shielded_effects(const Vector& main_y,
                                                    const Vector& main_z,
                                                    const Vector& joint) {
  return {joint + main_y, joint + main_z, -joint};
}

struct InteractionReport {
  EffectReport main_y;
  EffectReport main_z;
  EffectReport joint;
  /// Relevance of Y u Z from the same imputations.
  EffectReport combined;
  /// Regression only; undefined for classification.
  std::optional<EffectReport> shielded_main_y;
  std::optional<EffectReport> shielded_main_z;
  std::optional<EffectReport> shielded_joint;
  /// |combined - (main_y + main_z + joint)| per output.
  Vector completeness_residual;
  std::uint64_t model_calls = 0;

  [[nodiscard]] double max_residual() const {
    return completeness_residual.size() ? completeness_residual.maxCoeff() : 0.0;
  }
};

struct ThreePointReport {
  EffectReport main_a, main_b, main_c;
  EffectReport pair_ab, pair_bc, pair_ac;
  EffectReport triple;
  EffectReport combined;
  /// Fully shielded terms: A shielded from BC, AB shielded from C, and so on.
  EffectReport shielded_a, shielded_b, shielded_c;
  EffectReport shielded_ab, shielded_bc, shielded_ac;
  Vector completeness_residual;
  Vector shielded_residual;
  std::uint64_t model_calls = 0;
};

enum class ImputationSharing { shared, independent };

namespace detail {

/// Rows of `sample` with the given parts of each joint block substituted.
inline RowMatrix substituted_rows(const Sample& sample, const FeatureSet& joint,
                                  const RowMatrix& blocks,
                                  const std::vector<std::size_t>& positions) {
  RowMatrix rows = sample.transpose().replicate(blocks.rows(), 1);
  for (std::size_t k : positions) {
    rows.col(static_cast<Eigen::Index>(joint[k])) =
        blocks.col(static_cast<Eigen::Index>(k));
  }
  return rows;
}

inline std::vector<std::size_t> concat(std::vector<std::size_t> a,
                                       const std::vector<std::size_t>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline EffectReport make_effect(EffectKind kind, Vector estimate, std::size_t n,
                                std::uint64_t calls) {
  EffectReport r;
  r.kind = kind;
  r.estimate = std::move(estimate);
  r.n_imputations = n;
  r.model_calls = calls;
  return r;
}

/// Attaches bootstrap bounds (stacked in `low`/`high`) to consecutive terms.
inline void attach_intervals(std::span<EffectReport* const> terms,
                             const Vector& low, const Vector& high) {
  Eigen::Index offset = 0;
  for (EffectReport* t : terms) {
    const Eigen::Index k = t->estimate.size();
    t->ci_low = low.segment(offset, k).cwiseMin(t->estimate);
    t->ci_high = high.segment(offset, k).cwiseMax(t->estimate);
    offset += k;
  }
}

inline Vector stack(std::initializer_list<const Vector*> parts) {
  Eigen::Index total = 0;
  for (const Vector* p : parts) total += p->size();
  Vector out(total);
  Eigen::Index offset = 0;
  for (const Vector* p : parts) {
    out.segment(offset, p->size()) = *p;
    offset += p->size();
  }
  return out;
}

/// Column blocks [dY | dZ | dYZ | E] of differences to f(x) for regression,
/// where E = (dY + dZ) - dYZ; raw probabilities [pY | pZ | pYZ] otherwise.
struct PairEvaluations {
  RowMatrix per_imputation;
  Vector weights;
  std::optional<Vector> bootstrap_weights;
  std::size_t n = 0;
  std::size_t outputs = 0;
};

struct PairTerms {
  Vector main_y, main_z, joint, combined;
};

inline PairTerms pair_terms_from_means(const Vector& means, const Vector& fx,
                                       const Task& task, std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  PairTerms t;
  if (!task.is_classification()) {
    t.main_y = -means.segment(0, kk);
    t.main_z = -means.segment(kk, kk);
    t.combined = -means.segment(2 * kk, kk);
    t.joint = means.segment(3 * kk, kk);
    return t;
  }
  const Vector lf = log2_probabilities(fx, task);
  const Vector ly = log2_probabilities(means.segment(0, kk), task);
  const Vector lz = log2_probabilities(means.segment(kk, kk), task);
  const Vector lyz = log2_probabilities(means.segment(2 * kk, kk), task);
  t.main_y = lf - ly;
  t.main_z = lf - lz;
  t.combined = lf - lyz;
  t.joint = ((ly + lz) - lyz) - lf;
  return t;
}

inline Vector weighted_column_means(const RowMatrix& values, const Vector& weights) {
  return weighted_mean(values, weights);
}

/// Raw and (for regression) shielded pair decomposition with shared
/// imputations. Costs 3 * batch size model rows; f(x) is supplied.
inline InteractionReport pair_decomposition(const Model& model, const Task& task,
                                            const Sample& sample, const Vector& fx,
                                            const FeatureSet& set_y,
                                            const FeatureSet& set_z,
                                            const Imputer& imputer,
                                            const EstimatorOptions& opts) {
  if (!disjoint(set_y, set_z)) throw DomainError("interacting feature sets overlap");
  set_y.check_width(model.n_features());
  set_z.check_width(model.n_features());
  const FeatureSet joint_set = set_union(set_y, set_z);

  ImputationBatch batch;
  if (task.is_classification()) {
    // Non-owning handle: the wrapper does not outlive this call.
    const std::shared_ptr<const Imputer> base(std::shared_ptr<const Imputer>{},
                                              &imputer);
    const FactorizedImputer factorized(base, set_y, set_z);
    batch = factorized.sample(joint_set, sample, opts.n_imputations, opts.seed);
  } else {
    batch = imputer.sample(joint_set, sample, opts.n_imputations, opts.seed);
  }
  check_batch(joint_set, batch);

  const auto pos_y = positions_within(set_y, joint_set);
  const auto pos_z = positions_within(set_z, joint_set);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto d = static_cast<Eigen::Index>(model.n_features());
  const std::size_t k = model.n_outputs();
  const auto kk = static_cast<Eigen::Index>(k);

  RowMatrix rows(3 * n, d);
  rows.topRows(n) = substituted_rows(sample, joint_set, batch.blocks, pos_y);
  rows.middleRows(n, n) = substituted_rows(sample, joint_set, batch.blocks, pos_z);
  rows.bottomRows(n) =
      substituted_rows(sample, joint_set, batch.blocks, concat(pos_y, pos_z));
  const RowMatrix out = model.predict(rows);

  RowMatrix per_imp;
  if (!task.is_classification()) {
    per_imp.resize(n, 4 * kk);
    const RowMatrix fx_row = fx.transpose().replicate(n, 1);
    const RowMatrix dy = out.topRows(n) - fx_row;
    const RowMatrix dz = out.middleRows(n, n) - fx_row;
    const RowMatrix dyz = out.bottomRows(n) - fx_row;
    per_imp.leftCols(kk) = dy;
    per_imp.middleCols(kk, kk) = dz;
    per_imp.middleCols(2 * kk, kk) = dyz;
    per_imp.rightCols(kk) = (dy + dz) - dyz;
  } else {
    per_imp.resize(n, 3 * kk);
    per_imp.leftCols(kk) = out.topRows(n);
    per_imp.middleCols(kk, kk) = out.middleRows(n, n);
    per_imp.rightCols(kk) = out.bottomRows(n);
  }

  const Vector means = weighted_column_means(per_imp, batch.weight_vector());
  const PairTerms t = pair_terms_from_means(means, fx, task, k);
  const std::uint64_t calls = static_cast<std::uint64_t>(3 * n);
  const std::size_t n_imp = batch.size();

  InteractionReport report;
  report.model_calls = calls;
  report.main_y = make_effect(EffectKind::main, t.main_y, n_imp, calls);
  report.main_z = make_effect(EffectKind::main, t.main_z, n_imp, calls);
  report.joint = make_effect(EffectKind::joint, t.joint, n_imp, calls);
  report.combined = make_effect(EffectKind::relevance, t.combined, n_imp, calls);
  report.completeness_residual =
      (t.combined - (t.main_y + t.main_z + t.joint)).cwiseAbs();

  if (!task.is_classification()) {
    const ShieldedTerms s = shielded_effects(t.main_y, t.main_z, t.joint);
    report.shielded_main_y =
        make_effect(EffectKind::shielded_main, s.main_y, n_imp, calls);
    report.shielded_main_z =
        make_effect(EffectKind::shielded_main, s.main_z, n_imp, calls);
    report.shielded_joint =
        make_effect(EffectKind::shielded_joint, s.joint, n_imp, calls);
  }

  if (opts.bootstrap > 0) {
    std::vector<EffectReport*> terms = {&report.main_y, &report.main_z,
                                        &report.joint, &report.combined};
    if (!task.is_classification()) {
      terms.push_back(&*report.shielded_main_y);
      terms.push_back(&*report.shielded_main_z);
      terms.push_back(&*report.shielded_joint);
    }
    if (batch.size() < 2) {
      for (EffectReport* e : terms) {
        e->ci_low = e->estimate;
        e->ci_high = e->estimate;
      }
    } else {
      const bool regression = !task.is_classification();
      auto statistic = [&](const Vector& m) {
        const PairTerms b = pair_terms_from_means(m, fx, task, k);
        if (!regression) return stack({&b.main_y, &b.main_z, &b.joint, &b.combined});
        const ShieldedTerms s = shielded_effects(b.main_y, b.main_z, b.joint);
        return stack({&b.main_y, &b.main_z, &b.joint, &b.combined, &s.main_y,
                      &s.main_z, &s.joint});
      };
      auto [low, high] = bootstrap_percentile(per_imp, batch.weights, opts.bootstrap,
                                              opts.level,
                                              derive_seed(opts.seed, 0xb007), statistic);
      attach_intervals(terms, low, high);
    }
  }
  return report;
}

}  // namespace detail

/// Raw main and joint effects of Y and Z at `sample`, plus shielded terms for
/// regression. Classification always draws from the factorized wrapper around
/// `imputer` and works on log2 Laplace-corrected probabilities.
/// Costs 3 * n_imputations + 1 model rows.
[[nodiscard]] inline InteractionReport joint_effect(const Model& model,
                                                    const Task& task,
                                                    const Sample& sample,
                                                    const FeatureSet& set_y,
                                                    const FeatureSet& set_z,
                                                    const Imputer& imputer,
                                                    const EstimatorOptions& opts = {}) {
  detail::check_model_task(model, task);
  detail::check_sample(model, sample);
  if (!disjoint(set_y, set_z)) throw DomainError("interacting feature sets overlap");
  const Vector fx = model.predict_one(sample);
  InteractionReport report = detail::pair_decomposition(model, task, sample, fx,
                                                        set_y, set_z, imputer, opts);
  report.model_calls += 1;
  return report;
}

/// Several pairs at one sample with a single f(x) call: 3 * l per pair + 1.
/// Pair i uses derive_seed(seed, i); f(x) is stored in `prediction` when given.
[[nodiscard]] inline std::vector<InteractionReport> joint_effects(
    const Model& model, const Task& task, const Sample& sample,
    std::span<const std::pair<FeatureSet, FeatureSet>> pairs, const Imputer& imputer,
    const EstimatorOptions& opts = {}, Vector* prediction = nullptr) {
  detail::check_model_task(model, task);
  detail::check_sample(model, sample);
  for (const auto& [y, z] : pairs) {
    if (!disjoint(y, z)) throw DomainError("interacting feature sets overlap");
  }
  const Vector fx = model.predict_one(sample);
  if (prediction) *prediction = fx;
  std::vector<InteractionReport> reports;
  reports.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EstimatorOptions pair_opts = opts;
    pair_opts.seed = derive_seed(opts.seed, i);
    reports.push_back(detail::pair_decomposition(model, task, sample, fx,
                                                 pairs[i].first, pairs[i].second,
                                                 imputer, pair_opts));
  }
  return reports;
}

/// Main, pairwise and third-order joint effects of three disjoint sets on one
/// shared batch of joint imputations, plus the fully shielded regrouping.
/// Regression only; costs 7 * n_imputations + 1 model rows.
[[nodiscard]] inline ThreePointReport three_point_effects(
    const Model& model, const Task& task, const Sample& sample, const FeatureSet& a,
    const FeatureSet& b, const FeatureSet& c, const Imputer& imputer,
    const EstimatorOptions& opts = {}) {
  detail::check_model_task(model, task);
  detail::check_sample(model, sample);
  if (task.is_classification()) {
    throw DomainError("three-point effects are defined for regression only");
  }
  const FeatureSet sets[] = {a, b, c};
  require_pairwise_disjoint(sets);
  for (const auto& s : sets) s.check_width(model.n_features());

  const FeatureSet joint_set = set_union(sets);
  const ImputationBatch batch =
      imputer.sample(joint_set, sample, opts.n_imputations, opts.seed);
  detail::check_batch(joint_set, batch);
  const auto pa = positions_within(a, joint_set);
  const auto pb = positions_within(b, joint_set);
  const auto pc = positions_within(c, joint_set);

  // Substitution patterns, in column-block order of `d` below.
  const std::vector<std::size_t> patterns[] = {
      pa,
      pb,
      pc,
      detail::concat(pa, pb),
      detail::concat(pb, pc),
      detail::concat(pa, pc),
      detail::concat(detail::concat(pa, pb), pc),
  };
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto dim = static_cast<Eigen::Index>(model.n_features());
  RowMatrix rows(7 * n, dim);
  for (Eigen::Index p = 0; p < 7; ++p) {
    rows.middleRows(p * n, n) = detail::substituted_rows(
        sample, joint_set, batch.blocks, patterns[static_cast<std::size_t>(p)]);
  }
  const Vector fx = model.predict_one(sample);
  const RowMatrix out = model.predict(rows);

  // Per imputation: differences d_S = f(x with S imputed) - f(x), followed by
  // the pair components (d_XY - d_X) - d_Y and the triple component, grouped
  // so that any set the model ignores cancels exactly.
  RowMatrix per_imp(n, 11);
  for (Eigen::Index p = 0; p < 7; ++p) {
    per_imp.col(p) = out.middleRows(p * n, n).col(0).array() - fx(0);
  }
  const auto d = [&](int p) { return per_imp.col(p).array(); };
  enum { A = 0, B, C, AB, BC, AC, ABC };
  per_imp.col(7) = (d(AB) - d(A)) - d(B);
  per_imp.col(8) = (d(BC) - d(B)) - d(C);
  per_imp.col(9) = (d(AC) - d(A)) - d(C);
  per_imp.col(10) = ((d(ABC) - d(AB)) - (d(AC) - d(A))) - ((d(BC) - d(B)) - d(C));

  const Vector means = detail::weighted_column_means(per_imp, batch.weight_vector());
  const std::uint64_t calls = static_cast<std::uint64_t>(7 * n) + 1;
  const std::size_t n_imp = batch.size();

  struct Terms {
    double main_a, main_b, main_c, ab, bc, ac, triple, combined;
    double sh_a, sh_b, sh_c, sh_ab, sh_bc, sh_ac;
  };
  const auto terms_from = [](const Vector& m) {
    Terms t{};
    t.main_a = -m(A);
    t.main_b = -m(B);
    t.main_c = -m(C);
    t.ab = -m(7);
    t.bc = -m(8);
    t.ac = -m(9);
    t.triple = -m(10);
    t.combined = -m(ABC);
    // m_BC - m_ABC expressed through differences to f(x).
    t.sh_a = m(BC) - m(ABC);
    t.sh_b = m(AC) - m(ABC);
    t.sh_c = m(AB) - m(ABC);
    t.sh_ab = m(C) - m(ABC);
    t.sh_bc = m(A) - m(ABC);
    t.sh_ac = m(B) - m(ABC);
    return t;
  };
  const Terms t = terms_from(means);
  const auto scalar = [](double v) {
    Vector out(1);
    out(0) = v;
    return out;
  };
  const auto effect = [&](EffectKind kind, double v) {
    return detail::make_effect(kind, scalar(v), n_imp, calls);
  };

  ThreePointReport r;
  r.model_calls = calls;
  r.main_a = effect(EffectKind::main, t.main_a);
  r.main_b = effect(EffectKind::main, t.main_b);
  r.main_c = effect(EffectKind::main, t.main_c);
  r.pair_ab = effect(EffectKind::pair, t.ab);
  r.pair_bc = effect(EffectKind::pair, t.bc);
  r.pair_ac = effect(EffectKind::pair, t.ac);
  r.triple = effect(EffectKind::triple, t.triple);
  r.combined = effect(EffectKind::relevance, t.combined);
  r.shielded_a = effect(EffectKind::shielded_main, t.sh_a);
  r.shielded_b = effect(EffectKind::shielded_main, t.sh_b);
  r.shielded_c = effect(EffectKind::shielded_main, t.sh_c);
  r.shielded_ab = effect(EffectKind::shielded_pair, t.sh_ab);
  r.shielded_bc = effect(EffectKind::shielded_pair, t.sh_bc);
  r.shielded_ac = effect(EffectKind::shielded_pair, t.sh_ac);
  r.completeness_residual = scalar(std::abs(
      t.combined - (t.main_a + t.main_b + t.main_c + t.ab + t.bc + t.ac + t.triple)));
  r.shielded_residual = scalar(std::abs(
      t.combined - (-t.sh_a - t.sh_b - t.sh_c + t.sh_ab + t.sh_bc + t.sh_ac + t.triple)));

  if (opts.bootstrap > 0 && n_imp >= 2) {
    auto statistic = [&](const Vector& m) {
      const Terms b = terms_from(m);
      Vector v(14);
      v << b.main_a, b.main_b, b.main_c, b.ab, b.bc, b.ac, b.triple, b.combined,
          b.sh_a, b.sh_b, b.sh_c, b.sh_ab, b.sh_bc, b.sh_ac;
      return v;
    };
    auto [low, high] = bootstrap_percentile(per_imp, batch.weights, opts.bootstrap,
                                            opts.level, derive_seed(opts.seed, 0xb007),
                                            statistic);
    EffectReport* all[] = {&r.main_a,     &r.main_b,     &r.main_c,     &r.pair_ab,
                           &r.pair_bc,    &r.pair_ac,    &r.triple,     &r.combined,
                           &r.shielded_a, &r.shielded_b, &r.shielded_c, &r.shielded_ab,
                           &r.shielded_bc, &r.shielded_ac};
    detail::attach_intervals(all, low, high);
  }
  return r;
}

/// Relevance components m-bar of every anchored component f^V, V a non-empty
/// subset of `sets` (indexed by bit mask; entry 0 is unused and zero), from
/// one shared batch of joint imputations. Regression only.
[[nodiscard]] inline std::vector<double> decomposition_relevances(
    const Model& model, const Task& task, const Sample& sample,
    std::span<const FeatureSet> sets, const Imputer& imputer,
    const EstimatorOptions& opts = {}) {
  detail::check_model_task(model, task);
  detail::check_sample(model, sample);
  if (task.is_classification()) {
    throw DomainError("generic decomposition is defined for regression only");
  }
  check_oracle_size(sets.size());
  require_pairwise_disjoint(sets);
  const FeatureSet joint_set = set_union(sets);
  const ImputationBatch batch =
      imputer.sample(joint_set, sample, opts.n_imputations, opts.seed);
  detail::check_batch(joint_set, batch);

  std::vector<std::vector<std::size_t>> positions;
  for (const auto& s : sets) positions.push_back(positions_within(s, joint_set));
  const double fx = model.predict_one(sample)(0);
  const Vector w = batch.weight_vector();

  // g(W) = E[f(x with sets in W imputed)], g(empty) = f(x).
  std::vector<double> g(std::size_t{1} << sets.size());
  g[0] = fx;
  for (Coalition mask = 1; mask < g.size(); ++mask) {
    std::vector<std::size_t> pattern;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      if (mask & (Coalition{1} << i)) pattern = detail::concat(pattern, positions[i]);
    }
    const RowMatrix out =
        model.predict(detail::substituted_rows(sample, joint_set, batch.blocks, pattern));
    g[mask] = detail::weighted_mean(out, w)(0);
  }
  // m-bar of f^V equals -E[f^V] because f^V vanishes at the anchor.
  std::vector<double> components = mobius_inversion(std::move(g));
  components[0] = 0.0;
  for (std::size_t v = 1; v < components.size(); ++v) components[v] = -components[v];
  return components;
}

/// |m-bar of the union - sum of its decomposition terms|, maximised over
/// outputs. Two and three sets use the dedicated estimators, more sets the
/// generic anchored decomposition. Independent sharing (two sets only) draws
/// a separate batch for every term.
[[nodiscard]] inline double completeness_check(
    const Model& model, const Task& task, const Sample& sample,
    std::span<const FeatureSet> sets, const Imputer& imputer,
    const EstimatorOptions& opts = {},
    ImputationSharing sharing = ImputationSharing::shared) {
  require_pairwise_disjoint(sets);
  if (sharing == ImputationSharing::independent) {
    if (sets.size() != 2) {
      throw DomainError("independent imputation batches are supported for pairs only");
    }
    detail::check_model_task(model, task);
    detail::check_sample(model, sample);
    const Vector fx = model.predict_one(sample);
    std::array<detail::PairTerms, 4> runs;
    for (std::uint64_t r = 0; r < 4; ++r) {
      EstimatorOptions o = opts;
      o.seed = derive_seed(opts.seed, r);
      o.bootstrap = 0;
      const InteractionReport rep =
          detail::pair_decomposition(model, task, sample, fx, sets[0], sets[1], imputer, o);
      runs[r] = {rep.main_y.estimate, rep.main_z.estimate, rep.joint.estimate,
                 rep.combined.estimate};
    }
    const Vector resid =
        (runs[3].combined - (runs[0].main_y + runs[1].main_z + runs[2].joint)).cwiseAbs();
    return resid.maxCoeff();
  }
  switch (sets.size()) {
    case 2:
      return joint_effect(model, task, sample, sets[0], sets[1], imputer, opts)
          .max_residual();
    case 3:
      return three_point_effects(model, task, sample, sets[0], sets[1], sets[2],
                                 imputer, opts)
          .completeness_residual.maxCoeff();
    default: {
      const auto components =
          decomposition_relevances(model, task, sample, sets, imputer, opts);
      const FeatureSet all = set_union(sets);
      // Relevance of the union, drawn from the same batch (same seed).
      double total = 0.0;
      for (std::size_t v = 1; v < components.size(); ++v) total += components[v];
      const ImputationBatch batch =
          imputer.sample(all, sample, opts.n_imputations, opts.seed);
      const double fx = model.predict_one(sample)(0);
      const double combined = fx - m_value(model, sample, all, batch)(0);
      return std::abs(combined - total);
    }
  }
}

}  // namespace preddiff
