#pragma once

// Shared fixtures and brute-force helpers for the unit and acceptance suites.

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "preddiff/preddiff.hpp"

namespace fixtures {

using namespace preddiff;

/// Dataset whose rows repeat `points` with the given integer multiplicities.
inline Dataset weighted_points(const std::vector<std::vector<double>>& points,
                               const std::vector<int>& counts) {
  int total = 0;
  for (int c : counts) total += c;
  RowMatrix v(total, static_cast<Eigen::Index>(points.front().size()));
  Eigen::Index r = 0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (int k = 0; k < counts[p]; ++k, ++r) {
      for (std::size_t c = 0; c < points[p].size(); ++c) {
        v(r, static_cast<Eigen::Index>(c)) = points[p][c];
      }
    }
  }
  return Dataset(std::move(v));
}

/// Three-class naive-Bayes classifier over two ternary features whose
/// evidence factorizes: p(c | y, z) = [u_c(y) / U(y)] [w_c v_c(z) / V(z)].
/// Classes 0 and 1 share u; v_2 is the prior-weighted mix of v_0 and v_1.
struct NaiveBayes {
  static constexpr std::array<double, 3> prior{0.25, 0.25, 0.5};
  static constexpr std::array<std::array<double, 3>, 3> u{
      {{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}, {0.2, 0.3, 0.5}}};
  static constexpr std::array<std::array<double, 3>, 3> v{
      {{0.6, 0.2, 0.2}, {0.2, 0.2, 0.6}, {0.4, 0.2, 0.4}}};

  static Vector posterior(double y, double z) {
    const auto yi = static_cast<std::size_t>(y);
    const auto zi = static_cast<std::size_t>(z);
    Vector p(3);
    for (std::size_t c = 0; c < 3; ++c) p(static_cast<Eigen::Index>(c)) = prior[c] * u[c][yi] * v[c][zi];
    return p / p.sum();
  }

  static FunctionModel model() {
    return FunctionModel(TaskKind::classification_probabilities, 2, 3,
                         [](const Eigen::Ref<const Vector>& x) { return posterior(x(0), x(1)); });
  }

  /// Independent features with marginals U = (0.35, 0.3, 0.35), V = (0.4, 0.2, 0.4),
  /// as 100 rows.
  static Dataset data() {
    const std::array<int, 3> uy{35, 30, 35};
    const std::array<int, 3> vz{40, 20, 40};
    std::vector<std::vector<double>> points;
    std::vector<int> counts;
    for (int y = 0; y < 3; ++y) {
      for (int z = 0; z < 3; ++z) {
        points.push_back({static_cast<double>(y), static_cast<double>(z)});
        counts.push_back(uy[static_cast<std::size_t>(y)] * vz[static_cast<std::size_t>(z)] / 100);
      }
    }
    return weighted_points(points, counts);
  }
};

/// Random cubic polynomial in two variables.
struct Cubic {
  std::array<double, 10> c{};

  explicit Cubic(Rng& rng) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    for (double& v : c) v = coef(rng);
  }

  [[nodiscard]] double operator()(double x, double y) const {
    return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y +
           c[6] * x * x * x + c[7] * x * x * y + c[8] * x * y * y + c[9] * y * y * y;
  }
};

/// n rows of d standard-normal columns mixed by a random matrix.
inline Dataset correlated_gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd mix(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < mix.size(); ++i) mix(i) = 0.4 * normal(rng);
  mix.diagonal().array() += 1.0;
  RowMatrix v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  v = v * mix.transpose();
  return Dataset(std::move(v));
}

/// n rows of d columns with small-integer values and dependence between columns.
inline Dataset discrete_dependent(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> level(0, 2);
  RowMatrix v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    v(r, 0) = level(rng);
    for (Eigen::Index c = 1; c < v.cols(); ++c) {
      // Copy the previous column half of the time.
      v(r, c) = (level(rng) == 0) ? v(r, c - 1) : level(rng);
    }
  }
  return Dataset(std::move(v));
}

/// Brute-force weighted mean of g over the rows of `data`, optionally keeping
/// only rows that agree with `x` outside `occluded`. g receives the row with
/// the occluded columns taken from the data row and the rest from x.
inline double brute_expectation(const Dataset& data, const Sample& x,
                                const std::vector<std::size_t>& occluded, bool condition,
                                const std::function<double(const Sample&)>& g) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    const Sample row = data.row(r);
    Sample point = x;
    bool match = true;
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      const bool occ = std::find(occluded.begin(), occluded.end(),
                                 static_cast<std::size_t>(c)) != occluded.end();
      if (occ) {
        point(c) = row(c);
      } else if (condition && row(c) != x(c)) {
        match = false;
      }
    }
    if (!match) continue;
    total += g(point);
    ++count;
  }
  return total / static_cast<double>(count);
}

/// Pearson correlation.
inline double correlation(const Vector& a, const Vector& b) {
  const Vector da = a.array() - a.mean();
  const Vector db = b.array() - b.mean();
  return da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
}

/// Least-squares slope and explained variance of y on x.
inline std::pair<double, double> linear_fit(const Vector& x, const Vector& y) {
  const Vector dx = x.array() - x.mean();
  const Vector dy = y.array() - y.mean();
  const double slope = dx.dot(dy) / dx.squaredNorm();
  const Vector resid = dy - slope * dx;
  return {slope, 1.0 - resid.squaredNorm() / dy.squaredNorm()};
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace fixtures
