// Explains the four-feature synthetic regression target with a conditional
// Gaussian imputer and writes one CSV row per sample:
//
//   sample,x_a,x_b,x_c,x_d,rel_a,rel_b,rel_c,rel_d,joint_ab
//
// Usage: synthetic_regression [n_samples] [n_imputations] [seed]

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "preddiff/preddiff.hpp"

int main(int argc, char** argv) {
  using namespace preddiff;
  const std::size_t n_samples = argc > 1 ? std::stoul(argv[1]) : 20;
  const std::size_t n_imputations = argc > 2 ? std::stoul(argv[2]) : 500;
  const std::uint64_t seed = argc > 3 ? std::stoull(argv[3]) : 0;

  const Dataset data = generate_synthetic_dataset(2000, 2024);
  const GaussianImputer imputer = fit_conditional_gaussian(data);
  const SyntheticTargetModel model;
  const std::vector<FeatureSet> sets{FeatureSet{0}, FeatureSet{1}, FeatureSet{2}, FeatureSet{3}};

  std::cout << "sample,x_a,x_b,x_c,x_d,rel_a,rel_b,rel_c,rel_d,joint_ab\n";
  for (std::size_t s = 0; s < n_samples && s < data.n_rows(); ++s) {
    EstimatorOptions opts;
    opts.n_imputations = n_imputations;
    opts.seed = derive_seed(seed, s);
    const Sample x = data.row(s);
    const auto rel = relevances(model, Task::regression(), x, sets, imputer, opts);
    const auto pair =
        joint_effect(model, Task::regression(), x, FeatureSet{0}, FeatureSet{1}, imputer, opts);
    std::cout << s;
    for (Eigen::Index c = 0; c < 4; ++c) std::cout << ',' << format_number(x(c));
    for (const auto& r : rel) std::cout << ',' << format_number(r.estimate(0));
    std::cout << ',' << format_number(pair.joint.estimate(0)) << '\n';
  }
  return EXIT_SUCCESS;
}
