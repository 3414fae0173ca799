// Prints the raw and shielded two-feature decomposition of the OR, AND and
// XOR gates at every point of the binary design.

#include <iomanip>
#include <iostream>

#include "preddiff/preddiff.hpp"

int main() {
  using namespace preddiff;
  RowMatrix design(4, 2);
  design << 0, 0, 0, 1, 1, 0, 1, 1;
  const ExhaustiveImputer imputer(Dataset(design), MatchMode::exact_match);

  const auto show = [](const EffectReport& e) { return e.estimate(0) == 0.0 ? 0.0 : e.estimate(0); };
  std::cout << std::fixed << std::setprecision(4);
  const std::pair<Gate, const char*> gates[] = {
      {Gate::logical_or, "or"}, {Gate::logical_and, "and"}, {Gate::logical_xor, "xor"}};
  for (const auto& [g, name] : gates) {
    const GateModel model(g);
    std::cout << name << "\n  x y    main_x  main_y   joint | sh_x    sh_y    sh_joint\n";
    for (Eigen::Index r = 0; r < design.rows(); ++r) {
      const Sample x = design.row(r).transpose();
      const auto e = joint_effect(model, Task::regression(), x, FeatureSet{0}, FeatureSet{1}, imputer);
      std::cout << "  " << int(x(0)) << ' ' << int(x(1)) << std::showpos << "  " << show(e.main_y) << ' '
                << show(e.main_z) << ' ' << show(e.joint) << " | " << show(*e.shielded_main_y)
                << ' ' << show(*e.shielded_main_z) << ' ' << show(*e.shielded_joint)
                << std::noshowpos << '\n';
    }
  }
}
