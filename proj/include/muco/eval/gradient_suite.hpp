#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace muco {

inline constexpr double kGradTolerance = 1e-4;

struct GradientCase {
  std::string name;
  std::size_t points = 0;
  double max_relative_error = 0.0;  // worst over all points
  double analytic = 0.0;            // at the worst component
  double numeric = 0.0;

  bool passed() const { return max_relative_error <= kGradTolerance; }
};

/// Finite-difference checks of every differentiable operation and of the
/// prototype, pair and joint losses through the real model code, at `points`
/// seeded random points each.
std::vector<GradientCase> run_gradient_suite(std::uint64_t seed = 1, std::size_t points = 20);

}  // namespace muco
