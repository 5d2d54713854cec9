#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hgp/tensor.hpp"

namespace hgp {

struct GradCheckResult {
  std::string name;
  Real max_rel_error = 0;
  std::size_t checks = 0;
};

/// Finite-difference checks of every differentiable op over `trials` random
/// inputs, plus the composite layers and a full model forward (L=2, d=32,
/// N=8, T=4) with loss taken over stacked permutation masks. Each entry holds
/// the worst relative error seen for that target.
std::vector<GradCheckResult> run_gradient_suite(std::size_t trials = 20, std::uint64_t seed = 1234);

}  // namespace hgp
