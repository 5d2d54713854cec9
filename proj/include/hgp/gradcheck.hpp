#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "hgp/tensor.hpp"

namespace hgp {

/// Compares reverse-mode gradients with central finite differences.
///
/// The error for one element is |analytic - numeric| / max(1, |analytic|);
/// the maximum over all checked elements is returned.
Real grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, Real h = 1e-5);

/// Same check over a set of leaves that `f` closes over (e.g. model
/// parameters). At most `max_per_tensor` elements of each leaf are probed,
/// chosen with `seed`; 0 means all of them.
Real grad_check_leaves(const std::function<Tensor()>& f, std::span<Tensor> leaves, Real h = 1e-5,
                       std::size_t max_per_tensor = 0, std::uint64_t seed = 0);

}  // namespace hgp
