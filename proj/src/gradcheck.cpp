#include "hgp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hgp/error.hpp"

namespace hgp {

namespace {

Real eval_plain(const std::function<Tensor()>& f) {
  const Tensor y = f();
  const Real v = y.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

}  // namespace

Real grad_check_leaves(const std::function<Tensor()>& f, std::span<Tensor> leaves, Real h,
                       std::size_t max_per_tensor, std::uint64_t seed) {
  std::vector<bool> previous;
  for (auto& leaf : leaves) {
    previous.push_back(leaf.requires_grad());
    leaf.zero_grad();
    leaf.set_requires_grad(true);
  }
  std::vector<std::vector<Real>> analytic;
  {
    GradTape tape;
    TapeScope scope(tape);
    const Tensor y = f();
    if (!std::isfinite(y.item())) throw NumericError("grad_check: non-finite function value");
    tape.backward(y);
  }
  for (auto& leaf : leaves) analytic.push_back(leaf.grad_or_zeros());

  std::mt19937_64 rng(seed);
  Real worst = 0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    std::vector<std::size_t> idx(leaf.numel());
    std::iota(idx.begin(), idx.end(), 0);
    if (max_per_tensor && idx.size() > max_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_tensor);
    }
    auto values = leaf.mutable_data();
    for (std::size_t i : idx) {
      const Real saved = values[i];
      values[i] = saved + h;
      const Real up = eval_plain(f);
      values[i] = saved - h;
      const Real down = eval_plain(f);
      values[i] = saved;
      const Real numeric = (up - down) / (2 * h);
      const Real a = analytic[li][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max<Real>(1.0, std::abs(a)));
    }
  }
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    leaves[li].zero_grad();
    leaves[li].set_requires_grad(previous[li]);
  }
  return worst;
}

Real grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, Real h) {
  Tensor leaf = x.clone();
  Tensor leaves[] = {leaf};
  return grad_check_leaves([&] { return f(leaf); }, leaves, h);
}

}  // namespace hgp
