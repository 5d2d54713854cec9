#pragma once

#include <random>
#include <string>
#include <vector>

#include "hgp/ops.hpp"
#include "hgp/tensor.hpp"

namespace hgp {

using Rng = std::mt19937_64;

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

/// Normal samples truncated to two standard deviations, as a gradient leaf.
Tensor init_trunc_normal(Shape shape, Real stddev, Rng& rng);
Tensor init_zeros(Shape shape);
Tensor init_ones(Shape shape);

/// y = x W + b with W stored as in x out.
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  Real eps = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t d);
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Multi-head attention with learned input and output projections.
struct MultiHeadAttention {
  Linear q_proj, k_proj, v_proj, out_proj;
  std::size_t nhead = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t d_model, std::size_t nhead, Rng& rng);
  /// `mask` is additive (0 or ops::blocked()), queries x keys.
  Tensor operator()(const Tensor& query, const Tensor& key, const Tensor& value,
                    const Tensor* mask = nullptr) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Linear(d -> hidden) -> GELU -> Linear(hidden -> d).
struct FeedForward {
  Linear fc1, fc2;

  FeedForward() = default;
  FeedForward(std::size_t d_model, std::size_t hidden, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Deep copy of every tensor in `params`, preserving names and order.
ParamList clone_params(const ParamList& params);
std::size_t count_values(const ParamList& params);

}  // namespace hgp
