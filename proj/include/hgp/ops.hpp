#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hgp/tensor.hpp"

// Differentiable primitives. Unless stated otherwise every op expects rank-2
// operands (rows x cols); rank-1 tensors are accepted where noted and are
// treated as a single row. Broadcasting is limited to add_bias.
namespace hgp::ops {

/// Additive mask value for a blocked attention entry.
Real blocked();

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real s);
/// x[r, :] + b for every row r.
Tensor add_bias(const Tensor& x, const Tensor& b);

Real gelu(Real x);
Real gelu_grad(Real x);
/// Exact (erf-based) GELU.
Tensor gelu(const Tensor& x);

/// Row-wise softmax over the last axis. Entries equal to blocked() come out
/// as exactly zero; a row that is blocked everywhere raises DegenerateRowError.
Tensor softmax(const Tensor& x);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps = 1e-5);

/// Multi-head scaled dot-product attention without projections.
///
/// q is Rq x d, k and v are Tk x d. Each head h uses columns
/// [h*d/nhead, (h+1)*d/nhead) and the scale 1/sqrt(d/nhead). `mask`, when
/// given, is an additive Rq x Tk tensor holding 0 (allow) or blocked().
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* mask,
                 std::size_t nhead);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor repeat_rows(const Tensor& x, std::size_t times);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);

/// Gathers rows of `table` (vocab x d).
Tensor embedding(const Tensor& table, std::span<const int> ids);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// sum(x * w) with w treated as a constant.
Tensor weighted_sum(const Tensor& x, const Tensor& w);

/// Mean over rows with include[r] != 0 of -log softmax(logits[r])[targets[r]].
/// Returns 0 when no row is included.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     std::span<const std::uint8_t> include);

}  // namespace hgp::ops
