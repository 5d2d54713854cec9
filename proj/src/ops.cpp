#include "hgp/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hgp/error.hpp"

namespace hgp::ops {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using Strided = Eigen::OuterStride<>;
using StridedMap = Eigen::Map<RowMat, 0, Strided>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Strided>;

ConstMatMap as_mat(const Tensor& t) { return ConstMatMap(t.ptr(), t.rows(), t.cols()); }

bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

/// Attaches `backward` to `out` when a tape is active and any input needs a
/// gradient. `backward` receives the gradient of the output.
template <class Backward>
Tensor record(Tensor out, std::initializer_list<const Tensor*> inputs, const char* op,
              Backward&& backward) {
  GradTape* tape = active_tape();
  if (!tape) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor* t) { return wants_grad(*t); });
  if (!any) return out;
  out.set_requires_grad(true);
  tape->push({op, out.node(), std::forward<Backward>(backward)});
  return out;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

Real blocked() { return -std::numeric_limits<Real>::infinity(); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), n = b.dim(1);
  Tensor out({m, n});
  MatMap(out.mutable_ptr(), m, n).noalias() = as_mat(a) * as_mat(b);
  return record(out, {&a, &b}, "matmul", [a, b](std::span<const Real> g) mutable {
    ConstMatMap dc(g.data(), a.dim(0), b.dim(1));
    if (wants_grad(a)) {
      MatMap(a.grad_buffer().data(), a.dim(0), a.dim(1)).noalias() += dc * as_mat(b).transpose();
    }
    if (wants_grad(b)) {
      MatMap(b.grad_buffer().data(), b.dim(0), b.dim(1)).noalias() += as_mat(a).transpose() * dc;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor out({c, r});
  MatMap(out.mutable_ptr(), c, r) = as_mat(a).transpose();
  return record(out, {&a}, "transpose", [a, r, c](std::span<const Real> g) mutable {
    MatMap(a.grad_buffer().data(), r, c) += ConstMatMap(g.data(), c, r).transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return record(out, {&a, &b}, "add", [a, b](std::span<const Real> g) mutable {
    for (const Tensor* t : {&a, &b}) {
      if (!wants_grad(*t)) continue;
      auto d = t->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
  });
}

Tensor scale(const Tensor& a, Real s) {
  Tensor out(a.shape());
  auto o = out.mutable_data();
  const auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * s;
  return record(out, {&a}, "scale", [a, s](std::span<const Real> g) mutable {
    auto d = a.grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * s;
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (b.numel() != x.cols()) {
    throw DimensionError("add_bias: bias " + shape_str(b.shape()) + " vs input " +
                         shape_str(x.shape()));
  }
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(x.shape());
  auto o = out.mutable_data();
  const auto xv = x.data(), bv = b.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) o[i * c + j] = xv[i * c + j] + bv[j];
  }
  return record(out, {&x, &b}, "add_bias", [x, b, r, c](std::span<const Real> g) mutable {
    if (wants_grad(x)) {
      auto d = x.grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    if (wants_grad(b)) {
      auto d = b.grad_buffer();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j];
      }
    }
  });
}

Real gelu(Real x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

Real gelu_grad(Real x) {
  const Real cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const Real pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  const auto xv = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = gelu(xv[i]);
  return record(out, {&x}, "gelu", [x](std::span<const Real> g) mutable {
    auto d = x.grad_buffer();
    const auto xv = x.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * gelu_grad(xv[i]);
  });
}

namespace {

// In-place stable softmax of one row. Returns false if every entry is blocked.
bool softmax_row(Real* row, std::size_t n) {
  Real mx = -std::numeric_limits<Real>::infinity();
  for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
  if (mx == -std::numeric_limits<Real>::infinity()) return false;
  Real total = 0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    total += row[j];
  }
  const Real inv = 1.0 / total;
  for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
  return true;
}

}  // namespace

Tensor softmax(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(x.shape(), std::vector<Real>(x.data().begin(), x.data().end()));
  for (std::size_t i = 0; i < r; ++i) {
    if (!softmax_row(out.mutable_ptr() + i * c, c)) {
      throw DegenerateRowError("softmax: row " + std::to_string(i) + " is fully masked");
    }
  }
  const auto y = out.node();
  return record(out, {&x}, "softmax", [x, y, r, c](std::span<const Real> g) mutable {
    auto d = x.grad_buffer();
    for (std::size_t i = 0; i < r; ++i) {
      const Real* yr = y->data.data() + i * c;
      const Real* gr = g.data() + i * c;
      Real dot = 0;
      for (std::size_t j = 0; j < c; ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < c; ++j) d[i * c + j] += yr[j] * (gr[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("layer_norm: affine params " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " vs input " + shape_str(x.shape()));
  }
  if (!(eps > 0)) throw ConfigError("layer_norm: eps must be positive");
  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<Real>>(r * c);
  auto rstd = std::make_shared<std::vector<Real>>(r);
  const auto xv = x.data(), gv = gamma.data(), bv = beta.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i) {
    const Real* row = xv.data() + i * c;
    Real mu = 0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<Real>(c);
    Real var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<Real>(c);
    const Real rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[i] = rs;
    for (std::size_t j = 0; j < c; ++j) {
      const Real h = (row[j] - mu) * rs;
      (*xhat)[i * c + j] = h;
      o[i * c + j] = h * gv[j] + bv[j];
    }
  }
  return record(out, {&x, &gamma, &beta}, "layer_norm",
                [x, gamma, beta, xhat, rstd, r, c](std::span<const Real> g) mutable {
                  const auto gv = gamma.data();
                  if (wants_grad(x)) {
                    auto d = x.grad_buffer();
                    std::vector<Real> dh(c);
                    for (std::size_t i = 0; i < r; ++i) {
                      Real mean_dh = 0, mean_dh_h = 0;
                      for (std::size_t j = 0; j < c; ++j) {
                        dh[j] = g[i * c + j] * gv[j];
                        mean_dh += dh[j];
                        mean_dh_h += dh[j] * (*xhat)[i * c + j];
                      }
                      mean_dh /= static_cast<Real>(c);
                      mean_dh_h /= static_cast<Real>(c);
                      for (std::size_t j = 0; j < c; ++j) {
                        d[i * c + j] +=
                            (*rstd)[i] * (dh[j] - mean_dh - (*xhat)[i * c + j] * mean_dh_h);
                      }
                    }
                  }
                  if (wants_grad(gamma)) {
                    auto d = gamma.grad_buffer();
                    for (std::size_t i = 0; i < r; ++i) {
                      for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j] * (*xhat)[i * c + j];
                    }
                  }
                  if (wants_grad(beta)) {
                    auto d = beta.grad_buffer();
                    for (std::size_t i = 0; i < r; ++i) {
                      for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j];
                    }
                  }
                });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* mask,
                 std::size_t nhead) {
  require_matrix(q, "attention");
  require_matrix(k, "attention");
  require_matrix(v, "attention");
  const std::size_t rq = q.dim(0), tk = k.dim(0), d = q.dim(1);
  if (k.dim(1) != d || v.dim(1) != d || v.dim(0) != tk) {
    throw DimensionError("attention: q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) +
                         ", v " + shape_str(v.shape()));
  }
  if (nhead == 0 || d % nhead != 0) {
    throw ConfigError("attention: model width " + std::to_string(d) +
                      " is not divisible by head count " + std::to_string(nhead));
  }
  if (mask && (mask->rank() != 2 || mask->dim(0) != rq || mask->dim(1) != tk)) {
    throw DimensionError("attention: mask " + shape_str(mask->shape()) + " for " +
                         std::to_string(rq) + " queries and " + std::to_string(tk) + " keys");
  }
  const std::size_t dh = d / nhead;
  const Real sc = 1.0 / std::sqrt(static_cast<Real>(dh));
  Tensor out({rq, d});
  // Attention probabilities per head, kept for the backward pass.
  auto probs = std::make_shared<std::vector<Real>>(nhead * rq * tk);
  for (std::size_t h = 0; h < nhead; ++h) {
    ConstStridedMap qh(q.ptr() + h * dh, rq, dh, Strided(d));
    ConstStridedMap kh(k.ptr() + h * dh, tk, dh, Strided(d));
    ConstStridedMap vh(v.ptr() + h * dh, tk, dh, Strided(d));
    MatMap p(probs->data() + h * rq * tk, rq, tk);
    p.noalias() = sc * (qh * kh.transpose());
    if (mask) p += as_mat(*mask);
    for (std::size_t i = 0; i < rq; ++i) {
      if (!softmax_row(p.data() + i * tk, tk)) {
        throw DegenerateRowError("attention: query row " + std::to_string(i) +
                                 " has every key blocked");
      }
    }
    StridedMap oh(out.mutable_ptr() + h * dh, rq, dh, Strided(d));
    oh.noalias() = p * vh;
  }
  return record(out, {&q, &k, &v}, "attention",
                [q, k, v, probs, rq, tk, d, dh, nhead, sc](std::span<const Real> g) mutable {
                  RowMat dp(rq, tk);
                  for (std::size_t h = 0; h < nhead; ++h) {
                    ConstMatMap p(probs->data() + h * rq * tk, rq, tk);
                    ConstStridedMap go(g.data() + h * dh, rq, dh, Strided(d));
                    ConstStridedMap qh(q.ptr() + h * dh, rq, dh, Strided(d));
                    ConstStridedMap kh(k.ptr() + h * dh, tk, dh, Strided(d));
                    ConstStridedMap vh(v.ptr() + h * dh, tk, dh, Strided(d));
                    if (wants_grad(v)) {
                      StridedMap dv(v.grad_buffer().data() + h * dh, tk, dh, Strided(d));
                      dv.noalias() += p.transpose() * go;
                    }
                    if (!wants_grad(q) && !wants_grad(k)) continue;
                    dp.noalias() = go * vh.transpose();
                    // dS = P * (dP - rowsum(dP * P))
                    for (std::size_t i = 0; i < rq; ++i) {
                      const Real dot = dp.row(i).dot(p.row(i));
                      dp.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
                    }
                    if (wants_grad(q)) {
                      StridedMap dq(q.grad_buffer().data() + h * dh, rq, dh, Strided(d));
                      dq.noalias() += sc * (dp * kh);
                    }
                    if (wants_grad(k)) {
                      StridedMap dk(k.grad_buffer().data() + h * dh, tk, dh, Strided(d));
                      dk.noalias() += sc * (dp.transpose() * qh);
                    }
                  }
                });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts differ, " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out({r, ca + cb});
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(a.ptr() + i * ca, ca, o.data() + i * (ca + cb));
    std::copy_n(b.ptr() + i * cb, cb, o.data() + i * (ca + cb) + ca);
  }
  return record(out, {&a, &b}, "concat_cols", [a, b, r, ca, cb](std::span<const Real> g) mutable {
    if (wants_grad(a)) {
      auto d = a.grad_buffer();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < ca; ++j) d[i * ca + j] += g[i * (ca + cb) + j];
      }
    }
    if (wants_grad(b)) {
      auto d = b.grad_buffer();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < cb; ++j) d[i * cb + j] += g[i * (ca + cb) + ca + j];
      }
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) {
      throw DimensionError("concat_rows: column counts differ, " + shape_str(parts.front().shape()) +
                           " and " + shape_str(p.shape()));
    }
    r += p.rows();
  }
  std::vector<Real> values;
  values.reserve(r * c);
  for (const auto& p : parts) values.insert(values.end(), p.data().begin(), p.data().end());
  Tensor out({r, c}, std::move(values));
  GradTape* tape = active_tape();
  const bool any = std::any_of(parts.begin(), parts.end(), wants_grad);
  if (!tape || !any) return out;
  out.set_requires_grad(true);
  tape->push({"concat_rows", out.node(), [parts](std::span<const Real> g) mutable {
                std::size_t offset = 0;
                for (auto& p : parts) {
                  if (wants_grad(p)) {
                    auto d = p.grad_buffer();
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[offset + i];
                  }
                  offset += p.numel();
                }
              }});
  return out;
}

Tensor repeat_rows(const Tensor& x, std::size_t times) {
  if (times == 0) throw DimensionError("repeat_rows: repeat count must be positive");
  const std::size_t n = x.numel();
  std::vector<Real> values;
  values.reserve(n * times);
  for (std::size_t t = 0; t < times; ++t) values.insert(values.end(), x.data().begin(), x.data().end());
  Tensor out({x.rows() * times, x.cols()}, std::move(values));
  return record(out, {&x}, "repeat_rows", [x, n, times](std::span<const Real> g) mutable {
    auto d = x.grad_buffer();
    for (std::size_t t = 0; t < times; ++t) {
      for (std::size_t i = 0; i < n; ++i) d[i] += g[t * n + i];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + shape_str(x.shape()));
  }
  const std::size_t c = x.cols();
  Tensor out({count, c}, std::vector<Real>(x.ptr() + begin * c, x.ptr() + (begin + count) * c));
  return record(out, {&x}, "slice_rows", [x, begin, c](std::span<const Real> g) mutable {
    auto d = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) d[begin * c + i] += g[i];
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_matrix(table, "embedding");
  const std::size_t vocab = table.dim(0), c = table.dim(1);
  if (ids.empty()) throw DimensionError("embedding: no ids");
  Tensor out({ids.size(), c});
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw VocabularyError("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                            std::to_string(vocab));
    }
    std::copy_n(table.ptr() + ids[i] * c, c, o.data() + i * c);
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return record(out, {&table}, "embedding",
                [table, saved = std::move(saved), c](std::span<const Real> g) mutable {
                  auto d = table.grad_buffer();
                  for (std::size_t i = 0; i < saved.size(); ++i) {
                    for (std::size_t j = 0; j < c; ++j) d[saved[i] * c + j] += g[i * c + j];
                  }
                });
}

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  return record(Tensor::scalar(total), {&x}, "sum", [x](std::span<const Real> g) mutable {
    for (auto& d : x.grad_buffer()) d += g[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<Real>(x.numel())); }

Tensor weighted_sum(const Tensor& x, const Tensor& w) {
  require_same_shape(x, w, "weighted_sum");
  Real total = 0;
  const auto xv = x.data(), wv = w.data();
  for (std::size_t i = 0; i < xv.size(); ++i) total += xv[i] * wv[i];
  return record(Tensor::scalar(total), {&x}, "weighted_sum", [x, w](std::span<const Real> g) mutable {
    auto d = x.grad_buffer();
    const auto wv = w.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0] * wv[i];
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     std::span<const std::uint8_t> include) {
  const std::size_t r = logits.rows(), c = logits.cols();
  if (targets.size() != r || include.size() != r) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets and " +
                         std::to_string(include.size()) + " flags for logits " +
                         shape_str(logits.shape()));
  }
  auto probs = std::make_shared<std::vector<Real>>(logits.data().begin(), logits.data().end());
  std::size_t count = 0;
  Real total = 0;
  for (std::size_t i = 0; i < r; ++i) {
    if (!include[i]) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c) {
      throw VocabularyError("cross_entropy: target " + std::to_string(targets[i]) +
                            " outside " + std::to_string(c) + " classes");
    }
    Real* row = probs->data() + i * c;
    Real mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    Real se = 0;
    for (std::size_t j = 0; j < c; ++j) se += std::exp(row[j] - mx);
    const Real lse = mx + std::log(se);
    total += lse - row[targets[i]];
    for (std::size_t j = 0; j < c; ++j) row[j] = std::exp(row[j] - lse);
    ++count;
  }
  const Real inv = count ? 1.0 / static_cast<Real>(count) : 0.0;
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<std::uint8_t> inc(include.begin(), include.end());
  return record(Tensor::scalar(total * inv), {&logits}, "cross_entropy",
                [logits, probs, tg = std::move(tg), inc = std::move(inc), inv, r,
                 c](std::span<const Real> g) mutable {
                  if (inv == 0) return;
                  auto d = logits.grad_buffer();
                  const Real s = g[0] * inv;
                  for (std::size_t i = 0; i < r; ++i) {
                    if (!inc[i]) continue;
                    const Real* p = probs->data() + i * c;
                    for (std::size_t j = 0; j < c; ++j) d[i * c + j] += s * p[j];
                    d[i * c + tg[i]] -= s;
                  }
                });
}

}  // namespace hgp::ops
