#include "hgp/nn.hpp"

#include "hgp/error.hpp"

namespace hgp {

Tensor init_trunc_normal(Shape shape, Real stddev, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<Real> dist(0.0, 1.0);
  for (auto& v : t.mutable_data()) {
    Real s = dist(rng);
    while (s < -2.0 || s > 2.0) s = dist(rng);
    v = s * stddev;
  }
  t.set_requires_grad(true);
  return t;
}

Tensor init_zeros(Shape shape) {
  Tensor t(std::move(shape), 0.0);
  t.set_requires_grad(true);
  return t;
}

Tensor init_ones(Shape shape) {
  Tensor t(std::move(shape), 1.0);
  t.set_requires_grad(true);
  return t;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(init_trunc_normal({in, out}, 0.02, rng)), bias(init_zeros({out})) {}

Tensor Linear::operator()(const Tensor& x) const {
  return ops::add_bias(ops::matmul(x, weight), bias);
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t d) : gamma(init_ones({d})), beta(init_zeros({d})) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return ops::layer_norm(x, gamma, beta, eps); }

void LayerNorm::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

MultiHeadAttention::MultiHeadAttention(std::size_t d_model, std::size_t heads, Rng& rng)
    : q_proj(d_model, d_model, rng),
      k_proj(d_model, d_model, rng),
      v_proj(d_model, d_model, rng),
      out_proj(d_model, d_model, rng),
      nhead(heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("attention width " + std::to_string(d_model) +
                      " is not divisible by head count " + std::to_string(heads));
  }
}

Tensor MultiHeadAttention::operator()(const Tensor& query, const Tensor& key, const Tensor& value,
                                      const Tensor* mask) const {
  const Tensor q = q_proj(query);
  const Tensor k = k_proj(key);
  const Tensor v = v_proj(value);
  return out_proj(ops::attention(q, k, v, mask, nhead));
}

void MultiHeadAttention::collect(ParamList& out, const std::string& prefix) const {
  q_proj.collect(out, prefix + ".q");
  k_proj.collect(out, prefix + ".k");
  v_proj.collect(out, prefix + ".v");
  out_proj.collect(out, prefix + ".out");
}

FeedForward::FeedForward(std::size_t d_model, std::size_t hidden, Rng& rng)
    : fc1(d_model, hidden, rng), fc2(hidden, d_model, rng) {
  if (hidden == 0) throw ConfigError("feed-forward hidden width must be positive");
}

Tensor FeedForward::operator()(const Tensor& x) const { return fc2(ops::gelu(fc1(x))); }

void FeedForward::collect(ParamList& out, const std::string& prefix) const {
  fc1.collect(out, prefix + ".fc1");
  fc2.collect(out, prefix + ".fc2");
}

ParamList clone_params(const ParamList& params) {
  ParamList out;
  out.reserve(params.size());
  for (const auto& p : params) {
    Tensor t = p.tensor.clone();
    t.set_requires_grad(p.tensor.requires_grad());
    out.push_back({p.name, t});
  }
  return out;
}

std::size_t count_values(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

}  // namespace hgp
