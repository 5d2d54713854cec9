#include "hgp/gradsuite.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <random>

#include "hgp/gradcheck.hpp"
#include "hgp/model.hpp"
#include "hgp/ops.hpp"

namespace hgp {

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, Real lo = -1.0, Real hi = 1.0) {
  std::uniform_real_distribution<Real> dist(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.mutable_data()) v = dist(rng);
  return t;
}

// Reduces a tensor-valued function to a scalar with fixed random weights so
// every output element contributes a distinct cotangent.
std::function<Tensor(const Tensor&)> projected(std::function<Tensor(const Tensor&)> f, std::uint64_t seed) {
  return [f = std::move(f), seed](const Tensor& x) {
    const Tensor y = f(x);
    std::mt19937_64 rng(seed);
    return ops::weighted_sum(y, random_tensor(y.shape(), rng));
  };
}

class Ledger {
 public:
  void record(const std::string& name, Real err) {
    auto [it, fresh] = index_.try_emplace(name, results_.size());
    if (fresh) results_.push_back({name, 0, 0});
    auto& r = results_[it->second];
    r.max_rel_error = std::max(r.max_rel_error, err);
    ++r.checks;
  }
  std::vector<GradCheckResult> take() { return std::move(results_); }

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<GradCheckResult> results_;
};

void check_ops(Ledger& out, std::size_t trials, std::mt19937_64& rng) {
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::uint64_t s = rng();
    const Tensor x = random_tensor({4, 5}, rng);
    const Tensor other = random_tensor({4, 5}, rng);
    const Tensor right = random_tensor({5, 3}, rng);
    const Tensor bias = random_tensor({5}, rng);
    const Tensor gamma = random_tensor({5}, rng), beta = random_tensor({5}, rng);
    const Tensor kv = random_tensor({6, 4}, rng);
    const Tensor q = random_tensor({3, 4}, rng);
    Tensor mask({3, 6}, 0.0);
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = r + 1; c < 6; c += 2) mask.mutable_data()[r * 6 + c] = ops::blocked();
    }
    const std::vector<int> ids = {0, 3, 3, 1};
    const std::vector<int> targets = {1, 4, 0, 2};
    const std::vector<std::uint8_t> include = {1, 0, 1, 1};

    out.record("matmul", grad_check(projected([&](const Tensor& a) { return ops::matmul(a, right); }, s), x));
    out.record("transpose", grad_check(projected([&](const Tensor& a) { return ops::transpose(a); }, s), x));
    out.record("add", grad_check(projected([&](const Tensor& a) { return ops::add(a, other); }, s), x));
    out.record("scale", grad_check(projected([&](const Tensor& a) { return ops::scale(a, -1.7); }, s), x));
    out.record("add_bias", grad_check(projected([&](const Tensor& b) { return ops::add_bias(other, b); }, s), bias));
    out.record("gelu", grad_check(projected([&](const Tensor& a) { return ops::gelu(a); }, s), x));
    out.record("softmax", grad_check(projected([&](const Tensor& a) { return ops::softmax(a); }, s), x));
    out.record("layer_norm",
               grad_check(projected([&](const Tensor& a) { return ops::layer_norm(a, gamma, beta); }, s), x));
    out.record("layer_norm.gamma",
               grad_check(projected([&](const Tensor& g) { return ops::layer_norm(x, g, beta); }, s), gamma));
    out.record("layer_norm.beta",
               grad_check(projected([&](const Tensor& b) { return ops::layer_norm(x, gamma, b); }, s), beta));
    out.record("concat_cols", grad_check(projected([&](const Tensor& a) { return ops::concat_cols(a, other); }, s), x));
    out.record("concat_rows",
               grad_check(projected([&](const Tensor& a) { return ops::concat_rows({other, a}); }, s), x));
    out.record("repeat_rows", grad_check(projected([&](const Tensor& a) { return ops::repeat_rows(a, 3); }, s), x));
    out.record("slice_rows", grad_check(projected([&](const Tensor& a) { return ops::slice_rows(a, 1, 2); }, s), x));
    out.record("embedding", grad_check(projected([&](const Tensor& t) { return ops::embedding(t, ids); }, s), x));
    out.record("sum", grad_check([&](const Tensor& a) { return ops::sum(a); }, x));
    out.record("mean", grad_check([&](const Tensor& a) { return ops::mean(a); }, x));
    out.record("cross_entropy", grad_check([&](const Tensor& a) { return ops::cross_entropy(a, targets, include); }, x));
    out.record("attention.q",
               grad_check(projected([&](const Tensor& a) { return ops::attention(a, kv, kv, &mask, 2); }, s), q));
    out.record("attention.k",
               grad_check(projected([&](const Tensor& a) { return ops::attention(q, a, kv, &mask, 2); }, s), kv));
    out.record("attention.v",
               grad_check(projected([&](const Tensor& a) { return ops::attention(q, kv, a, &mask, 2); }, s), kv));
  }
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.input_h = 8;
  m.input_w = 32;  // 4x8 patches -> N = 8 tokens
  m.d_model = 32;
  m.enc_layers = 2;
  m.enc_heads = 2;
  m.knn_k = 3;
  m.max_len = 4;
  return m;
}

void check_model(Ledger& out, std::mt19937_64& rng) {
  const ModelConfig cfg = tiny_model();
  const Model model(cfg, rng());
  const std::size_t patch_dim = cfg.patch_h * cfg.patch_w * 3;
  ModelInput input{random_tensor({8, patch_dim}, rng, 0, 1), random_tensor({8, patch_dim}, rng, 0, 1)};

  // kNN selection is piecewise constant, so the graph is frozen for the probe
  Hypergraph graph;
  EncodeOptions build;
  build.graph_out = &graph;
  model.encode(input, Modality::fused, build);
  EncodeOptions frozen;
  frozen.fixed_graph = &graph;

  const EncodedLabel label = encode_label("K1+2", model.charset(), cfg.max_len);
  const PermutationSet perms = sample_permutations(cfg.max_len, 6, rng());
  const AttentionMask stacked = AttentionMask::stack(perms.masks);
  std::vector<int> targets;
  for (std::size_t k = 0; k < perms.masks.size(); ++k) {
    targets.insert(targets.end(), label.targets.begin(), label.targets.end());
  }
  std::vector<std::uint8_t> include(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) include[i] = targets[i] != model.charset().pad();

  const auto loss_of = [&](const ModelInput& in) {
    const Tensor z = model.encode(in, Modality::fused, frozen);
    return ops::cross_entropy(model.decode(z, label.context, stacked), targets, include);
  };

  ParamList params = model.params();
  std::vector<Tensor> leaves;
  for (auto& p : params) leaves.push_back(p.tensor);
  out.record("model.params", grad_check_leaves([&] { return loss_of(input); }, leaves, 1e-5, 16, rng()));
  out.record("model.rgb_input", grad_check(
                                    [&](const Tensor& x) {
                                      return loss_of({x, input.event_patches});
                                    },
                                    input.rgb_patches));
  out.record("model.event_input", grad_check(
                                      [&](const Tensor& x) {
                                        return loss_of({input.rgb_patches, x});
                                      },
                                      input.event_patches));
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Ledger ledger;
  check_ops(ledger, trials, rng);
  check_model(ledger, rng);
  return ledger.take();
}

}  // namespace hgp
