#include "hgp/decoder.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "hgp/error.hpp"

namespace hgp {

Charset::Charset(std::string symbols) : symbols_(std::move(symbols)) {
  std::fill(std::begin(lookup_), std::end(lookup_), -1);
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    auto& slot = lookup_[static_cast<unsigned char>(symbols_[i])];
    if (slot != -1) throw ConfigError(std::string("duplicate charset symbol '") + symbols_[i] + "'");
    slot = static_cast<int>(i);
  }
}

bool Charset::contains(char c) const { return lookup_[static_cast<unsigned char>(c)] != -1; }

int Charset::id(char c) const {
  const int v = lookup_[static_cast<unsigned char>(c)];
  if (v < 0) throw VocabularyError(std::string("character '") + c + "' is not in the charset");
  return v;
}

char Charset::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
    throw VocabularyError("id " + std::to_string(id) + " is not a charset symbol");
  }
  return symbols_[static_cast<std::size_t>(id)];
}

EncodedLabel encode_label(std::string_view text, const Charset& charset, std::size_t max_len) {
  if (text.empty()) throw LengthError("labels must be non-empty");
  if (text.size() > max_len) {
    throw LengthError("label '" + std::string(text) + "' is longer than " + std::to_string(max_len));
  }
  EncodedLabel out;
  out.length = text.size();
  out.context.assign(max_len + 1, charset.pad());
  out.targets.assign(max_len + 1, charset.pad());
  out.context[0] = charset.bos();
  for (std::size_t i = 0; i < text.size(); ++i) {
    const int id = charset.id(text[i]);
    out.context[i + 1] = id;
    out.targets[i] = id;
  }
  out.targets[text.size()] = charset.eos();
  return out;
}

std::string decode_ids(std::span<const int> ids, const Charset& charset) {
  std::string out;
  for (int id : ids) {
    if (id == charset.eos()) break;
    if (id == charset.bos() || id == charset.pad()) continue;
    out.push_back(charset.symbol(id));
  }
  return out;
}

AttentionMask::AttentionMask(std::size_t rows, std::size_t cols, bool allow_all)
    : rows_(rows), cols_(cols), allow_(rows * cols, allow_all ? 1 : 0) {}

Tensor AttentionMask::additive() const {
  Tensor t({rows_, cols_}, 0.0);
  auto v = t.mutable_data();
  for (std::size_t i = 0; i < allow_.size(); ++i) {
    if (!allow_[i]) v[i] = ops::blocked();
  }
  return t;
}

AttentionMask AttentionMask::stack(const std::vector<AttentionMask>& masks) {
  if (masks.empty()) throw DimensionError("cannot stack zero masks");
  const std::size_t cols = masks.front().cols();
  std::size_t rows = 0;
  for (const auto& m : masks) {
    if (m.cols() != cols) throw DimensionError("stacked masks differ in key count");
    rows += m.rows();
  }
  AttentionMask out(rows, cols);
  std::size_t offset = 0;
  for (const auto& m : masks) {
    std::copy(m.allow_.begin(), m.allow_.end(), out.allow_.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += m.allow_.size();
  }
  return out;
}

AttentionMask AttentionMask::causal(std::size_t max_len) {
  AttentionMask m(max_len + 1, max_len + 1);
  for (std::size_t q = 0; q <= max_len; ++q) {
    for (std::size_t c = 0; c <= q; ++c) m.set(q, c, true);
  }
  return m;
}

AttentionMask perm_to_mask(const Permutation& perm, std::size_t max_len) {
  if (perm.size() != max_len) {
    throw ValidationError("permutation has " + std::to_string(perm.size()) + " entries, expected " +
                          std::to_string(max_len));
  }
  std::vector<bool> seen(max_len, false);
  for (auto p : perm) {
    if (p >= max_len || seen[p]) throw ValidationError("not a permutation of 0.." + std::to_string(max_len - 1));
    seen[p] = true;
  }
  AttentionMask m(max_len + 1, max_len + 1);
  for (std::size_t q = 0; q <= max_len; ++q) m.set(q, 0, true);
  for (std::size_t i = 0; i < max_len; ++i) {
    for (std::size_t j = 0; j < i; ++j) m.set(perm[i], perm[j] + 1, true);
  }
  for (std::size_t c = 1; c <= max_len; ++c) m.set(max_len, c, true);
  return m;
}

std::uint64_t factorial_capped(std::size_t n, std::uint64_t cap) {
  std::uint64_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) {
    if (f > cap / i) return cap;
    f *= i;
  }
  return std::min(f, cap);
}

PermutationSet sample_permutations(std::size_t max_len, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("need at least one permutation");
  if (max_len < 1) throw ConfigError("permutations need a positive length");
  if (factorial_capped(max_len, k) < k) {
    throw ConfigError(std::to_string(k) + " permutations requested but only " +
                      std::to_string(factorial_capped(max_len, k)) + " exist for length " +
                      std::to_string(max_len));
  }
  PermutationSet set;
  set.max_len = max_len;
  Permutation identity(max_len);
  std::iota(identity.begin(), identity.end(), 0);
  set.perms.push_back(identity);
  std::set<Permutation> used{identity};
  const auto add_with_reverse = [&](const Permutation& p) {
    set.perms.push_back(p);
    used.insert(p);
    if (set.perms.size() < k) {
      Permutation r(p.rbegin(), p.rend());
      set.perms.push_back(r);
      used.insert(r);
    }
  };
  if (k >= 2) {
    Permutation rev(identity.rbegin(), identity.rend());
    set.perms.push_back(rev);
    used.insert(rev);
  }
  std::mt19937_64 rng(seed);
  while (set.perms.size() < k) {
    Permutation p = identity;
    for (std::size_t i = max_len; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(p[i - 1], p[pick(rng)]);
    }
    if (used.count(p)) continue;
    add_with_reverse(p);
  }
  for (const auto& p : set.perms) set.masks.push_back(perm_to_mask(p, max_len));
  return set;
}

void DecoderConfig::validate() const {
  if (d_model == 0 || nhead == 0 || d_model % nhead != 0) {
    throw ConfigError("decoder width " + std::to_string(d_model) +
                      " is not divisible by head count " + std::to_string(nhead));
  }
  if (max_len < 1) throw ConfigError("decoder max label length must be positive");
  if (mlp_hidden == 0) throw ConfigError("decoder MLP width must be positive");
  if (depth < 1) throw ConfigError("decoder depth must be at least 1");
}

DecoderLayer::DecoderLayer(const DecoderConfig& cfg, Rng& rng)
    : ln_query(cfg.d_model),
      ln_context(cfg.d_model),
      self_attn(cfg.d_model, cfg.nhead, rng),
      ln_cross(cfg.d_model),
      cross_attn(cfg.d_model, cfg.nhead, rng),
      ln_mlp(cfg.d_model),
      mlp(cfg.d_model, cfg.mlp_hidden, rng) {}

void DecoderLayer::collect(ParamList& out, const std::string& prefix) const {
  ln_query.collect(out, prefix + ".ln_query");
  ln_context.collect(out, prefix + ".ln_context");
  self_attn.collect(out, prefix + ".self_attn");
  ln_cross.collect(out, prefix + ".ln_cross");
  cross_attn.collect(out, prefix + ".cross_attn");
  ln_mlp.collect(out, prefix + ".ln_mlp");
  mlp.collect(out, prefix + ".mlp");
}

PermDecoder::PermDecoder(const DecoderConfig& cfg, const Charset& charset, Rng& rng)
    : cfg_(cfg), charset_(charset) {
  cfg.validate();
  context_embed_ = init_trunc_normal({charset.vocab_size(), cfg.d_model}, 0.02, rng);
  context_pos_ = init_trunc_normal({cfg.max_len + 1, cfg.d_model}, 0.02, rng);
  pos_queries_ = init_trunc_normal({cfg.max_len + 1, cfg.d_model}, 0.02, rng);
  for (std::size_t i = 0; i < cfg.depth; ++i) layers_.emplace_back(cfg, rng);
  final_ln_ = LayerNorm(cfg.d_model);
  head_ = Linear(cfg.d_model, charset.num_classes(), rng);
}

Tensor PermDecoder::forward(const Tensor& image_tokens, std::span<const int> context,
                            const AttentionMask& mask) const {
  const std::size_t len = context.size();
  if (len == 0 || len > cfg_.max_len + 1) {
    throw LengthError("context of " + std::to_string(len) + " tokens for max length " +
                      std::to_string(cfg_.max_len));
  }
  if (mask.cols() != len || mask.rows() == 0 || mask.rows() % len != 0) {
    throw DimensionError("mask " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                         " does not fit a context of " + std::to_string(len));
  }
  if (image_tokens.cols() != cfg_.d_model) {
    throw DimensionError("image tokens " + shape_str(image_tokens.shape()) + " for decoder width " +
                         std::to_string(cfg_.d_model));
  }
  AttentionMask effective = mask;
  for (std::size_t c = 0; c < len; ++c) {
    if (context[c] != charset_.pad()) continue;
    for (std::size_t r = 0; r < mask.rows(); ++r) effective.set(r, c, false);
  }
  const Tensor additive = effective.additive();

  const Tensor ctx = ops::add(ops::embedding(context_embed_, context),
                              ops::slice_rows(context_pos_, 0, len));
  Tensor h = ops::repeat_rows(ops::slice_rows(pos_queries_, 0, len), mask.rows() / len);
  for (const auto& layer : layers_) {
    const Tensor ctx_n = layer.ln_context(ctx);
    const Tensor hc = ops::add(h, layer.self_attn(layer.ln_query(h), ctx_n, ctx_n, &additive));
    const Tensor hi = ops::add(hc, layer.cross_attn(layer.ln_cross(hc), image_tokens, image_tokens));
    h = ops::add(hi, layer.mlp(layer.ln_mlp(hi)));
  }
  return head_(final_ln_(h));
}

std::string PermDecoder::greedy_decode(const Tensor& image_tokens) const {
  const std::size_t t = cfg_.max_len;
  std::vector<int> ids(t + 1, charset_.pad());
  ids[0] = charset_.bos();
  const AttentionMask causal = AttentionMask::causal(t);
  const std::size_t classes = charset_.num_classes();
  std::string out;
  for (std::size_t step = 0; step < t; ++step) {
    const Tensor logits = forward(image_tokens, ids, causal);
    const Real* row = logits.ptr() + step * classes;
    const auto best = static_cast<int>(std::max_element(row, row + classes) - row);
    if (best == charset_.eos()) break;
    ids[step + 1] = best;
    out.push_back(charset_.symbol(best));
  }
  return out;
}

void PermDecoder::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".context_embed", context_embed_});
  out.push_back({prefix + ".context_pos", context_pos_});
  out.push_back({prefix + ".pos_queries", pos_queries_});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(out, prefix + ".layer" + std::to_string(i));
  }
  final_ln_.collect(out, prefix + ".final_ln");
  head_.collect(out, prefix + ".head");
}

}  // namespace hgp
