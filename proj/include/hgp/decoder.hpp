#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgp/nn.hpp"

namespace hgp {

/// Ordered recognisable symbols plus the [E], [B] and [P] specials.
///
/// Ids 0..C-1 are symbols, C is [E] (the only special the output head
/// predicts), C+1 is [B] and C+2 is [P].
class Charset {
 public:
  explicit Charset(std::string symbols);

  std::size_t size() const { return symbols_.size(); }
  int eos() const { return static_cast<int>(symbols_.size()); }
  int bos() const { return eos() + 1; }
  int pad() const { return eos() + 2; }
  /// Rows of the context embedding table.
  std::size_t vocab_size() const { return symbols_.size() + 3; }
  /// Classes of the output head: the symbols plus [E].
  std::size_t num_classes() const { return symbols_.size() + 1; }

  bool contains(char c) const;
  int id(char c) const;
  char symbol(int id) const;
  const std::string& symbols() const { return symbols_; }

 private:
  std::string symbols_;
  int lookup_[256];
};

struct EncodedLabel {
  std::vector<int> context;  // [B] + symbols, padded with [P], length T+1
  std::vector<int> targets;  // symbols + [E], padded with [P], length T+1
  std::size_t length = 0;
};

EncodedLabel encode_label(std::string_view text, const Charset& charset, std::size_t max_len);
/// Symbols up to the first [E]; [B]/[P] are skipped.
std::string decode_ids(std::span<const int> ids, const Charset& charset);

/// Permutation of label positions 0..T-1: perm[i] is the position generated
/// i-th.
using Permutation = std::vector<std::size_t>;

/// Boolean attention mask, queries x keys.
class AttentionMask {
 public:
  AttentionMask() = default;
  AttentionMask(std::size_t rows, std::size_t cols, bool allow_all = false);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool allowed(std::size_t r, std::size_t c) const { return allow_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool allow) { allow_[r * cols_ + c] = allow ? 1 : 0; }
  /// 0 for allowed entries, ops::blocked() otherwise.
  Tensor additive() const;
  /// Row-wise stacking of masks with equal column counts.
  static AttentionMask stack(const std::vector<AttentionMask>& masks);
  /// Textbook causal mask: output position j sees context positions 0..j.
  static AttentionMask causal(std::size_t max_len);
  bool operator==(const AttentionMask&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> allow_;
};

/// (T+1) x (T+1) mask for `perm`. Query row q predicts target q; context
/// column c holds [B] for c = 0 and label position c-1 otherwise. Row q
/// admits [B] and every label position generated before q. The final row
/// (the position after a full-length label) comes after all of perm.
AttentionMask perm_to_mask(const Permutation& perm, std::size_t max_len);

struct PermutationSet {
  std::size_t max_len = 0;
  std::vector<Permutation> perms;
  std::vector<AttentionMask> masks;
};

/// perms[0] is the identity; for K >= 2 perms[1] is its reverse, and the
/// remaining slots hold distinct uniformly drawn permutations, each followed
/// by its reverse (the last one unpaired when K is odd).
PermutationSet sample_permutations(std::size_t max_len, std::size_t k, std::uint64_t seed);

std::uint64_t factorial_capped(std::size_t n, std::uint64_t cap);

struct DecoderConfig {
  std::size_t d_model = 128;
  std::size_t nhead = 4;  // d_model / 32 by default
  std::size_t max_len = 10;
  std::size_t mlp_hidden = 512;
  std::size_t depth = 1;

  void validate() const;
};

struct DecoderLayer {
  LayerNorm ln_query, ln_context;
  MultiHeadAttention self_attn;
  LayerNorm ln_cross;
  MultiHeadAttention cross_attn;
  LayerNorm ln_mlp;
  FeedForward mlp;

  DecoderLayer() = default;
  DecoderLayer(const DecoderConfig& cfg, Rng& rng);
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Position-query decoder:
///   h_c = p + MHA(LN(p), LN(c), LN(c), m)
///   h_i = h_c + MHA(LN(h_c), z, z)
///   h   = h_i + MLP(LN(h_i))
///   y   = Linear(LN(h))
class PermDecoder {
 public:
  PermDecoder() = default;
  PermDecoder(const DecoderConfig& cfg, const Charset& charset, Rng& rng);

  /// `context` holds L <= T+1 ids. `mask` has L columns and R*L rows; the
  /// position queries are tiled R times so several permutation masks can be
  /// evaluated in one pass. Context columns holding [P] are blocked for every
  /// query. Returns (R*L) x (C+1) logits.
  Tensor forward(const Tensor& image_tokens, std::span<const int> context,
                 const AttentionMask& mask) const;

  /// Left-to-right greedy decoding under the causal mask.
  std::string greedy_decode(const Tensor& image_tokens) const;

  const DecoderConfig& config() const { return cfg_; }
  const Charset& charset() const { return charset_; }
  Linear& head() { return head_; }
  void collect(ParamList& out, const std::string& prefix) const;

 private:
  DecoderConfig cfg_;
  Charset charset_{""};
  Tensor context_embed_;  // vocab x d
  Tensor context_pos_;    // (T+1) x d
  Tensor pos_queries_;    // (T+1) x d
  std::vector<DecoderLayer> layers_;
  LayerNorm final_ln_;
  Linear head_;
};

}  // namespace hgp
