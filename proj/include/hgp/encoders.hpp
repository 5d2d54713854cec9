#pragma once

#include <set>
#include <vector>

#include "hgp/image.hpp"
#include "hgp/nn.hpp"

namespace hgp {

struct PatchEmbedConfig {
  std::size_t input_h = 32;
  std::size_t input_w = 128;
  std::size_t patch_h = 4;
  std::size_t patch_w = 8;
  std::size_t channels = 3;
  std::size_t d_model = 128;

  std::size_t tokens() const { return (input_h / patch_h) * (input_w / patch_w); }
  std::size_t patch_dim() const { return patch_h * patch_w * channels; }
  /// Throws ConfigError unless the input divides evenly into patches.
  void validate() const;
};

struct EncoderConfig {
  std::size_t layers = 4;
  std::size_t d_model = 128;
  std::size_t nhead = 4;
  std::size_t ffn_hidden = 512;

  void validate() const;
};

/// Splits an image into non-overlapping patches, one row per patch in raster
/// order over the patch grid, each row laid out channel-major. Single-channel
/// planes are replicated to cfg.channels first.
Tensor patchify(const ImagePlane& img, const PatchEmbedConfig& cfg);

/// Linear patch projection plus a learned positional table.
struct PatchEmbed {
  Linear proj;
  Tensor pos;

  PatchEmbed() = default;
  PatchEmbed(const PatchEmbedConfig& cfg, Rng& rng);
  /// `patches` is tokens x patch_dim as produced by patchify().
  Tensor operator()(const Tensor& patches) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Pre-LN transformer block: x' = x + MHA(LN(x)); out = x' + FFN(LN(x')).
struct VitBlock {
  LayerNorm ln_attn;
  MultiHeadAttention attn;
  LayerNorm ln_ffn;
  FeedForward ffn;

  VitBlock() = default;
  VitBlock(const EncoderConfig& cfg, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

class VitEncoder {
 public:
  VitEncoder() = default;
  VitEncoder(const EncoderConfig& cfg, Rng& rng);

  /// All blocks in sequence followed by the final LayerNorm.
  Tensor encode(const Tensor& tokens) const;
  /// Like encode(), but after every block whose 1-based index is in
  /// `inject_layers` the prompt is added to the block output.
  Tensor encode_with_prompts(const Tensor& tokens, const Tensor& prompt,
                             const std::set<std::size_t>& inject_layers) const;

  std::size_t depth() const { return blocks_.size(); }
  std::vector<VitBlock>& blocks() { return blocks_; }
  void collect(ParamList& out, const std::string& prefix) const;

 private:
  std::vector<VitBlock> blocks_;
  LayerNorm final_ln_;
};

}  // namespace hgp
