#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "hgp/decoder.hpp"
#include "hgp/encoders.hpp"
#include "hgp/hypergraph.hpp"
#include "hgp/render.hpp"

namespace hgp {

struct ModelConfig {
  std::size_t input_h = 32;
  std::size_t input_w = 128;
  std::size_t patch_h = 4;
  std::size_t patch_w = 8;
  std::size_t d_model = 128;
  std::size_t enc_layers = 4;
  std::size_t enc_heads = 4;
  std::size_t enc_ffn = 0;  // 0 selects 4 * d_model
  std::size_t knn_k = 10;
  FusionKind fusion = FusionKind::hypergraph_prompt;
  /// "all", "last", "none" or a comma-separated list of 1-based block indices.
  std::string inject_layers = "all";
  bool share_encoders = false;
  std::string charset = "0123456789K+";
  std::size_t max_len = 10;
  std::size_t dec_depth = 1;
  std::size_t dec_heads = 0;  // 0 selects d_model / 32
  std::size_t dec_mlp = 0;    // 0 selects 4 * d_model

  PatchEmbedConfig patch_config() const;
  EncoderConfig encoder_config() const;
  DecoderConfig decoder_config() const;
  std::set<std::size_t> injection_set() const;
  void validate() const;
};

/// Which input planes reach the model; an absent plane is replaced by zeros.
enum class Modality { fused, rgb_only, event_only };

std::string to_string(Modality m);
/// Accepts "fused", "rgb", "rgb_only", "event", "event_only".
Modality parse_modality(const std::string& name);

/// Patchified input planes of one sample.
struct ModelInput {
  Tensor rgb_patches;
  Tensor event_patches;
};

ModelInput make_input(const SamplePair& pair, const ModelConfig& cfg);

struct EncodeOptions {
  /// Reuse this hypergraph instead of rebuilding it from the features.
  const Hypergraph* fixed_graph = nullptr;
  /// Receives the hypergraph built during the pass.
  Hypergraph* graph_out = nullptr;
};

/// Encoder intermediates, mostly for inspection.
struct EncodeTrace {
  Tensor rgb_tokens;      // T_r
  Tensor event_features;  // F_e
  Tensor prompt;          // hypergraph output, when the strategy has one
  Tensor image_tokens;    // z
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const Charset& charset() const { return decoder_.charset(); }

  /// Image tokens z (N x d_model).
  Tensor encode(const ModelInput& input, Modality modality = Modality::fused,
                const EncodeOptions& opts = {}) const;
  EncodeTrace trace(const ModelInput& input, Modality modality = Modality::fused,
                    const EncodeOptions& opts = {}) const;
  Tensor decode(const Tensor& image_tokens, std::span<const int> context,
                const AttentionMask& mask) const {
    return decoder_.forward(image_tokens, context, mask);
  }
  std::string recognize(const ModelInput& input, Modality modality = Modality::fused) const;

  /// Every trainable tensor with a stable dotted name, in a fixed order.
  ParamList params() const;
  /// Copies values from `source` (names and shapes must match).
  void load_params(const ParamList& source);

  PermDecoder& decoder() { return decoder_; }
  const VitEncoder& rgb_encoder() const { return rgb_encoder_; }
  const VitEncoder& event_encoder() const;
  const HypergraphPrompt& hypergraph() const { return hyper_; }

 private:
  ModelConfig cfg_;
  std::set<std::size_t> inject_;
  PatchEmbed rgb_embed_, event_embed_;
  VitEncoder rgb_encoder_, event_encoder_;
  HypergraphPrompt hyper_;
  Linear concat_proj_;
  PermDecoder decoder_;
};

}  // namespace hgp
