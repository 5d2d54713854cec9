#include "hgp/model.hpp"

#include <algorithm>
#include <sstream>

#include "hgp/error.hpp"

namespace hgp {

PatchEmbedConfig ModelConfig::patch_config() const {
  return {input_h, input_w, patch_h, patch_w, 3, d_model};
}

EncoderConfig ModelConfig::encoder_config() const {
  return {enc_layers, d_model, enc_heads, enc_ffn ? enc_ffn : 4 * d_model};
}

DecoderConfig ModelConfig::decoder_config() const {
  return {d_model, dec_heads ? dec_heads : d_model / 32, max_len, dec_mlp ? dec_mlp : 4 * d_model,
          dec_depth};
}

std::set<std::size_t> ModelConfig::injection_set() const {
  std::set<std::size_t> out;
  if (inject_layers == "all") {
    for (std::size_t l = 1; l <= enc_layers; ++l) out.insert(l);
  } else if (inject_layers == "last") {
    out.insert(enc_layers);
  } else if (inject_layers != "none" && !inject_layers.empty()) {
    std::stringstream ss(inject_layers);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t l = 0;
      try {
        std::size_t used = 0;
        l = std::stoul(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError("bad injection layer '" + item + "'");
      }
      if (l < 1 || l > enc_layers) {
        throw ConfigError("injection layer " + std::to_string(l) + " outside 1.." +
                          std::to_string(enc_layers));
      }
      out.insert(l);
    }
  }
  return out;
}

void ModelConfig::validate() const {
  patch_config().validate();
  encoder_config().validate();
  if (d_model % 32 != 0 && dec_heads == 0) {
    throw ConfigError("d_model must be a multiple of 32 for the default decoder head count");
  }
  decoder_config().validate();
  if (knn_k < 1) throw ConfigError("knn_k must be at least 1");
  if (charset.empty()) throw ConfigError("charset must not be empty");
  injection_set();
}

std::string to_string(Modality m) {
  switch (m) {
    case Modality::fused: return "fused";
    case Modality::rgb_only: return "rgb_only";
    case Modality::event_only: return "event_only";
  }
  return "unknown";
}

Modality parse_modality(const std::string& name) {
  if (name == "fused") return Modality::fused;
  if (name == "rgb" || name == "rgb_only") return Modality::rgb_only;
  if (name == "event" || name == "event_only") return Modality::event_only;
  throw ConfigError("unknown modality '" + name + "' (expected rgb, event or fused)");
}

ModelInput make_input(const SamplePair& pair, const ModelConfig& cfg) {
  const auto pc = cfg.patch_config();
  const auto fit = [&](const ImagePlane& img) {
    return img.h == cfg.input_h && img.w == cfg.input_w ? img
                                                        : resize_bilinear(img, cfg.input_h, cfg.input_w);
  };
  // Pixels enter the embedding centred on mid-grey: x -> 2x - 1.
  const auto centred = [&](const ImagePlane& img) {
    Tensor p = patchify(fit(img), pc);
    for (Real& v : p.mutable_data()) v = 2.0 * v - 1.0;
    return p;
  };
  return {centred(pair.rgb), centred(pair.event_gray)};
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  inject_ = cfg_.injection_set();
  Rng rng(seed);
  rgb_embed_ = PatchEmbed(cfg_.patch_config(), rng);
  event_embed_ = PatchEmbed(cfg_.patch_config(), rng);
  rgb_encoder_ = VitEncoder(cfg_.encoder_config(), rng);
  if (!cfg_.share_encoders) event_encoder_ = VitEncoder(cfg_.encoder_config(), rng);
  if (cfg_.fusion == FusionKind::hypergraph_fusion || cfg_.fusion == FusionKind::hypergraph_prompt) {
    hyper_ = HypergraphPrompt(cfg_.d_model, cfg_.knn_k, rng);
  }
  if (cfg_.fusion == FusionKind::concatenate) concat_proj_ = Linear(2 * cfg_.d_model, cfg_.d_model, rng);
  decoder_ = PermDecoder(cfg_.decoder_config(), Charset(cfg_.charset), rng);
}

const VitEncoder& Model::event_encoder() const {
  return cfg_.share_encoders ? rgb_encoder_ : event_encoder_;
}

EncodeTrace Model::trace(const ModelInput& input, Modality modality, const EncodeOptions& opts) const {
  const auto zeros_like = [](const Tensor& t) { return Tensor(t.shape(), 0.0); };
  const Tensor rgb_in = modality == Modality::event_only ? zeros_like(input.rgb_patches) : input.rgb_patches;
  const Tensor event_in =
      modality == Modality::rgb_only ? zeros_like(input.event_patches) : input.event_patches;

  EncodeTrace t;
  t.rgb_tokens = rgb_embed_(rgb_in);
  t.event_features = event_encoder().encode(event_embed_(event_in));
  switch (cfg_.fusion) {
    case FusionKind::addition:
      t.image_tokens = rgb_encoder_.encode(ops::add(t.rgb_tokens, t.event_features));
      break;
    case FusionKind::concatenate:
      t.image_tokens = rgb_encoder_.encode(concat_proj_(ops::concat_cols(t.rgb_tokens, t.event_features)));
      break;
    case FusionKind::hypergraph_fusion:
      t.prompt = hyper_(t.rgb_tokens, t.event_features, opts.fixed_graph, opts.graph_out);
      t.image_tokens = rgb_encoder_.encode(t.prompt);
      break;
    case FusionKind::hypergraph_prompt:
      t.prompt = hyper_(t.rgb_tokens, t.event_features, opts.fixed_graph, opts.graph_out);
      t.image_tokens = rgb_encoder_.encode_with_prompts(t.rgb_tokens, t.prompt, inject_);
      break;
  }
  return t;
}

Tensor Model::encode(const ModelInput& input, Modality modality, const EncodeOptions& opts) const {
  return trace(input, modality, opts).image_tokens;
}

std::string Model::recognize(const ModelInput& input, Modality modality) const {
  return decoder_.greedy_decode(encode(input, modality));
}

ParamList Model::params() const {
  ParamList out;
  rgb_embed_.collect(out, "rgb_embed");
  event_embed_.collect(out, "event_embed");
  rgb_encoder_.collect(out, "rgb_encoder");
  if (!cfg_.share_encoders) event_encoder_.collect(out, "event_encoder");
  if (cfg_.fusion == FusionKind::hypergraph_fusion || cfg_.fusion == FusionKind::hypergraph_prompt) {
    hyper_.collect(out, "hypergraph");
  }
  if (cfg_.fusion == FusionKind::concatenate) concat_proj_.collect(out, "concat_proj");
  decoder_.collect(out, "decoder");
  return out;
}

void Model::load_params(const ParamList& source) {
  ParamList mine = params();
  if (mine.size() != source.size()) {
    throw ConfigError("parameter count mismatch: model has " + std::to_string(mine.size()) +
                      ", source has " + std::to_string(source.size()));
  }
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].name != source[i].name || mine[i].tensor.shape() != source[i].tensor.shape()) {
      throw ConfigError("parameter mismatch at '" + mine[i].name + "' vs '" + source[i].name + "'");
    }
    std::copy(source[i].tensor.data().begin(), source[i].tensor.data().end(),
              mine[i].tensor.mutable_data().begin());
  }
}

}  // namespace hgp
