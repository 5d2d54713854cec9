#include "hgp/encoders.hpp"

#include "hgp/error.hpp"

namespace hgp {

void PatchEmbedConfig::validate() const {
  if (patch_h == 0 || patch_w == 0 || input_h == 0 || input_w == 0) {
    throw ConfigError("patch and input sizes must be positive");
  }
  if (input_h % patch_h != 0 || input_w % patch_w != 0) {
    throw ConfigError("input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                      " is not divisible into " + std::to_string(patch_h) + "x" +
                      std::to_string(patch_w) + " patches");
  }
  if (channels == 0 || d_model == 0) throw ConfigError("channels and d_model must be positive");
}

void EncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder needs at least one block");
  if (nhead == 0 || d_model % nhead != 0) {
    throw ConfigError("encoder width " + std::to_string(d_model) +
                      " is not divisible by head count " + std::to_string(nhead));
  }
  if (ffn_hidden == 0) throw ConfigError("encoder feed-forward width must be positive");
}

Tensor patchify(const ImagePlane& img, const PatchEmbedConfig& cfg) {
  cfg.validate();
  if (img.h != cfg.input_h || img.w != cfg.input_w) {
    throw ConfigError("image is " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                      ", model expects " + std::to_string(cfg.input_h) + "x" +
                      std::to_string(cfg.input_w));
  }
  ImagePlane replicated;
  if (img.channels == 1 && cfg.channels != 1) replicated = replicate_channels(img, cfg.channels);
  const ImagePlane& src = replicated.pixels.empty() ? img : replicated;
  if (src.channels != cfg.channels) {
    throw ConfigError("image has " + std::to_string(src.channels) + " channels, model expects " +
                      std::to_string(cfg.channels));
  }
  const std::size_t gh = cfg.input_h / cfg.patch_h, gw = cfg.input_w / cfg.patch_w;
  const std::size_t pd = cfg.patch_dim();
  Tensor out({gh * gw, pd});
  auto o = out.mutable_data();
  for (std::size_t py = 0; py < gh; ++py) {
    for (std::size_t px = 0; px < gw; ++px) {
      Real* row = o.data() + (py * gw + px) * pd;
      std::size_t k = 0;
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        for (std::size_t y = 0; y < cfg.patch_h; ++y) {
          for (std::size_t x = 0; x < cfg.patch_w; ++x) {
            row[k++] = src.at(c, py * cfg.patch_h + y, px * cfg.patch_w + x);
          }
        }
      }
    }
  }
  return out;
}

PatchEmbed::PatchEmbed(const PatchEmbedConfig& cfg, Rng& rng)
    : proj(cfg.patch_dim(), cfg.d_model, rng),
      pos(init_trunc_normal({cfg.tokens(), cfg.d_model}, 0.02, rng)) {
  cfg.validate();
}

Tensor PatchEmbed::operator()(const Tensor& patches) const {
  return ops::add(proj(patches), pos);
}

void PatchEmbed::collect(ParamList& out, const std::string& prefix) const {
  proj.collect(out, prefix + ".proj");
  out.push_back({prefix + ".pos", pos});
}

VitBlock::VitBlock(const EncoderConfig& cfg, Rng& rng)
    : ln_attn(cfg.d_model),
      attn(cfg.d_model, cfg.nhead, rng),
      ln_ffn(cfg.d_model),
      ffn(cfg.d_model, cfg.ffn_hidden, rng) {}

Tensor VitBlock::operator()(const Tensor& x) const {
  const Tensor normed = ln_attn(x);
  const Tensor mid = ops::add(x, attn(normed, normed, normed));
  return ops::add(mid, ffn(ln_ffn(mid)));
}

void VitBlock::collect(ParamList& out, const std::string& prefix) const {
  ln_attn.collect(out, prefix + ".ln_attn");
  attn.collect(out, prefix + ".attn");
  ln_ffn.collect(out, prefix + ".ln_ffn");
  ffn.collect(out, prefix + ".ffn");
}

VitEncoder::VitEncoder(const EncoderConfig& cfg, Rng& rng) : final_ln_(cfg.d_model) {
  cfg.validate();
  blocks_.reserve(cfg.layers);
  for (std::size_t i = 0; i < cfg.layers; ++i) blocks_.emplace_back(cfg, rng);
}

Tensor VitEncoder::encode(const Tensor& tokens) const {
  Tensor x = tokens;
  for (const auto& block : blocks_) x = block(x);
  return final_ln_(x);
}

Tensor VitEncoder::encode_with_prompts(const Tensor& tokens, const Tensor& prompt,
                                       const std::set<std::size_t>& inject_layers) const {
  for (auto l : inject_layers) {
    if (l < 1 || l > blocks_.size()) {
      throw ConfigError("prompt injection layer " + std::to_string(l) + " outside 1.." +
                        std::to_string(blocks_.size()));
    }
  }
  Tensor x = tokens;
  for (std::size_t l = 1; l <= blocks_.size(); ++l) {
    x = blocks_[l - 1](x);
    if (inject_layers.count(l)) x = ops::add(x, prompt);
  }
  return final_ln_(x);
}

void VitEncoder::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect(out, prefix + ".block" + std::to_string(i));
  }
  final_ln_.collect(out, prefix + ".final_ln");
}

}  // namespace hgp
