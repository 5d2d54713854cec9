#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hgp/events.hpp"
#include "hgp/image.hpp"

namespace hgp {

/// Fixed 5x7 bitmap font.
class FontAtlas {
 public:
  static constexpr std::size_t kGlyphW = 5;
  static constexpr std::size_t kGlyphH = 7;
  using Glyph = std::array<const char*, kGlyphH>;

  /// Digits, upper-case letters and "+-. ".
  static FontAtlas builtin();

  bool has(char c) const { return glyphs_.count(c) != 0; }
  /// Throws ConfigError for a character without a glyph.
  const Glyph& glyph(char c) const;
  bool on(char c, std::size_t row, std::size_t col) const { return glyph(c)[row][col] == '#'; }

 private:
  std::map<char, Glyph> glyphs_;
};

struct MotionSpec {
  double velocity = 1.0;  // pixels per frame, horizontal
  std::size_t n_frames = 5;
};

/// Degradations applied to the RGB frame only. Identity by default.
struct Degradation {
  double gamma = 1.0;
  double blur_sigma = 0.0;
  double noise_sigma = 0.0;

  static Degradation none() { return {}; }
  static Degradation dark(double g) { return {g, 0.0, 0.0}; }
  static Degradation blur(double s) { return {1.0, s, 0.0}; }
  static Degradation noise(double s) { return {1.0, 0.0, s}; }
  bool is_identity() const { return gamma == 1.0 && blur_sigma <= 0 && noise_sigma <= 0; }
};

struct RenderConfig {
  std::size_t out_h = 32;
  std::size_t out_w = 128;
  std::size_t glyph_scale = 3;  // canvas pixels per font pixel
  std::size_t margin = 8;       // crop margin around the text box
  double event_threshold = 0.2;
  std::int64_t frame_interval_us = 1000;
};

struct SamplePair {
  ImagePlane rgb;         // 3 x out_h x out_w
  ImagePlane event_gray;  // 1 x out_h x out_w
  std::string label;
  std::string id;
};

struct CropBox {
  std::size_t y = 0, x = 0, h = 0, w = 0;
};

/// Everything produced while rendering one sample, before resizing.
struct RenderedScene {
  std::vector<ImagePlane> frames;  // RGB frames on the full canvas
  EventStream events;              // simulated from the luma of `frames`
  ImagePlane rgb_degraded;         // middle frame after degradation, full canvas
  CropBox crop;
};

RenderedScene render_scene(const std::string& text, const FontAtlas& atlas, MotionSpec motion,
                           Degradation degradation, std::uint64_t seed,
                           const RenderConfig& cfg = {});

/// Renders `text`, moves it across the frames, and returns the degraded
/// middle RGB frame with the polarity-accumulated event frame, both cropped
/// and resized to cfg.out_h x cfg.out_w. Pure function of its arguments.
SamplePair render_text_sample(const std::string& text, const FontAtlas& atlas, MotionSpec motion,
                              Degradation degradation, std::uint64_t seed,
                              const RenderConfig& cfg = {});

/// Crops and resizes a scene into a sample pair.
SamplePair finish_sample(const RenderedScene& scene, const RenderConfig& cfg);

}  // namespace hgp
