#include "hgp/render.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hgp/error.hpp"

namespace hgp {

FontAtlas FontAtlas::builtin() {
  FontAtlas a;
  auto& g = a.glyphs_;
  g['0'] = {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "};
  g['1'] = {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "};
  g['2'] = {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"};
  g['3'] = {"#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "};
  g['4'] = {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "};
  g['5'] = {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "};
  g['6'] = {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "};
  g['7'] = {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "};
  g['8'] = {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "};
  g['9'] = {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "};
  g['+'] = {"     ", "  #  ", "  #  ", "#####", "  #  ", "  #  ", "     "};
  g['-'] = {"     ", "     ", "     ", "#####", "     ", "     ", "     "};
  g['.'] = {"     ", "     ", "     ", "     ", "     ", " ##  ", " ##  "};
  g[' '] = {"     ", "     ", "     ", "     ", "     ", "     ", "     "};
  g['A'] = {" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"};
  g['B'] = {"#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "};
  g['C'] = {" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "};
  g['D'] = {"###  ", "#  # ", "#   #", "#   #", "#   #", "#  # ", "###  "};
  g['E'] = {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"};
  g['F'] = {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "};
  g['G'] = {" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ####"};
  g['H'] = {"#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"};
  g['I'] = {" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "};
  g['J'] = {"  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "};
  g['K'] = {"#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"};
  g['L'] = {"#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"};
  g['M'] = {"#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"};
  g['N'] = {"#   #", "#   #", "##  #", "# # #", "#  ##", "#   #", "#   #"};
  g['O'] = {" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "};
  g['P'] = {"#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "};
  g['Q'] = {" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"};
  g['R'] = {"#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"};
  g['S'] = {" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "};
  g['T'] = {"#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "};
  g['U'] = {"#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "};
  g['V'] = {"#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "};
  g['W'] = {"#   #", "#   #", "#   #", "# # #", "# # #", "# # #", " # # "};
  g['X'] = {"#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"};
  g['Y'] = {"#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "};
  g['Z'] = {"#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"};
  return a;
}

const FontAtlas::Glyph& FontAtlas::glyph(char c) const {
  const auto it = glyphs_.find(c);
  if (it == glyphs_.end()) throw ConfigError(std::string("font atlas has no glyph for '") + c + "'");
  return it->second;
}

namespace {

// Fraction of each canvas pixel in `row` covered by the text shifted by dx.
std::vector<double> row_coverage(const std::string& text, const FontAtlas& atlas,
                                 std::size_t font_row, double origin_x, std::size_t scale,
                                 std::size_t canvas_w) {
  std::vector<double> cov(canvas_w, 0.0);
  const double s = static_cast<double>(scale);
  for (std::size_t i = 0; i < text.size(); ++i) {
    for (std::size_t gc = 0; gc < FontAtlas::kGlyphW; ++gc) {
      if (!atlas.on(text[i], font_row, gc)) continue;
      const double left = origin_x + static_cast<double>(i * (FontAtlas::kGlyphW + 1) + gc) * s;
      const double right = left + s;
      const auto first = static_cast<long>(std::floor(left));
      const auto last = static_cast<long>(std::ceil(right));
      for (long px = std::max(first, 0L); px < std::min(last, static_cast<long>(canvas_w)); ++px) {
        const double overlap =
            std::min(right, static_cast<double>(px + 1)) - std::max(left, static_cast<double>(px));
        if (overlap > 0) cov[px] += overlap;
      }
    }
  }
  for (auto& c : cov) c = std::min(c, 1.0);
  return cov;
}

}  // namespace

RenderedScene render_scene(const std::string& text, const FontAtlas& atlas, MotionSpec motion,
                           Degradation degradation, std::uint64_t seed, const RenderConfig& cfg) {
  if (text.empty()) throw ConfigError("render: empty text");
  for (char c : text) atlas.glyph(c);
  if (motion.n_frames < 2) throw ConfigError("render: motion needs at least two frames");
  if (cfg.glyph_scale == 0) throw ConfigError("render: glyph scale must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double bg = 0.15 + 0.7 * unit(rng);
  const double contrast = 0.35 + 0.25 * unit(rng);
  const double fg = bg + contrast <= 1.0 && (bg - contrast < 0.0 || unit(rng) < 0.5)
                        ? bg + contrast
                        : bg - contrast;
  std::array<double, 3> bg_rgb{}, fg_rgb{};
  for (std::size_t c = 0; c < 3; ++c) {
    const double tint = 0.08 * (2 * unit(rng) - 1);
    bg_rgb[c] = std::clamp(bg + tint, 0.0, 1.0);
    fg_rgb[c] = std::clamp(fg + tint, 0.0, 1.0);
  }

  const std::size_t s = cfg.glyph_scale;
  const std::size_t text_w = (text.size() * (FontAtlas::kGlyphW + 1) - 1) * s;
  const std::size_t text_h = FontAtlas::kGlyphH * s;
  const std::size_t mid = (motion.n_frames - 1) / 2;
  const double max_shift =
      std::abs(motion.velocity) * static_cast<double>(std::max(mid, motion.n_frames - 1 - mid));
  const auto travel = static_cast<std::size_t>(std::ceil(max_shift));
  const std::size_t canvas_h = text_h + 2 * cfg.margin;
  // Short labels are padded out to the output aspect so glyphs keep their width after resizing.
  const std::size_t aspect_w = (canvas_h * cfg.out_w + cfg.out_h / 2) / cfg.out_h;
  const std::size_t crop_w = std::max(text_w + 2 * cfg.margin, aspect_w);
  const std::size_t pad = (crop_w - text_w - 2 * cfg.margin) / 2;
  const std::size_t canvas_w = crop_w + 2 * travel;
  const double origin_x = static_cast<double>(travel + pad + cfg.margin);

  RenderedScene scene;
  std::vector<ImagePlane> gray_frames;
  std::vector<std::int64_t> stamps;
  for (std::size_t f = 0; f < motion.n_frames; ++f) {
    const double dx = motion.velocity * (static_cast<double>(f) - static_cast<double>(mid));
    ImagePlane frame(canvas_h, canvas_w, 3);
    for (std::size_t c = 0; c < 3; ++c) {
      std::fill_n(frame.pixels.begin() + c * canvas_h * canvas_w, canvas_h * canvas_w, bg_rgb[c]);
    }
    for (std::size_t fr = 0; fr < FontAtlas::kGlyphH; ++fr) {
      const auto cov = row_coverage(text, atlas, fr, origin_x + dx, s, canvas_w);
      for (std::size_t sub = 0; sub < s; ++sub) {
        const std::size_t y = cfg.margin + fr * s + sub;
        for (std::size_t x = 0; x < canvas_w; ++x) {
          if (cov[x] == 0) continue;
          for (std::size_t c = 0; c < 3; ++c) {
            frame.at(c, y, x) = bg_rgb[c] + (fg_rgb[c] - bg_rgb[c]) * cov[x];
          }
        }
      }
    }
    gray_frames.push_back(to_gray(frame));
    stamps.push_back(static_cast<std::int64_t>(f) * cfg.frame_interval_us);
    scene.frames.push_back(std::move(frame));
  }
  scene.events = simulate_events(gray_frames, stamps, cfg.event_threshold);

  ImagePlane rgb = scene.frames[mid];
  if (degradation.gamma != 1.0) rgb = apply_gamma(rgb, degradation.gamma);
  if (degradation.blur_sigma > 0) rgb = gaussian_blur(rgb, degradation.blur_sigma);
  if (degradation.noise_sigma > 0) {
    std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    rgb = add_gaussian_noise(rgb, degradation.noise_sigma, noise_rng);
  }
  scene.rgb_degraded = std::move(rgb);
  scene.crop = {0, travel, canvas_h, crop_w};
  return scene;
}

SamplePair finish_sample(const RenderedScene& scene, const RenderConfig& cfg) {
  const auto& b = scene.crop;
  const std::int64_t t_end = scene.events.events.empty() ? 0 : scene.events.events.back().t;
  SamplePair out;
  out.rgb = resize_bilinear(crop(scene.rgb_degraded, b.y, b.x, b.h, b.w), cfg.out_h, cfg.out_w);
  const ImagePlane accumulated = synthesize_frame(scene.events, 0, t_end);
  out.event_gray = resize_bilinear(crop(accumulated, b.y, b.x, b.h, b.w), cfg.out_h, cfg.out_w);
  return out;
}

SamplePair render_text_sample(const std::string& text, const FontAtlas& atlas, MotionSpec motion,
                              Degradation degradation, std::uint64_t seed,
                              const RenderConfig& cfg) {
  SamplePair out = finish_sample(render_scene(text, atlas, motion, degradation, seed, cfg), cfg);
  out.label = text;
  return out;
}

}  // namespace hgp
