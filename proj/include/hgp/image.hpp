#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <vector>

namespace hgp {

/// Channel-major (C x H x W) intensity grid with values in [0, 1].
struct ImagePlane {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  ImagePlane() = default;
  ImagePlane(std::size_t height, std::size_t width, std::size_t chans, double fill = 0.0);

  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * h + y) * w + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * h + y) * w + x];
  }
  double mean() const;
  bool operator==(const ImagePlane&) const = default;
};

/// Bilinear resampling with corner-aligned sample positions.
ImagePlane resize_bilinear(const ImagePlane& img, std::size_t out_h, std::size_t out_w);

ImagePlane crop(const ImagePlane& img, std::size_t y0, std::size_t x0, std::size_t ch,
                std::size_t cw);

/// ITU-R BT.601 luma of a 3-channel plane; 1-channel planes pass through.
ImagePlane to_gray(const ImagePlane& img);
ImagePlane replicate_channels(const ImagePlane& gray, std::size_t channels);

ImagePlane apply_gamma(const ImagePlane& img, double gamma);
/// Separable Gaussian blur with a kernel radius of ceil(3 sigma), clamped edges.
ImagePlane gaussian_blur(const ImagePlane& img, double sigma);
ImagePlane add_gaussian_noise(const ImagePlane& img, double sigma, std::mt19937_64& rng);

/// 8-bit binary PGM (1 channel) or PPM (3 channels).
void write_pnm(const std::filesystem::path& path, const ImagePlane& img);
ImagePlane read_pnm(const std::filesystem::path& path);
/// Rounds every pixel to the nearest 8-bit level, as a PNM round trip would.
ImagePlane quantize8(const ImagePlane& img);

}  // namespace hgp
