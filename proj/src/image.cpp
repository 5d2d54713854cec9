#include "hgp/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "hgp/error.hpp"

namespace hgp {

ImagePlane::ImagePlane(std::size_t height, std::size_t width, std::size_t chans, double fill)
    : h(height), w(width), channels(chans), pixels(height * width * chans, fill) {}

double ImagePlane::mean() const {
  if (pixels.empty()) return 0.0;
  return std::accumulate(pixels.begin(), pixels.end(), 0.0) / static_cast<double>(pixels.size());
}

namespace {

// Source coordinate for output index i when n_in samples map onto n_out.
double source_coord(std::size_t i, std::size_t n_in, std::size_t n_out) {
  if (n_out == 1) return 0.5 * static_cast<double>(n_in - 1);
  return static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
}

}  // namespace

ImagePlane resize_bilinear(const ImagePlane& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ConfigError("resize_bilinear: target size must be positive");
  if (img.h == out_h && img.w == out_w) return img;
  ImagePlane out(out_h, out_w, img.channels);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = source_coord(y, img.h, out_h);
    const std::size_t y0 = std::min(static_cast<std::size_t>(sy), img.h - 1);
    const std::size_t y1 = std::min(y0 + 1, img.h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = source_coord(x, img.w, out_w);
      const std::size_t x0 = std::min(static_cast<std::size_t>(sx), img.w - 1);
      const std::size_t x1 = std::min(x0 + 1, img.w - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = img.at(c, y0, x0) * (1 - fx) + img.at(c, y0, x1) * fx;
        const double bottom = img.at(c, y1, x0) * (1 - fx) + img.at(c, y1, x1) * fx;
        out.at(c, y, x) = std::clamp(top * (1 - fy) + bottom * fy, 0.0, 1.0);
      }
    }
  }
  return out;
}

ImagePlane crop(const ImagePlane& img, std::size_t y0, std::size_t x0, std::size_t ch,
                std::size_t cw) {
  if (ch == 0 || cw == 0 || y0 + ch > img.h || x0 + cw > img.w) {
    throw ValidationError("crop box outside the " + std::to_string(img.h) + "x" +
                          std::to_string(img.w) + " image");
  }
  ImagePlane out(ch, cw, img.channels);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < ch; ++y) {
      for (std::size_t x = 0; x < cw; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    }
  }
  return out;
}

ImagePlane to_gray(const ImagePlane& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw ConfigError("to_gray: expected 1 or 3 channels");
  ImagePlane out(img.h, img.w, 1);
  for (std::size_t y = 0; y < img.h; ++y) {
    for (std::size_t x = 0; x < img.w; ++x) {
      out.at(0, y, x) =
          0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
    }
  }
  return out;
}

ImagePlane replicate_channels(const ImagePlane& gray, std::size_t channels) {
  if (gray.channels != 1) throw ConfigError("replicate_channels: input must be single-channel");
  ImagePlane out(gray.h, gray.w, channels);
  for (std::size_t c = 0; c < channels; ++c) {
    std::copy(gray.pixels.begin(), gray.pixels.end(), out.pixels.begin() + c * gray.h * gray.w);
  }
  return out;
}

ImagePlane apply_gamma(const ImagePlane& img, double gamma) {
  ImagePlane out = img;
  for (auto& v : out.pixels) v = std::pow(v, gamma);
  return out;
}

ImagePlane gaussian_blur(const ImagePlane& img, double sigma) {
  if (sigma <= 0) return img;
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& k : kernel) k /= norm;

  const auto clampi = [](int v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(v, 0, static_cast<int>(n) - 1));
  };
  ImagePlane tmp(img.h, img.w, img.channels), out(img.h, img.w, img.channels);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < img.h; ++y) {
      for (std::size_t x = 0; x < img.w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * img.at(c, y, clampi(static_cast<int>(x) + i, img.w));
        }
        tmp.at(c, y, x) = acc;
      }
    }
    for (std::size_t y = 0; y < img.h; ++y) {
      for (std::size_t x = 0; x < img.w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * tmp.at(c, clampi(static_cast<int>(y) + i, img.h), x);
        }
        out.at(c, y, x) = std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

ImagePlane add_gaussian_noise(const ImagePlane& img, double sigma, std::mt19937_64& rng) {
  ImagePlane out = img;
  if (sigma <= 0) return out;
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& v : out.pixels) v = std::clamp(v + dist(rng), 0.0, 1.0);
  return out;
}

void write_pnm(const std::filesystem::path& path, const ImagePlane& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ConfigError("write_pnm: only 1- or 3-channel planes can be stored");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << (img.channels == 1 ? "P5" : "P6") << '\n' << img.w << ' ' << img.h << "\n255\n";
  std::vector<unsigned char> bytes(img.h * img.w * img.channels);
  for (std::size_t y = 0; y < img.h; ++y) {
    for (std::size_t x = 0; x < img.w; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        bytes[(y * img.w + x) * img.channels + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("failed writing " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& is) {
  std::string tok;
  char ch = 0;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string ignored;
      std::getline(is, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

ImagePlane read_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  const std::string magic = pnm_token(is);
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw ParseError(path.string() + ": unsupported image magic '" + magic + "'", 1);
  }
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(pnm_token(is));
    h = std::stoul(pnm_token(is));
    maxval = std::stoul(pnm_token(is));
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": malformed image header", 1);
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255) {
    throw ParseError(path.string() + ": unsupported image header", 1);
  }
  std::vector<unsigned char> bytes(w * h * channels);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) {
    throw ParseError(path.string() + ": truncated pixel data", 1);
  }
  ImagePlane img(h, w, channels);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        img.at(c, y, x) = bytes[(y * w + x) * channels + c] / static_cast<double>(maxval);
      }
    }
  }
  return img;
}

ImagePlane quantize8(const ImagePlane& img) {
  ImagePlane out = img;
  for (auto& v : out.pixels) v = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

}  // namespace hgp
