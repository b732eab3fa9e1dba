#pragma once

// Float images in [0, 1], interleaved [H, W, C], and binary PGM (P5) / PPM
// (P6) reading and writing.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace swinqa {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  float& at(std::size_t y, std::size_t x, std::size_t c = 0) { return pixels[(y * width + x) * channels + c]; }
  float at(std::size_t y, std::size_t x, std::size_t c = 0) const { return pixels[(y * width + x) * channels + c]; }
  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }

  friend bool operator==(const Image&, const Image&) = default;
};

inline Image to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1) throw std::invalid_argument("to_rgb: expected 1 or 3 channels");
  Image out(img.height, img.width, 3);
  for (std::size_t i = 0; i < img.height * img.width; ++i) {
    out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = img.pixels[i];
  }
  return out;
}

inline Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.height, img.width, 1);
  for (std::size_t i = 0; i < img.height * img.width; ++i) {
    out.pixels[i] = 0.299f * img.pixels[3 * i] + 0.587f * img.pixels[3 * i + 1] + 0.114f * img.pixels[3 * i + 2];
  }
  return out;
}

inline std::uint8_t quantize_u8(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

namespace detail {

inline std::string next_pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace detail

// Reads binary P5 (grayscale) or P6 (RGB) with maxval <= 255.
inline Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open image '" + path + "'");
  const std::string magic = detail::next_pnm_token(in);
  if (magic != "P5" && magic != "P6") throw ImageIoError("'" + path + "' is not a binary PGM/PPM file");
  long w = 0, h = 0, maxval = 0;
  try {
    w = std::stol(detail::next_pnm_token(in));
    h = std::stol(detail::next_pnm_token(in));
    maxval = std::stol(detail::next_pnm_token(in));
  } catch (const std::exception&) {
    throw ImageIoError("'" + path + "' has a malformed header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw ImageIoError("'" + path + "' has unsupported extent or maxval");
  }
  Image img(static_cast<std::size_t>(h), static_cast<std::size_t>(w), magic == "P5" ? 1 : 3);
  std::vector<unsigned char> raw(img.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw ImageIoError("'" + path + "' is truncated");
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = static_cast<float>(raw[i]) / static_cast<float>(maxval);
  return img;
}

// Writes P5 for one channel, P6 for three, maxval 255.
inline void write_pnm(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw ImageIoError("write_pnm: expected 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write image '" + path + "'");
  out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize_u8(img.pixels[i]);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw ImageIoError("failed writing '" + path + "'");
}

// Histogram equalization on 256 levels, per channel: each pixel maps to the
// fraction of pixels at or below its level. A constant image maps to 1.
inline Image histogram_equalize(const Image& img) {
  Image out = img;
  const std::size_t n = img.height * img.width;
  if (n == 0) return out;
  for (std::size_t c = 0; c < img.channels; ++c) {
    std::vector<std::size_t> hist(256, 0);
    for (std::size_t i = 0; i < n; ++i) ++hist[quantize_u8(img.pixels[i * img.channels + c])];
    std::vector<float> cdf(256);
    std::size_t running = 0;
    for (std::size_t k = 0; k < 256; ++k) {
      running += hist[k];
      cdf[k] = static_cast<float>(static_cast<double>(running) / static_cast<double>(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto& v = out.pixels[i * img.channels + c];
      v = cdf[quantize_u8(v)];
    }
  }
  return out;
}

}  // namespace swinqa
