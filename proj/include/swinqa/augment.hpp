#pragma once

// Training-time input pipeline: RandAugment, color jitter, random erasing,
// MixUp / CutMix sample mixing, bilinear resize and per-channel normalization.
// Every stochastic op is a pure function of (input, config, rng state).

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "swinqa/image.hpp"
#include "swinqa/rng.hpp"
#include "swinqa/tensor.hpp"

namespace swinqa {

struct AugConfig {
  bool randaug = true;
  std::size_t randaug_n = 2;
  double randaug_magnitude = 9.0;
  bool jitter = true;
  double jitter_strength = 0.4;
  bool erasing = true;
  double erase_prob = 0.25;
  std::array<double, 2> erase_scale{0.02, 0.33};
  std::array<double, 2> erase_aspect{0.3, 3.3};
  bool mixing = true;
  double mixup_alpha = 0.8;
  double cutmix_alpha = 1.0;
  double mix_switch_prob = 0.5;
  std::array<double, 3> normalize_mean{0.485, 0.456, 0.406};
  std::array<double, 3> normalize_std{0.229, 0.224, 0.225};
  std::uint64_t seed = 0;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(erase_prob) || !prob(mix_switch_prob)) throw std::invalid_argument("aug: probabilities must lie in [0, 1]");
    if (!(erase_scale[0] > 0 && erase_scale[0] <= erase_scale[1]) ||
        !(erase_aspect[0] > 0 && erase_aspect[0] <= erase_aspect[1])) {
      throw std::invalid_argument("aug: erase ranges must be positive and ordered");
    }
    if (!(mixup_alpha > 0) || !(cutmix_alpha > 0)) throw std::invalid_argument("aug: mixing alphas must be positive");
    if (randaug_magnitude < 0 || randaug_magnitude > 10) throw std::invalid_argument("aug: magnitude must lie in [0, 10]");
    if (jitter_strength < 0) throw std::invalid_argument("aug: jitter strength must be non-negative");
    for (double s : normalize_std) {
      if (!(s > 0)) throw std::invalid_argument("aug: normalize_std must be positive");
    }
  }
};

struct LabeledBatch {
  std::vector<Image> images;                 // [0, 1], same extent
  std::vector<std::vector<double>> labels;   // soft label rows

  std::size_t size() const { return images.size(); }

  void validate() const {
    if (images.size() != labels.size()) throw std::invalid_argument("batch: image/label count mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double s = std::accumulate(labels[i].begin(), labels[i].end(), 0.0);
      if (std::abs(s - 1.0) > 1e-6) throw std::invalid_argument("batch: label row " + std::to_string(i) + " does not sum to 1");
    }
  }
};

inline std::vector<double> one_hot(std::size_t label, std::size_t classes) {
  std::vector<double> v(classes, 0.0);
  v.at(label) = 1.0;
  return v;
}

inline void clamp01(Image& img) {
  for (auto& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

// ---------------------------------------------------------------------------
// Resize and normalize.

// Bilinear with half-pixel centres and edge clamping.
inline Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (img.height == 0 || img.width == 0 || out_h == 0 || out_w == 0) {
    throw std::invalid_argument("resize: zero-extent image");
  }
  if (img.height == out_h && img.width == out_w) return img;
  Image out(out_h, out_w, img.channels);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

// Grayscale is replicated to three channels, then (x - mean_c) / std_c.
inline Image normalize(const Image& img, const std::array<double, 3>& mean, const std::array<double, 3>& stddev) {
  Image out = to_rgb(img);
  for (std::size_t i = 0; i < out.height * out.width; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      auto& v = out.pixels[i * 3 + c];
      v = static_cast<float>((v - mean[c]) / stddev[c]);
    }
  }
  return out;
}

inline Image resize_normalize(const Image& img, std::size_t h, std::size_t w, const AugConfig& cfg) {
  if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("resize_normalize: expected 1 or 3 channels");
  return normalize(resize_bilinear(img, h, w), cfg.normalize_mean, cfg.normalize_std);
}

// ---------------------------------------------------------------------------
// RandAugment.

enum class AugOp {
  identity,
  rotate,
  translate_x,
  translate_y,
  shear_x,
  shear_y,
  brightness,
  contrast,
  sharpness,
  posterize,
  autocontrast,
  equalize,
};

inline constexpr std::array<AugOp, 12> kAugOps{AugOp::identity,   AugOp::rotate,    AugOp::translate_x,
                                               AugOp::translate_y, AugOp::shear_x,   AugOp::shear_y,
                                               AugOp::brightness,  AugOp::contrast,  AugOp::sharpness,
                                               AugOp::posterize,   AugOp::autocontrast, AugOp::equalize};

namespace detail {

// Nearest-neighbour inverse warp about the image centre: output (x, y) reads
// input at (a*dx + b*dy + cx + tx, c*dx + d*dy + cy + ty). Outside pixels are 0.
inline Image warp_affine(const Image& img, double a, double b, double c, double d, double tx, double ty) {
  Image out(img.height, img.width, img.channels, 0.0f);
  const double cx = (static_cast<double>(img.width) - 1) / 2, cy = (static_cast<double>(img.height) - 1) / 2;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const long sx = std::lround(a * dx + b * dy + cx + tx);
      const long sy = std::lround(c * dx + d * dy + cy + ty);
      if (sx < 0 || sy < 0 || sx >= static_cast<long>(img.width) || sy >= static_cast<long>(img.height)) continue;
      for (std::size_t ch = 0; ch < img.channels; ++ch) {
        out.at(y, x, ch) = img.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), ch);
      }
    }
  }
  return out;
}

inline Image blend(const Image& a, const Image& b, double factor) {
  // factor * a + (1 - factor) * b
  Image out = a;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = static_cast<float>(factor * a.pixels[i] + (1 - factor) * b.pixels[i]);
  }
  clamp01(out);
  return out;
}

inline double mean_luma(const Image& img) {
  const Image g = to_gray(img);
  return std::accumulate(g.pixels.begin(), g.pixels.end(), 0.0) / static_cast<double>(g.pixels.size());
}

}  // namespace detail

// Rotation by `degrees` counter-clockwise as displayed (y axis pointing down):
// a pixel at offset (dx, dy) from the centre moves to
// (cos t * dx + sin t * dy, -sin t * dx + cos t * dy).
inline Image rotate_image(const Image& img, double degrees) {
  const double t = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  return detail::warp_affine(img, c, -s, s, c, 0, 0);
}

// One RandAugment op. Magnitudes lie on a 0-10 scale; `negate` flips the
// direction of signed ops. Per-op ranges at magnitude 10: rotate 30 degrees,
// translate 45% of the extent, shear 0.3, enhancement factors 1 +- 0.9,
// posterize down to 4 bits.
inline Image apply_aug_op(const Image& img, AugOp op, double magnitude, bool negate) {
  const double f = std::clamp(magnitude, 0.0, 10.0) / 10.0;
  const double sign = negate ? -1.0 : 1.0;
  Image out;
  switch (op) {
    case AugOp::identity:
      return img;
    case AugOp::rotate:
      out = rotate_image(img, sign * 30.0 * f);
      break;
    case AugOp::translate_x:
      out = detail::warp_affine(img, 1, 0, 0, 1, -std::round(sign * 0.45 * f * static_cast<double>(img.width)), 0);
      break;
    case AugOp::translate_y:
      out = detail::warp_affine(img, 1, 0, 0, 1, 0, -std::round(sign * 0.45 * f * static_cast<double>(img.height)));
      break;
    case AugOp::shear_x:
      out = detail::warp_affine(img, 1, sign * 0.3 * f, 0, 1, 0, 0);
      break;
    case AugOp::shear_y:
      out = detail::warp_affine(img, 1, 0, sign * 0.3 * f, 1, 0, 0);
      break;
    case AugOp::brightness:
      out = detail::blend(img, Image(img.height, img.width, img.channels, 0.0f), 1 + sign * 0.9 * f);
      break;
    case AugOp::contrast:
      out = detail::blend(img, Image(img.height, img.width, img.channels, static_cast<float>(detail::mean_luma(img))),
                          1 + sign * 0.9 * f);
      break;
    case AugOp::sharpness: {
      // 3x3 smoothing kernel [1 1 1; 1 5 1; 1 1 1] / 13, borders untouched.
      Image smooth = img;
      for (std::size_t y = 1; y + 1 < img.height; ++y) {
        for (std::size_t x = 1; x + 1 < img.width; ++x) {
          for (std::size_t c = 0; c < img.channels; ++c) {
            double acc = 4.0 * img.at(y, x, c);
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) acc += img.at(y + dy, x + dx, c);
            smooth.at(y, x, c) = static_cast<float>(acc / 13.0);
          }
        }
      }
      out = detail::blend(img, smooth, 1 + sign * 0.9 * f);
      break;
    }
    case AugOp::posterize: {
      const int bits = 8 - static_cast<int>(std::floor(4.0 * f));
      const int mask = ~((1 << (8 - bits)) - 1) & 0xff;
      out = img;
      for (auto& v : out.pixels) v = static_cast<float>(quantize_u8(v) & mask) / 255.0f;
      break;
    }
    case AugOp::autocontrast: {
      out = img;
      for (std::size_t c = 0; c < img.channels; ++c) {
        float lo = 1.0f, hi = 0.0f;
        for (std::size_t i = c; i < img.pixels.size(); i += img.channels) {
          lo = std::min(lo, img.pixels[i]);
          hi = std::max(hi, img.pixels[i]);
        }
        if (hi <= lo) continue;
        for (std::size_t i = c; i < img.pixels.size(); i += img.channels) out.pixels[i] = (img.pixels[i] - lo) / (hi - lo);
      }
      break;
    }
    case AugOp::equalize:
      out = histogram_equalize(img);
      break;
  }
  clamp01(out);
  return out;
}

// Draws `n` ops uniformly with replacement and applies each at `magnitude`.
inline Image rand_augment(const Image& img, std::size_t n, double magnitude, Rng& rng) {
  Image out = img;
  for (std::size_t i = 0; i < n; ++i) {
    const auto op = kAugOps[static_cast<std::size_t>(rng.uniform_int(0, kAugOps.size() - 1))];
    const bool negate = rng.bernoulli(0.5);
    out = apply_aug_op(out, op, magnitude, negate);
  }
  clamp01(out);
  return out;
}

// ---------------------------------------------------------------------------
// Color jitter.

struct JitterFactors {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  std::array<int, 3> order{0, 1, 2};  // 0 brightness, 1 contrast, 2 saturation
};

inline Image apply_jitter(const Image& img, const JitterFactors& f) {
  Image out = img;
  for (int op : f.order) {
    if (op == 0) {
      for (auto& v : out.pixels) v = static_cast<float>(v * f.brightness);
    } else if (op == 1) {
      const double mu = detail::mean_luma(out);
      for (auto& v : out.pixels) v = static_cast<float>((v - mu) * f.contrast + mu);
    } else if (out.channels == 3) {
      const Image gray = to_gray(out);
      for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
          auto& v = out.pixels[i * 3 + c];
          v = static_cast<float>(gray.pixels[i] + (v - gray.pixels[i]) * f.saturation);
        }
      }
    }
    clamp01(out);
  }
  return out;
}

inline Image color_jitter(const Image& img, double strength, Rng& rng) {
  if (strength < 0) throw std::invalid_argument("color_jitter: strength must be non-negative");
  if (strength == 0) return img;
  JitterFactors f;
  f.brightness = rng.uniform(std::max(0.0, 1 - strength), 1 + strength);
  f.contrast = rng.uniform(std::max(0.0, 1 - strength), 1 + strength);
  f.saturation = rng.uniform(std::max(0.0, 1 - strength), 1 + strength);
  std::shuffle(f.order.begin(), f.order.end(), rng.engine());
  return apply_jitter(img, f);
}

// ---------------------------------------------------------------------------
// Random erasing.

// With probability erase_prob, fills one rectangle whose area fraction and
// aspect ratio are drawn from the configured ranges with uniform noise.
// Up to 10 draws are tried for a rectangle that fits.
inline Image random_erasing(const Image& img, const AugConfig& cfg, Rng& rng) {
  if (cfg.erase_prob <= 0.0 || !rng.bernoulli(cfg.erase_prob)) return img;
  const double area = static_cast<double>(img.height * img.width);
  const double log_lo = std::log(cfg.erase_aspect[0]), log_hi = std::log(cfg.erase_aspect[1]);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = rng.uniform(cfg.erase_scale[0], cfg.erase_scale[1]) * area;
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target * aspect)));
    const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target / aspect)));
    if (h == 0 || w == 0 || h >= img.height || w >= img.width) continue;
    const auto top = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(img.height - h)));
    const auto left = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(img.width - w)));
    Image out = img;
    for (std::size_t y = top; y < top + h; ++y)
      for (std::size_t x = left; x < left + w; ++x)
        for (std::size_t c = 0; c < img.channels; ++c) out.at(y, x, c) = static_cast<float>(rng.uniform());
    return out;
  }
  return img;
}

// ---------------------------------------------------------------------------
// Sample mixing.

struct Box {
  std::size_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;  // half-open
  std::size_t area() const { return (y1 - y0) * (x1 - x0); }
};

struct MixResult {
  LabeledBatch batch;
  double lambda = 1.0;             // weight of each sample's own label
  std::vector<std::size_t> partner;
  Box box;                         // CutMix only
  bool cutmix = false;
};

namespace detail {

inline std::vector<std::size_t> random_partner(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  return perm;
}

inline std::vector<double> mix_labels(const std::vector<double>& a, const std::vector<double>& b, double lambda) {
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = lambda * a[k] + (1 - lambda) * b[k];
  return out;
}

}  // namespace detail

inline MixResult mixup_with(const LabeledBatch& batch, double lambda, const std::vector<std::size_t>& partner) {
  if (batch.size() < 2) throw std::invalid_argument("mixup: batch needs at least 2 samples");
  MixResult r{batch, lambda, partner, {}, false};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& a = batch.images[i];
    const auto& b = batch.images.at(partner.at(i));
    auto& out = r.batch.images[i];
    for (std::size_t p = 0; p < out.pixels.size(); ++p) {
      out.pixels[p] = static_cast<float>(lambda * a.pixels[p] + (1 - lambda) * b.pixels[p]);
    }
    r.batch.labels[i] = detail::mix_labels(batch.labels[i], batch.labels[partner[i]], lambda);
  }
  return r;
}

inline MixResult mixup(const LabeledBatch& batch, double alpha, Rng& rng) {
  if (batch.size() < 2) throw std::invalid_argument("mixup: batch needs at least 2 samples");
  const double lambda = rng.beta(alpha, alpha);
  return mixup_with(batch, lambda, detail::random_partner(batch.size(), rng));
}

// Pastes the partner's pixels inside `box`; label weight follows the pasted area.
inline MixResult cutmix_with(const LabeledBatch& batch, const Box& box, const std::vector<std::size_t>& partner) {
  if (batch.size() < 2) throw std::invalid_argument("cutmix: batch needs at least 2 samples");
  const auto& ref = batch.images.front();
  if (box.y1 > ref.height || box.x1 > ref.width || box.y0 > box.y1 || box.x0 > box.x1) {
    throw std::invalid_argument("cutmix: box outside image");
  }
  const double lambda = 1.0 - static_cast<double>(box.area()) / static_cast<double>(ref.height * ref.width);
  MixResult r{batch, lambda, partner, box, true};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& src = batch.images.at(partner.at(i));
    auto& out = r.batch.images[i];
    for (std::size_t y = box.y0; y < box.y1; ++y)
      for (std::size_t x = box.x0; x < box.x1; ++x)
        for (std::size_t c = 0; c < out.channels; ++c) out.at(y, x, c) = src.at(y, x, c);
    r.batch.labels[i] = detail::mix_labels(batch.labels[i], batch.labels[partner[i]], lambda);
  }
  return r;
}

inline MixResult cutmix(const LabeledBatch& batch, double alpha, Rng& rng) {
  if (batch.size() < 2) throw std::invalid_argument("cutmix: batch needs at least 2 samples");
  const auto& ref = batch.images.front();
  const double lambda = rng.beta(alpha, alpha);
  const double ratio = std::sqrt(1.0 - lambda);
  const auto cut_h = static_cast<long>(static_cast<double>(ref.height) * ratio);
  const auto cut_w = static_cast<long>(static_cast<double>(ref.width) * ratio);
  const long cy = rng.uniform_int(0, static_cast<long>(ref.height) - 1);
  const long cx = rng.uniform_int(0, static_cast<long>(ref.width) - 1);
  auto clip = [](long v, std::size_t hi) { return static_cast<std::size_t>(std::clamp(v, 0L, static_cast<long>(hi))); };
  Box box{clip(cy - cut_h / 2, ref.height), clip(cy + cut_h / 2, ref.height), clip(cx - cut_w / 2, ref.width),
          clip(cx + cut_w / 2, ref.width)};
  return cutmix_with(batch, box, detail::random_partner(batch.size(), rng));
}

// Exactly one of CutMix (probability mix_switch_prob) or MixUp per batch.
inline MixResult mix_batch(const LabeledBatch& batch, const AugConfig& cfg, Rng& rng) {
  if (rng.bernoulli(cfg.mix_switch_prob)) return cutmix(batch, cfg.cutmix_alpha, rng);
  return mixup(batch, cfg.mixup_alpha, rng);
}

// ---------------------------------------------------------------------------
// Pipeline.

enum class PipelineMode { train, eval };

class AugPipeline {
 public:
  AugPipeline(AugConfig cfg, PipelineMode mode) : cfg_(std::move(cfg)), mode_(mode) { cfg_.validate(); }

  PipelineMode mode() const { return mode_; }
  bool stochastic() const { return mode_ == PipelineMode::train; }
  const AugConfig& config() const { return cfg_; }

  // Per-sample ops up to (not including) normalization; output in [0, 1].
  Image prepare(const Image& raw, std::size_t h, std::size_t w, Rng& rng) const {
    Image img = to_rgb(raw);
    if (stochastic() && cfg_.randaug) img = rand_augment(img, cfg_.randaug_n, cfg_.randaug_magnitude, rng);
    img = resize_bilinear(img, h, w);
    if (stochastic() && cfg_.jitter) img = color_jitter(img, cfg_.jitter_strength, rng);
    if (stochastic() && cfg_.erasing) img = random_erasing(img, cfg_, rng);
    return img;
  }

  LabeledBatch mix(LabeledBatch batch, Rng& rng) const {
    if (!stochastic() || !cfg_.mixing || batch.size() < 2) return batch;
    return mix_batch(batch, cfg_, rng).batch;
  }

  // Normalized [B, H, W, 3] tensor.
  template <class T>
  Tensor<T> to_tensor(const LabeledBatch& batch) const {
    if (batch.images.empty()) throw std::invalid_argument("to_tensor: empty batch");
    const auto& ref = batch.images.front();
    std::vector<T> values;
    values.reserve(batch.size() * ref.height * ref.width * 3);
    for (const auto& img : batch.images) {
      if (img.height != ref.height || img.width != ref.width) throw std::invalid_argument("to_tensor: ragged batch");
      const Image n = normalize(img, cfg_.normalize_mean, cfg_.normalize_std);
      values.insert(values.end(), n.pixels.begin(), n.pixels.end());
    }
    return Tensor<T>::from({batch.size(), ref.height, ref.width, 3}, std::move(values));
  }

  template <class T>
  Tensor<T> labels_tensor(const LabeledBatch& batch) const {
    std::vector<T> values;
    for (const auto& row : batch.labels) values.insert(values.end(), row.begin(), row.end());
    return Tensor<T>::from({batch.size(), batch.labels.front().size()}, std::move(values));
  }

 private:
  AugConfig cfg_;
  PipelineMode mode_;
};

}  // namespace swinqa
