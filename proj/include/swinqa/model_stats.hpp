#pragma once

// Closed-form parameter and FLOP counts. One multiply-accumulate counts as
// one FLOP; normalization layers count one FLOP per element.

#include <cstdint>

#include "swinqa/swin.hpp"

namespace swinqa {

inline std::uint64_t count_params(const SwinConfig& cfg) {
  const auto layouts = cfg.layouts();
  const std::uint64_t c = cfg.embed_dim, r = cfg.mlp_ratio;
  std::uint64_t n = cfg.token_dim() * c + c + 2 * c;
  for (std::size_t s = 0; s < layouts.size(); ++s) {
    const std::uint64_t d = layouts[s].dim, m = layouts[s].window;
    if (s > 0) {
      const std::uint64_t prev = layouts[s - 1].dim;
      n += 2 * 4 * prev + 4 * prev * 2 * prev;
    }
    const std::uint64_t block = 2 * d                       // norm1
                                + d * 3 * d + 3 * d         // qkv
                                + d * d + d                 // proj
                                + (2 * m - 1) * (2 * m - 1) * layouts[s].heads
                                + 2 * d                     // norm2
                                + d * r * d + r * d         // fc1
                                + r * d * d + d;            // fc2
    n += layouts[s].depth * block;
  }
  const std::uint64_t f = cfg.final_dim();
  return n + 2 * f + f * cfg.num_classes + cfg.num_classes;
}

inline double count_flops(const SwinConfig& cfg, std::size_t height, std::size_t width) {
  if (height != width) throw ConfigError("count_flops: only square inputs are supported");
  const auto layouts = cfg.layouts(height);
  const double c = static_cast<double>(cfg.embed_dim), r = static_cast<double>(cfg.mlp_ratio);
  double tokens = static_cast<double>(layouts[0].grid * layouts[0].grid);
  double f = tokens * static_cast<double>(cfg.token_dim()) * c + tokens * c;  // embedding + norm
  for (std::size_t s = 0; s < layouts.size(); ++s) {
    const auto& l = layouts[s];
    const double d = static_cast<double>(l.dim);
    if (s > 0) {
      const double prev_tokens = static_cast<double>(layouts[s - 1].grid * layouts[s - 1].grid);
      const double prev = static_cast<double>(layouts[s - 1].dim);
      f += prev_tokens * prev + (prev_tokens / 4.0) * 4.0 * prev * 2.0 * prev;
    }
    tokens = static_cast<double>(l.grid * l.grid);
    const double n = static_cast<double>(l.window * l.window);
    const double windows = tokens / n;
    const double attention = windows * (n * d * 3.0 * d  // qkv
                                        + n * d * n      // Q K^T
                                        + n * n * d      // attn V
                                        + n * d * d);    // proj
    const double block = tokens * d + attention + 2.0 * tokens * d * r * d + tokens * d;
    f += static_cast<double>(l.depth) * block;
  }
  const double fd = static_cast<double>(cfg.final_dim());
  return f + tokens * fd + fd * static_cast<double>(cfg.num_classes);
}

}  // namespace swinqa
