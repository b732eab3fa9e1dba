#pragma once

// Hierarchical shifted-window transformer: patch partition, linear embedding,
// stages of (shifted-)window attention blocks separated by patch merging, and
// a pooled linear classifier.
//
// Layout conventions (normative for checkpoints):
//   images       [B, H, W, 3]
//   feature maps [B, H', W', D], tokens row-major
//   window sets  [B * nW, M*M, D], windows row-major per sample, tokens row-major
//   linear weights are stored [in, out]

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swinqa/ops.hpp"
#include "swinqa/rng.hpp"
#include "swinqa/schedule.hpp"
#include "swinqa/tensor.hpp"

namespace swinqa {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Window layout actually used at one stage. Token grids smaller than the
// configured window fall back to a single unshifted window covering the grid.
struct StageLayout {
  std::size_t grid = 0;    // tokens per side
  std::size_t dim = 0;     // channels
  std::size_t heads = 0;
  std::size_t window = 0;  // effective M
  std::size_t shift = 0;   // applied on odd blocks
  std::size_t depth = 0;
};

struct SwinConfig {
  std::string name = "custom";
  std::size_t img_size = 224;
  std::size_t patch_size = 4;
  std::size_t in_channels = 3;
  std::size_t embed_dim = 96;
  std::vector<std::size_t> depths{2, 2, 6, 2};
  std::vector<std::size_t> heads{3, 6, 12, 24};
  std::size_t window = 7;
  std::size_t mlp_ratio = 4;
  double drop_path_max = 0.2;
  std::size_t num_classes = 2;

  static SwinConfig tiny(std::size_t img = 224, std::size_t window = 7) {
    return preset("tiny", img, window, 0.2, 96, {2, 2, 6, 2}, {3, 6, 12, 24});
  }
  static SwinConfig small(std::size_t img = 224, std::size_t window = 7) {
    return preset("small", img, window, 0.3, 96, {2, 2, 18, 2}, {3, 6, 12, 24});
  }
  static SwinConfig base(std::size_t img = 224, std::size_t window = 7) {
    return preset("base", img, window, 0.2, 128, {2, 2, 18, 2}, {4, 8, 16, 32});
  }
  // Desk-scale model used for the synthetic benchmarks.
  static SwinConfig micro(std::size_t img = 64, std::size_t window = 4) {
    return preset("micro", img, window, 0.1, 24, {1, 1, 2, 1}, {2, 4, 4, 8});
  }
  static SwinConfig by_name(const std::string& name, std::size_t img, std::size_t window) {
    if (name == "tiny") return tiny(img, window);
    if (name == "small") return small(img, window);
    if (name == "base") return base(img, window);
    if (name == "micro") return micro(img, window);
    throw ConfigError("unknown model preset '" + name + "' (expected tiny, small, base or micro)");
  }

  std::size_t num_stages() const { return depths.size(); }
  std::size_t total_blocks() const {
    std::size_t n = 0;
    for (auto d : depths) n += d;
    return n;
  }
  std::size_t token_dim() const { return patch_size * patch_size * in_channels; }
  std::size_t final_dim() const { return embed_dim << (num_stages() - 1); }

  // Per-stage layout for a square input of `img` pixels.
  std::vector<StageLayout> layouts(std::size_t img) const {
    validate_shape();
    if (img == 0 || img % patch_size != 0) {
      throw ConfigError("image size " + std::to_string(img) + " not divisible by patch size " +
                        std::to_string(patch_size));
    }
    std::vector<StageLayout> out;
    std::size_t grid = img / patch_size;
    for (std::size_t s = 0; s < num_stages(); ++s) {
      if (s > 0) {
        if (grid % 2 != 0) {
          throw ConfigError("stage " + std::to_string(s) + " needs an even token grid, got " + std::to_string(grid));
        }
        grid /= 2;
      }
      StageLayout l;
      l.grid = grid;
      l.dim = embed_dim << s;
      l.heads = heads[s];
      l.depth = depths[s];
      if (grid < window) {
        l.window = grid;
        l.shift = 0;
      } else {
        if (grid % window != 0) {
          throw ConfigError("stage " + std::to_string(s) + " token grid " + std::to_string(grid) +
                            " not divisible by window " + std::to_string(window));
        }
        l.window = window;
        l.shift = window / 2;
      }
      out.push_back(l);
    }
    return out;
  }
  std::vector<StageLayout> layouts() const { return layouts(img_size); }

  void validate() const { (void)layouts(); }

 private:
  static SwinConfig preset(std::string name, std::size_t img, std::size_t window, double dp, std::size_t c,
                           std::vector<std::size_t> depths, std::vector<std::size_t> heads) {
    SwinConfig cfg;
    cfg.name = std::move(name);
    cfg.img_size = img;
    cfg.window = window;
    cfg.drop_path_max = dp;
    cfg.embed_dim = c;
    cfg.depths = std::move(depths);
    cfg.heads = std::move(heads);
    return cfg;
  }

  void validate_shape() const {
    if (depths.empty() || depths.size() > 4 || depths.size() != heads.size()) {
      throw ConfigError("depths and heads must list the same number (1-4) of stages");
    }
    if (patch_size == 0 || in_channels != 3 || embed_dim == 0 || window == 0 || mlp_ratio == 0 ||
        num_classes < 2) {
      throw ConfigError("patch_size, embed_dim, window, mlp_ratio must be positive, in_channels 3, classes >= 2");
    }
    if (!(drop_path_max >= 0.0 && drop_path_max < 1.0)) throw ConfigError("drop_path_max must lie in [0, 1)");
    for (std::size_t s = 0; s < depths.size(); ++s) {
      if (depths[s] == 0 || heads[s] == 0 || (embed_dim << s) % heads[s] != 0) {
        throw ConfigError("stage " + std::to_string(s) + ": dim " + std::to_string(embed_dim << s) +
                          " not divisible by " + std::to_string(heads[s]) + " heads");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Parameters.

template <class T>
struct LinearParams {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out], may be undefined
};

template <class T>
struct NormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
};

template <class T>
struct BlockParams {
  NormParams<T> norm1;
  LinearParams<T> qkv;
  LinearParams<T> proj;
  Tensor<T> rel_bias;  // [(2M-1)^2, heads]
  NormParams<T> norm2;
  LinearParams<T> fc1;
  LinearParams<T> fc2;
};

template <class T>
struct MergeParams {
  NormParams<T> norm;
  Tensor<T> reduction;  // [4D, 2D], no bias
};

template <class T>
struct SwinParams {
  LinearParams<T> patch_embed;
  NormParams<T> patch_norm;
  std::vector<std::vector<BlockParams<T>>> stages;
  std::vector<MergeParams<T>> merges;  // merges[s] precedes stage s + 1
  NormParams<T> final_norm;
  LinearParams<T> head;

  // Stable (name, tensor) listing; the order is the checkpoint order.
  std::vector<std::pair<std::string, Tensor<T>*>> named() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    auto lin = [&](const std::string& p, LinearParams<T>& l) {
      out.emplace_back(p + ".weight", &l.weight);
      if (l.bias.defined()) out.emplace_back(p + ".bias", &l.bias);
    };
    auto norm = [&](const std::string& p, NormParams<T>& n) {
      out.emplace_back(p + ".gamma", &n.gamma);
      out.emplace_back(p + ".beta", &n.beta);
    };
    lin("patch_embed", patch_embed);
    norm("patch_norm", patch_norm);
    for (std::size_t s = 0; s < stages.size(); ++s) {
      if (s > 0) {
        const std::string p = "merge" + std::to_string(s - 1);
        norm(p + ".norm", merges[s - 1].norm);
        out.emplace_back(p + ".reduction", &merges[s - 1].reduction);
      }
      for (std::size_t b = 0; b < stages[s].size(); ++b) {
        const std::string p = "stage" + std::to_string(s) + ".block" + std::to_string(b);
        auto& blk = stages[s][b];
        norm(p + ".norm1", blk.norm1);
        lin(p + ".qkv", blk.qkv);
        lin(p + ".proj", blk.proj);
        out.emplace_back(p + ".rel_bias", &blk.rel_bias);
        norm(p + ".norm2", blk.norm2);
        lin(p + ".fc1", blk.fc1);
        lin(p + ".fc2", blk.fc2);
      }
    }
    norm("final_norm", final_norm);
    lin("head", head);
    return out;
  }

  std::vector<Tensor<T>> tensors() {
    std::vector<Tensor<T>> out;
    for (auto& [name, t] : named()) out.push_back(*t);
    return out;
  }

  std::size_t count() {
    std::size_t n = 0;
    for (auto& [name, t] : named()) n += t->numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : named()) t->zero_grad();
  }
};

// Allocates parameters. Linear weights and bias tables draw from a truncated
// normal (std 0.02), biases start at 0, norms at identity. With `rng` null
// every weight is zero (norm gammas stay 1).
template <class T>
SwinParams<T> init_params(const SwinConfig& cfg, Rng* rng) {
  const auto layouts = cfg.layouts();
  auto weights = [&](Shape shape) {
    std::vector<T> v(numel_of(shape), T(0));
    if (rng) {
      for (auto& x : v) x = static_cast<T>(rng->trunc_normal(0.02));
    }
    return Tensor<T>::from(std::move(shape), std::move(v), true);
  };
  auto lin = [&](std::size_t in, std::size_t out, bool bias = true) {
    LinearParams<T> l;
    l.weight = weights({in, out});
    if (bias) l.bias = Tensor<T>::zeros({out}, true);
    return l;
  };
  auto norm = [&](std::size_t d) {
    return NormParams<T>{Tensor<T>::full({d}, T(1), true), Tensor<T>::zeros({d}, true)};
  };

  SwinParams<T> p;
  p.patch_embed = lin(cfg.token_dim(), cfg.embed_dim);
  p.patch_norm = norm(cfg.embed_dim);
  for (std::size_t s = 0; s < layouts.size(); ++s) {
    const auto& l = layouts[s];
    if (s > 0) {
      const std::size_t prev = layouts[s - 1].dim;
      p.merges.push_back(MergeParams<T>{norm(4 * prev), weights({4 * prev, 2 * prev})});
    }
    std::vector<BlockParams<T>> blocks;
    const std::size_t table = (2 * l.window - 1) * (2 * l.window - 1);
    for (std::size_t b = 0; b < l.depth; ++b) {
      BlockParams<T> blk;
      blk.norm1 = norm(l.dim);
      blk.qkv = lin(l.dim, 3 * l.dim);
      blk.proj = lin(l.dim, l.dim);
      blk.rel_bias = weights({table, l.heads});
      blk.norm2 = norm(l.dim);
      blk.fc1 = lin(l.dim, cfg.mlp_ratio * l.dim);
      blk.fc2 = lin(cfg.mlp_ratio * l.dim, l.dim);
      blocks.push_back(std::move(blk));
    }
    p.stages.push_back(std::move(blocks));
  }
  p.final_norm = norm(cfg.final_dim());
  p.head = lin(cfg.final_dim(), cfg.num_classes);
  return p;
}

// ---------------------------------------------------------------------------
// Token grids and windows.

template <class T>
struct FeatureMap {
  Tensor<T> values;  // [B, H', W', D]

  std::size_t batch() const { return values.size(0); }
  std::size_t height() const { return values.size(1); }
  std::size_t width() const { return values.size(2); }
  std::size_t dim() const { return values.size(3); }
};

template <class T>
struct WindowSet {
  Tensor<T> values;  // [B * nW, M*M, D]
  std::size_t batch = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t window = 0;

  std::size_t windows_per_sample() const { return (grid_h / window) * (grid_w / window); }
  std::size_t count() const { return batch * windows_per_sample(); }
  std::size_t dim() const { return values.size(2); }
};

// Flattens each p x p pixel block into a token in (row, col, channel) order.
template <class T>
FeatureMap<T> patch_partition(const Tensor<T>& images, std::size_t patch = 4) {
  const auto& s = images.shape();
  if (s.size() != 4 || patch == 0 || s[1] % patch != 0 || s[2] % patch != 0) {
    throw DimensionError("patch_partition: image batch " + to_string(s) + " not divisible into " +
                         std::to_string(patch) + "x" + std::to_string(patch) + " patches");
  }
  const std::size_t b = s[0], gh = s[1] / patch, gw = s[2] / patch, c = s[3];
  auto x = reshape(images, {b, gh, patch, gw, patch, c});
  x = permute(x, {0, 1, 3, 2, 4, 5});
  return {reshape(x, {b, gh, gw, patch * patch * c})};
}

template <class T>
FeatureMap<T> linear_embed(const FeatureMap<T>& tokens, const LinearParams<T>& embed) {
  return {linear(tokens.values, embed.weight, embed.bias)};
}

template <class T>
WindowSet<T> window_partition(const FeatureMap<T>& x, std::size_t m) {
  const std::size_t b = x.batch(), h = x.height(), w = x.width(), d = x.dim();
  if (m == 0 || h % m != 0 || w % m != 0) {
    throw DimensionError("window_partition: grid " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by window " + std::to_string(m));
  }
  auto v = reshape(x.values, {b, h / m, m, w / m, m, d});
  v = permute(v, {0, 1, 3, 2, 4, 5});
  return {reshape(v, {b * (h / m) * (w / m), m * m, d}), b, h, w, m};
}

template <class T>
FeatureMap<T> window_reverse(const WindowSet<T>& ws) {
  const std::size_t m = ws.window;
  if (m == 0 || ws.grid_h % m != 0 || ws.grid_w % m != 0 || ws.values.dim() != 3 ||
      ws.values.size(0) != ws.count() || ws.values.size(1) != m * m) {
    throw DimensionError("window_reverse: window set " + to_string(ws.values.shape()) +
                         " inconsistent with its grid metadata");
  }
  const std::size_t d = ws.dim();
  auto v = reshape(ws.values, {ws.batch, ws.grid_h / m, ws.grid_w / m, m, m, d});
  v = permute(v, {0, 1, 3, 2, 4, 5});
  return {reshape(v, {ws.batch, ws.grid_h, ws.grid_w, d})};
}

// Torus roll by `d` tokens on both spatial axes.
template <class T>
FeatureMap<T> cyclic_shift(const FeatureMap<T>& x, long d) {
  if (d == 0) return x;
  return {roll(roll(x.values, 1, d), 2, d)};
}

// ---------------------------------------------------------------------------
// Shifted-window attention mask and relative position bias.

struct AttentionMask {
  static constexpr double kNeg = -1e9;
  std::size_t windows = 0;
  std::size_t tokens = 0;       // M*M
  std::vector<double> values;   // [windows, tokens, tokens], entries 0 or kNeg

  double at(std::size_t w, std::size_t i, std::size_t j) const { return values[(w * tokens + i) * tokens + j]; }

  template <class T>
  Tensor<T> as_tensor() const {
    std::vector<T> v(values.begin(), values.end());
    return Tensor<T>::from({windows, 1, tokens, tokens}, std::move(v));
  }
};

// Region labels of a shifted grid: each axis splits into [0, n-M), [n-M, n-s),
// [n-s, n); tokens in different regions must not attend to each other.
inline std::vector<int> shifted_region_labels(std::size_t h, std::size_t w, std::size_t m, std::size_t s) {
  auto band = [&](std::size_t i, std::size_t n) { return i < n - m ? 0 : (i < n - s ? 1 : 2); };
  std::vector<int> labels(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) labels[y * w + x] = band(y, h) * 3 + band(x, w);
  }
  return labels;
}

inline AttentionMask build_sw_attention_mask(std::size_t h, std::size_t w, std::size_t m, bool shifted = true) {
  if (m == 0 || h % m != 0 || w % m != 0) {
    throw DimensionError("build_sw_attention_mask: grid " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by window " + std::to_string(m));
  }
  AttentionMask mask;
  mask.windows = (h / m) * (w / m);
  mask.tokens = m * m;
  mask.values.assign(mask.windows * mask.tokens * mask.tokens, 0.0);
  if (!shifted) return mask;
  const auto labels = shifted_region_labels(h, w, m, m / 2);
  std::size_t win = 0;
  std::vector<int> local(mask.tokens);
  for (std::size_t wy = 0; wy < h / m; ++wy) {
    for (std::size_t wx = 0; wx < w / m; ++wx, ++win) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) local[i * m + j] = labels[(wy * m + i) * w + wx * m + j];
      }
      for (std::size_t a = 0; a < mask.tokens; ++a) {
        for (std::size_t b = 0; b < mask.tokens; ++b) {
          mask.values[(win * mask.tokens + a) * mask.tokens + b] = local[a] == local[b] ? 0.0 : AttentionMask::kNeg;
        }
      }
    }
  }
  return mask;
}

// Row of the bias table for each (query, key) token pair inside an M x M window.
inline std::vector<std::size_t> relative_position_index(std::size_t m) {
  const std::size_t n = m * m, span = 2 * m - 1;
  std::vector<std::size_t> idx(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t dy = a / m + (m - 1) - b / m;
      const std::size_t dx = a % m + (m - 1) - b % m;
      idx[a * n + b] = dy * span + dx;
    }
  }
  return idx;
}

// Learned per-head bias table plus its fixed index map.
template <class T>
struct RelPosBiasTable {
  Tensor<T> table;  // [(2M-1)^2, heads]
  std::size_t window = 0;
  std::vector<std::size_t> index = {};

  RelPosBiasTable(Tensor<T> t, std::size_t m) : table(std::move(t)), window(m), index(relative_position_index(m)) {
    const std::size_t rows = (2 * m - 1) * (2 * m - 1);
    if (table.dim() != 2 || table.size(0) != rows) {
      throw DimensionError("relative position table " + to_string(table.shape()) + " does not fit window " +
                           std::to_string(m));
    }
  }

  // Bias as [heads, M*M, M*M].
  Tensor<T> bias() const {
    const std::size_t n = window * window, heads = table.size(1);
    auto b = gather_rows(table, index);  // [n*n, heads]
    return reshape(permute(b, {1, 0}), {heads, n, n});
  }
};

// Multi-head self-attention inside each window:
// softmax(Q K^T / sqrt(d_head) + B + mask) V, heads concatenated, projected.
template <class T>
WindowSet<T> window_attention(const WindowSet<T>& ws, const LinearParams<T>& qkv, const LinearParams<T>& proj,
                              const RelPosBiasTable<T>& bias, const AttentionMask* mask, std::size_t heads) {
  const std::size_t nw = ws.count(), n = ws.window * ws.window, d = ws.dim();
  if (heads == 0 || d % heads != 0) {
    throw DimensionError("window_attention: dim " + std::to_string(d) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  if (bias.window != ws.window || bias.table.size(1) != heads) {
    throw DimensionError("window_attention: bias table " + to_string(bias.table.shape()) + " does not match window " +
                         std::to_string(ws.window) + " with " + std::to_string(heads) + " heads");
  }
  const std::size_t dh = d / heads;
  auto packed = linear(ws.values, qkv.weight, qkv.bias);  // [nw, n, 3d]
  packed = permute(reshape(packed, {nw, n, 3, heads, dh}), {2, 0, 3, 1, 4});
  auto q = scale(select(packed, 0), static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
  auto k = select(packed, 1);
  auto v = select(packed, 2);
  auto attn = matmul(q, permute(k, {0, 1, 3, 2}));  // [nw, heads, n, n]
  attn = add(attn, bias.bias());
  if (mask) {
    if (mask->tokens != n || mask->windows != ws.windows_per_sample()) {
      throw DimensionError("window_attention: mask does not match window layout");
    }
    attn = reshape(attn, {ws.batch, mask->windows, heads, n, n});
    attn = add(attn, mask->as_tensor<T>());
    attn = reshape(attn, {nw, heads, n, n});
  }
  attn = softmax(attn, -1);
  auto out = matmul(attn, v);  // [nw, heads, n, dh]
  out = reshape(permute(out, {0, 2, 1, 3}), {nw, n, d});
  out = linear(out, proj.weight, proj.bias);
  return {out, ws.batch, ws.grid_h, ws.grid_w, ws.window};
}

// Zeroes the residual branch per sample with probability `p` and rescales
// survivors by 1/(1-p). Identity outside training.
template <class T>
Tensor<T> drop_path(const Tensor<T>& branch, double p, bool training, Rng* rng) {
  if (!training || p <= 0.0) return branch;
  const std::size_t b = branch.size(0);
  Shape shape(branch.dim(), 1);
  shape[0] = b;
  std::vector<T> keep(b);
  for (auto& k : keep) {
    if (!rng) throw std::invalid_argument("drop_path: training mode needs an rng");
    k = rng->uniform() < p ? T(0) : static_cast<T>(1.0 / (1.0 - p));
  }
  return mul(branch, Tensor<T>::from(std::move(shape), std::move(keep)));
}

struct BlockSpec {
  std::size_t heads = 1;
  std::size_t window = 1;
  std::size_t shift = 0;  // 0 for the unshifted variant
};

// Pre-norm residual block. `mask` must be supplied when spec.shift > 0.
template <class T>
FeatureMap<T> swin_block(const FeatureMap<T>& x, const BlockParams<T>& p, const BlockSpec& spec,
                         const AttentionMask* mask, double drop_prob, bool training, Rng* rng) {
  if (spec.shift > 0 && !mask) throw std::invalid_argument("swin_block: shifted block needs a mask");
  const bool drop_all = training && drop_prob >= 1.0;
  if (drop_all) return x;

  const long s = static_cast<long>(spec.shift);
  FeatureMap<T> h{layer_norm(x.values, p.norm1.gamma, p.norm1.beta)};
  if (s > 0) h = cyclic_shift(h, -s);
  auto windows = window_partition(h, spec.window);
  RelPosBiasTable<T> bias(p.rel_bias, spec.window);
  windows = window_attention(windows, p.qkv, p.proj, bias, s > 0 ? mask : nullptr, spec.heads);
  h = window_reverse(windows);
  if (s > 0) h = cyclic_shift(h, s);
  auto y = add(x.values, drop_path(h.values, drop_prob, training, rng));

  auto m = layer_norm(y, p.norm2.gamma, p.norm2.beta);
  m = linear(gelu(linear(m, p.fc1.weight, p.fc1.bias)), p.fc2.weight, p.fc2.bias);
  return {add(y, drop_path(m, drop_prob, training, rng))};
}

// 2x2 neighbourhoods concatenated as (top-left, bottom-left, top-right,
// bottom-right), layer-normed, then reduced 4D -> 2D.
template <class T>
FeatureMap<T> merge_neighbourhoods(const FeatureMap<T>& x) {
  const std::size_t b = x.batch(), h = x.height(), w = x.width(), d = x.dim();
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("patch_merging: grid " + std::to_string(h) + "x" + std::to_string(w) + " has odd extent");
  }
  auto v = reshape(x.values, {b, h / 2, 2, w / 2, 2, d});
  v = permute(v, {0, 1, 3, 4, 2, 5});
  return {reshape(v, {b, h / 2, w / 2, 4 * d})};
}

template <class T>
FeatureMap<T> patch_merging(const FeatureMap<T>& x, const MergeParams<T>& p) {
  auto merged = merge_neighbourhoods(x);
  auto v = layer_norm(merged.values, p.norm.gamma, p.norm.beta);
  return {linear(v, p.reduction, Tensor<T>())};
}

// Images [B, H, W, 3] (already normalized) to logits [B, num_classes].
template <class T>
Tensor<T> forward(const Tensor<T>& images, const SwinConfig& cfg, const SwinParams<T>& params, bool training,
                  Rng* rng) {
  const auto layouts = cfg.layouts();
  const auto& s = images.shape();
  if (s.size() != 4 || s[1] != cfg.img_size || s[2] != cfg.img_size || s[3] != cfg.in_channels) {
    throw DimensionError("forward: images " + to_string(s) + " do not match configured size " +
                         std::to_string(cfg.img_size));
  }
  if (params.stages.size() != layouts.size()) throw DimensionError("forward: parameters do not match config");
  const auto rates = stochastic_depth_rates(cfg.drop_path_max, cfg.total_blocks());

  auto x = linear_embed(patch_partition(images, cfg.patch_size), params.patch_embed);
  x.values = layer_norm(x.values, params.patch_norm.gamma, params.patch_norm.beta);
  std::size_t block_index = 0;
  for (std::size_t st = 0; st < layouts.size(); ++st) {
    const auto& l = layouts[st];
    if (st > 0) x = patch_merging(x, params.merges.at(st - 1));
    if (params.stages[st].size() != l.depth) throw DimensionError("forward: stage depth does not match config");
    std::optional<AttentionMask> mask;
    if (l.shift > 0 && l.depth > 1) mask = build_sw_attention_mask(l.grid, l.grid, l.window);
    for (std::size_t b = 0; b < l.depth; ++b, ++block_index) {
      const bool shifted = (b % 2 == 1) && l.shift > 0;
      const BlockSpec spec{l.heads, l.window, shifted ? l.shift : 0};
      x = swin_block(x, params.stages[st][b], spec, shifted ? &*mask : nullptr, rates[block_index], training, rng);
    }
  }
  auto v = layer_norm(x.values, params.final_norm.gamma, params.final_norm.beta);
  const std::size_t b = x.batch();
  v = mean_axis(reshape(v, {b, x.height() * x.width(), x.dim()}), 1);
  return linear(v, params.head.weight, params.head.bias);
}

}  // namespace swinqa
