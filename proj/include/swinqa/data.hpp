#pragma once

// Synthetic stand-ins for the two quality tasks, CSV manifests, volume
// slicing, and a global-intensity threshold baseline.
//
// foreign_object: smooth blob background + noise, clamped to background_cap;
//   positives carry 1-4 bright disks, rings or rod segments.
// lvot: four dim elliptical chambers around the centre; positives add a fifth
//   near the centre. Optional horizontal motion blur and contrast reduction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "swinqa/image.hpp"
#include "swinqa/rng.hpp"

namespace swinqa {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { foreign_object, lvot };
enum class Split { train, val, test };

inline std::string to_string(Task t) { return t == Task::foreign_object ? "foreign_object" : "lvot"; }
inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}
inline Task parse_task(const std::string& s) {
  if (s == "foreign_object") return Task::foreign_object;
  if (s == "lvot") return Task::lvot;
  throw DataError("unknown task '" + s + "'");
}
inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

struct SynthSpec {
  Task task = Task::foreign_object;
  std::size_t size = 64;
  std::array<int, 2> object_count{2, 5};
  std::array<double, 2> object_radius{6.0, 11.0};  // pixels at size 64, scaled with size
  int background_blobs = 6;
  std::array<double, 2> background_level{0.0, 0.5};  // foreign_object base intensity
  double background_cap = 0.5;                        // foreign_object background ceiling
  std::array<double, 2> object_intensity{1.0, 1.0};
  double noise_sigma = 0.03;
  bool blur = false;
  double contrast_reduction = 0.0;  // 0 = none; c shrinks contrast by factor (1 - c)
  std::uint64_t seed = 0;

  void validate() const {
    if (size < 32) throw DataError("synth: size must be >= 32");
    if (object_count[0] < 1 || object_count[0] > object_count[1]) throw DataError("synth: object_count range must be ordered and >= 1");
    if (!(object_radius[0] > 0) || object_radius[0] > object_radius[1]) throw DataError("synth: object_radius range must be positive and ordered");
    if (background_blobs < 0) throw DataError("synth: background_blobs must be >= 0");
    if (background_level[0] < 0 || background_level[0] > background_level[1] || background_level[1] > 1) {
      throw DataError("synth: background_level range must be ordered within [0, 1]");
    }
    if (object_intensity[0] < 0 || object_intensity[0] > object_intensity[1] || object_intensity[1] > 1) {
      throw DataError("synth: object_intensity range must be ordered within [0, 1]");
    }
    if (background_cap <= 0 || background_cap > 1) throw DataError("synth: background_cap must lie in (0, 1]");
    if (noise_sigma < 0) throw DataError("synth: noise_sigma must be >= 0");
    if (contrast_reduction < 0 || contrast_reduction >= 1) throw DataError("synth: contrast_reduction must lie in [0, 1)");
  }

  double scale() const { return static_cast<double>(size) / 64.0; }
};

enum class ShapeKind { disk, ring, rod, ellipse };

struct ShapeMeta {
  ShapeKind kind = ShapeKind::disk;
  double cx = 0, cy = 0;  // pixel coordinates of the centroid
  double r = 0;           // radius, rod half length, or ellipse semi-axis a
  double r2 = 0;          // ring inner radius, rod half width, or ellipse semi-axis b
  double angle = 0;
  double intensity = 0;
};

struct SynthMeta {
  std::vector<ShapeMeta> shapes;
  std::size_t blur_length = 1;
  double background_cap = 1.0;
};

struct SampleRecord {
  std::string path;  // resolved file path; empty for in-memory samples
  int label = 0;
  Split split = Split::train;
  Image image;       // filled by generators or load_image
  SynthMeta meta;
};

namespace detail {

// Low-frequency blobs + Gaussian noise; values unclamped.
inline Image smooth_background(std::size_t n, double base, int blobs, double amp_lo, double amp_hi, double noise,
                               Rng& rng) {
  Image img(n, n, 1, static_cast<float>(base));
  const double sz = static_cast<double>(n);
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.uniform(0, sz), cy = rng.uniform(0, sz);
    const double sigma = rng.uniform(sz / 8, sz / 3);
    const double amp = rng.uniform(amp_lo, amp_hi);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        img.at(y, x) += static_cast<float>(amp * std::exp(-d2 / (2 * sigma * sigma)));
      }
  }
  for (auto& v : img.pixels) v += static_cast<float>(rng.normal(0.0, noise));
  return img;
}

inline bool inside(const ShapeMeta& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  switch (s.kind) {
    case ShapeKind::disk:
      return dx * dx + dy * dy <= s.r * s.r;
    case ShapeKind::ring: {
      const double d2 = dx * dx + dy * dy;
      return d2 <= s.r * s.r && d2 >= s.r2 * s.r2;
    }
    case ShapeKind::rod: {
      const double u = dx * std::cos(s.angle) + dy * std::sin(s.angle);
      const double v = -dx * std::sin(s.angle) + dy * std::cos(s.angle);
      return std::abs(u) <= s.r && std::abs(v) <= s.r2;
    }
    case ShapeKind::ellipse: {
      const double u = dx * std::cos(s.angle) + dy * std::sin(s.angle);
      const double v = -dx * std::sin(s.angle) + dy * std::cos(s.angle);
      return (u * u) / (s.r * s.r) + (v * v) / (s.r2 * s.r2) <= 1.0;
    }
  }
  return false;
}

// Hard-edged paint at pixel centres.
inline void paint(Image& img, const ShapeMeta& s) {
  const double reach = std::max(s.r, s.r2) + 1;
  const long y0 = std::max(0L, static_cast<long>(std::floor(s.cy - reach)));
  const long y1 = std::min(static_cast<long>(img.height) - 1, static_cast<long>(std::ceil(s.cy + reach)));
  const long x0 = std::max(0L, static_cast<long>(std::floor(s.cx - reach)));
  const long x1 = std::min(static_cast<long>(img.width) - 1, static_cast<long>(std::ceil(s.cx + reach)));
  for (long y = y0; y <= y1; ++y)
    for (long x = x0; x <= x1; ++x)
      if (inside(s, static_cast<double>(x), static_cast<double>(y))) {
        img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = static_cast<float>(s.intensity);
      }
}

}  // namespace detail

// Horizontal box blur of odd length with edge clamping.
inline Image motion_blur(const Image& img, std::size_t length) {
  if (length % 2 == 0) throw std::invalid_argument("motion_blur: length must be odd");
  if (length == 1) return img;
  Image out = img;
  const long half = static_cast<long>(length / 2), w = static_cast<long>(img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (long x = 0; x < w; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) {
        double acc = 0;
        for (long k = -half; k <= half; ++k) acc += img.at(y, static_cast<std::size_t>(std::clamp(x + k, 0L, w - 1)), c);
        out.at(y, static_cast<std::size_t>(x), c) = static_cast<float>(acc / static_cast<double>(length));
      }
  return out;
}

inline SampleRecord synth_foreign_object(const SynthSpec& spec, bool positive, Rng& rng) {
  spec.validate();
  if (spec.task != Task::foreign_object) throw DataError("synth_foreign_object: spec task is not foreign_object");
  SampleRecord rec;
  rec.label = positive ? 1 : 0;
  rec.meta.background_cap = spec.background_cap;
  const double base = rng.uniform(spec.background_level[0], spec.background_level[1]);
  Image img = detail::smooth_background(spec.size, base, spec.background_blobs, -0.15, 0.25, spec.noise_sigma, rng);
  for (auto& v : img.pixels) v = std::clamp(v, 0.0f, static_cast<float>(rec.meta.background_cap));
  if (positive) {
    const auto count = rng.uniform_int(spec.object_count[0], spec.object_count[1]);
    const double sz = static_cast<double>(spec.size), s = spec.scale();
    for (long i = 0; i < count; ++i) {
      ShapeMeta m;
      const auto kind = rng.uniform_int(0, 2);
      const double r = rng.uniform(spec.object_radius[0], spec.object_radius[1]) * s;
      m.cx = rng.uniform(r + 1, sz - r - 2);
      m.cy = rng.uniform(r + 1, sz - r - 2);
      m.angle = rng.uniform(0, std::numbers::pi);
      m.intensity = rng.uniform(spec.object_intensity[0], spec.object_intensity[1]);
      if (kind == 0) {
        m.kind = ShapeKind::disk;
        m.r = r;
      } else if (kind == 1) {
        m.kind = ShapeKind::ring;
        m.r = r + 1.0 * s;
        m.r2 = std::max(0.0, m.r - 3.0 * s);
      } else {
        m.kind = ShapeKind::rod;
        m.r = 1.6 * r;
        m.r2 = 1.5 * s;
        m.cx = std::clamp(m.cx, m.r + 1, sz - m.r - 2);
        m.cy = std::clamp(m.cy, m.r + 1, sz - m.r - 2);
      }
      detail::paint(img, m);
      rec.meta.shapes.push_back(m);
    }
  }
  rec.image = std::move(img);
  return rec;
}

inline SampleRecord synth_lvot(const SynthSpec& spec, bool positive, Rng& rng) {
  spec.validate();
  if (spec.task != Task::lvot) throw DataError("synth_lvot: spec task is not lvot");
  SampleRecord rec;
  rec.label = positive ? 1 : 0;
  const double sz = static_cast<double>(spec.size);
  Image img = detail::smooth_background(spec.size, rng.uniform(0.05, 0.15), spec.background_blobs / 2, -0.2, 0.3,
                                        spec.noise_sigma, rng);
  // Four chambers, one per quadrant around the centre.
  const std::array<std::array<double, 2>, 4> quadrant{{{-1, -1}, {1, -1}, {-1, 1}, {1, 1}}};
  for (const auto& q : quadrant) {
    ShapeMeta m;
    m.kind = ShapeKind::ellipse;
    m.cx = sz / 2 + q[0] * sz * rng.uniform(0.2, 0.27);
    m.cy = sz / 2 + q[1] * sz * rng.uniform(0.2, 0.27);
    m.r = sz * rng.uniform(0.11, 0.15);
    m.r2 = sz * rng.uniform(0.07, 0.1);
    m.angle = rng.uniform(0, std::numbers::pi);
    m.intensity = rng.uniform(0.55, 0.8);
    detail::paint(img, m);
    rec.meta.shapes.push_back(m);
  }
  // Fifth chamber: drawn for every sample so that both classes consume the same stream.
  ShapeMeta fifth;
  fifth.kind = ShapeKind::ellipse;
  fifth.cx = sz / 2 + rng.uniform(-0.06, 0.06) * sz;
  fifth.cy = sz / 2 + rng.uniform(-0.06, 0.06) * sz;
  fifth.r = sz * rng.uniform(0.06, 0.09);
  fifth.r2 = sz * rng.uniform(0.04, 0.06);
  fifth.angle = rng.uniform(0, std::numbers::pi);
  fifth.intensity = rng.uniform(0.55, 0.8);
  if (positive) {
    detail::paint(img, fifth);
    rec.meta.shapes.push_back(fifth);
  }
  for (auto& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
  // Blur length is drawn unconditionally: the blur flag changes pixels only.
  const std::size_t length = 2 * static_cast<std::size_t>(rng.uniform_int(1, 3)) + 1;
  if (spec.blur) {
    img = motion_blur(img, length);
    rec.meta.blur_length = length;
  }
  if (spec.contrast_reduction > 0) {
    const double mean = std::accumulate(img.pixels.begin(), img.pixels.end(), 0.0) / static_cast<double>(img.size());
    const double k = 1.0 - spec.contrast_reduction;
    for (auto& v : img.pixels) v = static_cast<float>(mean + (v - mean) * k);
  }
  rec.image = std::move(img);
  return rec;
}

inline SampleRecord synthesize(const SynthSpec& spec, bool positive, Rng& rng) {
  return spec.task == Task::foreign_object ? synth_foreign_object(spec, positive, rng) : synth_lvot(spec, positive, rng);
}

// ---------------------------------------------------------------------------
// Volumes.

struct Volume {
  std::vector<Image> slices;

  void validate() const {
    if (slices.empty()) throw DataError("volume: no slices");
    for (const auto& s : slices) {
      if (s.channels != 1) throw DataError("volume: slices must be grayscale");
      if (s.height != slices.front().height || s.width != slices.front().width) throw DataError("volume: ragged slices");
      if (s.empty()) throw DataError("volume: empty slice");
    }
  }
};

inline std::vector<Image> slice_volume(const Volume& v) {
  v.validate();
  return v.slices;
}

// One record per slice, all inheriting the volume label.
inline std::vector<SampleRecord> slice_volume_records(const Volume& v, int label, Split split) {
  std::vector<SampleRecord> out;
  for (auto& img : slice_volume(v)) {
    SampleRecord r;
    r.label = label;
    r.split = split;
    r.image = std::move(img);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifests.

// CSV "path,label,split"; relative paths resolve against the manifest's directory.
inline std::vector<SampleRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path + "'");
  const auto dir = std::filesystem::path(path).parent_path();
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest '" + path + "' is empty (missing header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,label,split") throw DataError("manifest '" + path + "': header must be 'path,label,split'");
  std::vector<SampleRecord> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "manifest '" + path + "' row " + std::to_string(row);
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 3 || cells[0].empty()) throw DataError(where + ": expected 3 fields path,label,split");
    SampleRecord r;
    if (cells[1] == "0" || cells[1] == "1") {
      r.label = cells[1][0] - '0';
    } else {
      throw DataError(where + ": label '" + cells[1] + "' not in {0,1}");
    }
    try {
      r.split = parse_split(cells[2]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    const std::filesystem::path p(cells[0]);
    r.path = (p.is_absolute() ? p : dir / p).string();
    if (!std::filesystem::exists(r.path)) throw DataError(where + ": image '" + r.path + "' not found");
    out.push_back(std::move(r));
  }
  return out;
}

inline void load_images(std::vector<SampleRecord>& records) {
  for (auto& r : records)
    if (r.image.empty()) r.image = read_pnm(r.path);
}

inline std::map<Split, std::size_t> split_counts(const std::vector<SampleRecord>& records) {
  std::map<Split, std::size_t> c{{Split::train, 0}, {Split::val, 0}, {Split::test, 0}};
  for (const auto& r : records) ++c[r.split];
  return c;
}

inline std::vector<SampleRecord> filter_split(const std::vector<SampleRecord>& records, Split s) {
  std::vector<SampleRecord> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(r);
  return out;
}

// Balanced synthetic benchmark. Sample i of a split is positive iff i is odd;
// its stream is derived from (seed, split, i) so records are independent.
// Writes <out>/<split>/<split>_NNNNN.pgm and <out>/manifest.csv when out_dir
// is non-empty. Returned records carry images and relative paths.
inline std::vector<SampleRecord> make_benchmark(const SynthSpec& spec, std::size_t n_train, std::size_t n_val,
                                                std::size_t n_test, const std::string& out_dir = "") {
  spec.validate();
  for (std::size_t n : {n_train, n_val, n_test}) {
    if (n < 2 || n % 2 != 0) throw DataError("make_benchmark: split counts must be even and >= 2");
  }
  std::vector<SampleRecord> out;
  const std::array<std::pair<Split, std::size_t>, 3> splits{{{Split::train, n_train}, {Split::val, n_val}, {Split::test, n_test}}};
  for (const auto& [split, n] : splits) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(spec.seed, {static_cast<std::uint64_t>(split), i});
      SampleRecord r = synthesize(spec, i % 2 == 1, rng);
      r.split = split;
      char name[32];
      std::snprintf(name, sizeof name, "%s_%05zu.pgm", to_string(split).c_str(), i);
      r.path = to_string(split) + "/" + name;
      out.push_back(std::move(r));
    }
  }
  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    for (const auto& [split, n] : splits) fs::create_directories(fs::path(out_dir) / to_string(split));
    std::ofstream manifest(fs::path(out_dir) / "manifest.csv", std::ios::binary);
    if (!manifest) throw DataError("cannot write manifest in '" + out_dir + "'");
    manifest << "path,label,split\n";
    for (const auto& r : out) {
      write_pnm((fs::path(out_dir) / r.path).string(), r.image);
      manifest << r.path << ',' << r.label << ',' << to_string(r.split) << '\n';
    }
    if (!manifest) throw DataError("failed writing manifest in '" + out_dir + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Global-threshold baseline on mean image intensity.

inline double mean_intensity(const Image& img) {
  return std::accumulate(img.pixels.begin(), img.pixels.end(), 0.0) / static_cast<double>(img.size());
}

struct ThresholdBaseline {
  double threshold = 0.0;
  bool positive_above = true;

  int predict(const Image& img) const { return (mean_intensity(img) > threshold) == positive_above ? 1 : 0; }

  // Best threshold (midpoints between sorted scores) and polarity on `train`.
  static ThresholdBaseline fit(const std::vector<SampleRecord>& train) {
    if (train.empty()) throw DataError("threshold baseline: empty training set");
    std::vector<std::pair<double, int>> s;
    for (const auto& r : train) s.emplace_back(mean_intensity(r.image), r.label);
    std::sort(s.begin(), s.end());
    std::vector<double> cands{s.front().first - 1};
    for (std::size_t i = 0; i + 1 < s.size(); ++i) cands.push_back((s[i].first + s[i + 1].first) / 2);
    ThresholdBaseline best;
    double best_acc = -1;
    for (double t : cands)
      for (bool above : {true, false}) {
        ThresholdBaseline b{t, above};
        std::size_t ok = 0;
        for (const auto& [v, y] : s) ok += ((v > t) == above ? 1 : 0) == y;
        const double acc = static_cast<double>(ok) / static_cast<double>(s.size());
        if (acc > best_acc) best_acc = acc, best = b;
      }
    return best;
  }

  double accuracy(const std::vector<SampleRecord>& data) const {
    if (data.empty()) throw DataError("threshold baseline: empty evaluation set");
    std::size_t ok = 0;
    for (const auto& r : data) ok += predict(r.image) == r.label;
    return static_cast<double>(ok) / static_cast<double>(data.size());
  }
};

}  // namespace swinqa
