#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include "swinqa/data.hpp"

using namespace swinqa;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("swinqa_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST(SynthForeignObject, NegativeHasNoBrightPixels) {
  SynthSpec spec;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto r = synth_foreign_object(spec, false, rng);
    EXPECT_EQ(r.label, 0);
    EXPECT_TRUE(r.meta.shapes.empty());
    // Objects are painted at full intensity; the background never exceeds its cap.
    for (float v : r.image.pixels) EXPECT_LE(v, static_cast<float>(spec.background_cap));
  }
}

TEST(SynthForeignObject, PositiveShapeCountWithinSpec) {
  SynthSpec spec;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const auto r = synth_foreign_object(spec, true, rng);
    EXPECT_EQ(r.label, 1);
    EXPECT_GE(r.meta.shapes.size(), static_cast<std::size_t>(spec.object_count[0]));
    EXPECT_LE(r.meta.shapes.size(), static_cast<std::size_t>(spec.object_count[1]));
    for (const auto& s : r.meta.shapes) {
      // The pixel nearest each centroid of a disk/rod is bright.
      if (s.kind == ShapeKind::ring) continue;
      EXPECT_GE(r.image.at(static_cast<std::size_t>(std::lround(s.cy)), static_cast<std::size_t>(std::lround(s.cx))), 0.85f);
    }
  }
}

TEST(SynthForeignObject, DegenerateRadiusDiskPixelCount) {
  SynthSpec spec;
  spec.object_count = {1, 1};
  spec.object_radius = {4.0, 4.0};
  int disks = 0;
  for (std::uint64_t seed = 0; disks < 5 && seed < 200; ++seed) {
    Rng rng(seed);
    const auto r = synth_foreign_object(spec, true, rng);
    const auto& s = r.meta.shapes.at(0);
    if (s.kind != ShapeKind::disk) continue;
    ++disks;
    std::size_t bright = 0;
    for (std::size_t y = 0; y < 64; ++y)
      for (std::size_t x = 0; x < 64; ++x) {
        const double d = std::hypot(x - s.cx, y - s.cy);
        if (d <= 6) bright += r.image.at(y, x) > 0.7f;
      }
    const double area = std::numbers::pi * 16;
    const double boundary = 2 * std::numbers::pi * 4;
    EXPECT_NEAR(static_cast<double>(bright), area, boundary) << "seed " << seed;
  }
  EXPECT_EQ(disks, 5);
}

TEST(SynthForeignObject, SeedDeterminism) {
  SynthSpec spec;
  Rng a(42), b(42);
  EXPECT_EQ(synth_foreign_object(spec, true, a).image, synth_foreign_object(spec, true, b).image);
}

TEST(SynthForeignObject, OutputInUnitRangeWithExtent) {
  SynthSpec spec;
  spec.size = 48;
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const auto r = synth_foreign_object(spec, i % 2 == 0, rng);
    EXPECT_EQ(r.image.height, 48u);
    EXPECT_EQ(r.image.width, 48u);
    for (float v : r.image.pixels) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(SynthLvot, PositiveHasCentralFifthChamber) {
  SynthSpec spec;
  spec.task = Task::lvot;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto r = synth_lvot(spec, true, rng);
    ASSERT_EQ(r.meta.shapes.size(), 5u);
    // Centre 25% crop is [24, 40) at 64 px.
    bool found = false;
    for (const auto& s : r.meta.shapes) found |= s.cx >= 24 && s.cx < 40 && s.cy >= 24 && s.cy < 40;
    EXPECT_TRUE(found);
  }
}

TEST(SynthLvot, NegativeHasExactlyFourChambers) {
  SynthSpec spec;
  spec.task = Task::lvot;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    EXPECT_EQ(synth_lvot(spec, false, rng).meta.shapes.size(), 4u);
  }
}

TEST(SynthLvot, BlurIsConvolutionOfUnblurred) {
  SynthSpec spec;
  spec.task = Task::lvot;
  SynthSpec blurred = spec;
  blurred.blur = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng a(seed), b(seed);
    const auto sharp = synth_lvot(spec, seed % 2 == 0, a);
    const auto soft = synth_lvot(blurred, seed % 2 == 0, b);
    const std::size_t k = soft.meta.blur_length;
    ASSERT_TRUE(k == 3 || k == 5 || k == 7);
    EXPECT_NE(sharp.image, soft.image);
    // Independent box-kernel oracle with edge clamping.
    const long half = static_cast<long>(k / 2);
    for (std::size_t y = 0; y < 64; ++y)
      for (long x = 0; x < 64; ++x) {
        double acc = 0;
        for (long j = x - half; j <= x + half; ++j) acc += sharp.image.at(y, static_cast<std::size_t>(std::clamp(j, 0L, 63L)));
        EXPECT_NEAR(soft.image.at(y, static_cast<std::size_t>(x)), acc / static_cast<double>(k), 1e-6);
      }
  }
}

TEST(SynthLvot, ContrastReductionShrinksSpread) {
  SynthSpec spec;
  spec.task = Task::lvot;
  SynthSpec dim = spec;
  dim.contrast_reduction = 0.5;
  Rng a(3), b(3);
  const auto x = synth_lvot(spec, true, a).image;
  const auto y = synth_lvot(dim, true, b).image;
  const auto [xlo, xhi] = std::minmax_element(x.pixels.begin(), x.pixels.end());
  const auto [ylo, yhi] = std::minmax_element(y.pixels.begin(), y.pixels.end());
  EXPECT_NEAR(*yhi - *ylo, 0.5 * (*xhi - *xlo), 1e-5);
}

TEST(SynthSpecValidation, RejectsBadSpecs) {
  SynthSpec spec;
  spec.size = 16;
  Rng rng(0);
  EXPECT_THROW(synth_foreign_object(spec, true, rng), DataError);
  spec = SynthSpec{};
  spec.object_radius = {5, 2};
  EXPECT_THROW(spec.validate(), DataError);
  spec = SynthSpec{};
  EXPECT_THROW(synth_lvot(spec, true, rng), DataError);  // wrong task
}

TEST(SliceVolume, SingleSliceAndCount) {
  Volume one{{Image(4, 4, 1, 0.3f)}};
  const auto s = slice_volume(one);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], one.slices[0]);

  Volume v;
  for (int d = 0; d < 25; ++d) v.slices.emplace_back(8, 8, 1, static_cast<float>(d) / 25.0f);
  const auto recs = slice_volume_records(v, 1, Split::val);
  ASSERT_EQ(recs.size(), 25u);
  for (std::size_t d = 0; d < 25; ++d) {
    EXPECT_EQ(recs[d].label, 1);
    EXPECT_EQ(recs[d].image, v.slices[d]);  // order preserved, concatenation reconstructs
  }
  EXPECT_THROW(slice_volume(Volume{}), DataError);
}

TEST(Manifest, HeaderOnlyIsEmpty) {
  const auto dir = scratch_dir("empty");
  write_text(dir / "m.csv", "path,label,split\n");
  EXPECT_TRUE(load_manifest((dir / "m.csv").string()).empty());
}

TEST(Manifest, ParsesValidRows) {
  const auto dir = scratch_dir("valid");
  std::string text = "path,label,split\n";
  for (int i = 0; i < 10; ++i) {
    const std::string name = "img" + std::to_string(i) + ".pgm";
    write_pnm((dir / name).string(), Image(4, 4, 1, 0.5f));
    text += name + "," + std::to_string(i % 2) + "," + (i < 6 ? "train" : i < 8 ? "val" : "test") + "\n";
  }
  write_text(dir / "m.csv", text);
  auto recs = load_manifest((dir / "m.csv").string());
  ASSERT_EQ(recs.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(recs[i].label, i % 2);
  const auto counts = split_counts(recs);
  EXPECT_EQ(counts.at(Split::train), 6u);
  EXPECT_EQ(counts.at(Split::val), 2u);
  EXPECT_EQ(counts.at(Split::test), 2u);
  load_images(recs);
  EXPECT_EQ(recs[3].image.height, 4u);
}

TEST(Manifest, BadLabelNamesRow) {
  const auto dir = scratch_dir("badlabel");
  write_pnm((dir / "a.pgm").string(), Image(4, 4, 1));
  write_text(dir / "m.csv", "path,label,split\na.pgm,0,train\na.pgm,2,train\n");
  try {
    load_manifest((dir / "m.csv").string());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Manifest, MissingAndMalformed) {
  const auto dir = scratch_dir("missing");
  EXPECT_THROW(load_manifest((dir / "nope.csv").string()), DataError);
  write_text(dir / "m.csv", "path,label,split\nghost.pgm,1,train\n");
  EXPECT_THROW(load_manifest((dir / "m.csv").string()), DataError);
  write_pnm((dir / "a.pgm").string(), Image(4, 4, 1));
  write_text(dir / "m.csv", "path,label,split\na.pgm,1\n");
  EXPECT_THROW(load_manifest((dir / "m.csv").string()), DataError);
  write_text(dir / "m.csv", "path,label,split\na.pgm,1,holdout\n");
  EXPECT_THROW(load_manifest((dir / "m.csv").string()), DataError);
}

TEST(Pnm, RoundTripAndErrors) {
  const auto dir = scratch_dir("pnm");
  Image rgb(3, 5, 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb.pixels[i] = static_cast<float>(i * 7 % 256) / 255.0f;
  write_pnm((dir / "c.ppm").string(), rgb);
  EXPECT_EQ(read_pnm((dir / "c.ppm").string()), rgb);
  write_text(dir / "bad.pgm", "P2\n2 2\n255\n0 0 0 0\n");
  EXPECT_THROW(read_pnm((dir / "bad.pgm").string()), ImageIoError);
  write_text(dir / "short.pgm", std::string("P5\n# note\n2 2\n255\n") + "ab");
  EXPECT_THROW(read_pnm((dir / "short.pgm").string()), ImageIoError);
}

TEST(Benchmark, BalancedSplits) {
  SynthSpec spec;
  const auto recs = make_benchmark(spec, 8, 4, 2);
  for (Split s : {Split::train, Split::val, Split::test}) {
    int pos = 0, n = 0;
    for (const auto& r : recs)
      if (r.split == s) pos += r.label, ++n;
    EXPECT_EQ(2 * pos, n);
  }
  EXPECT_EQ(filter_split(recs, Split::train).size(), 8u);
  EXPECT_THROW(make_benchmark(spec, 7, 4, 2), DataError);
}

TEST(Benchmark, SameSeedSameBytesAndManifestRoundTrip) {
  SynthSpec spec;
  spec.seed = 17;
  const auto a = scratch_dir("bench_a"), b = scratch_dir("bench_b");
  const auto generated = make_benchmark(spec, 6, 2, 2, a.string());
  make_benchmark(spec, 6, 2, 2, b.string());
  EXPECT_EQ(slurp(a / "manifest.csv"), slurp(b / "manifest.csv"));
  for (const auto& r : generated) EXPECT_EQ(slurp(a / r.path), slurp(b / r.path)) << r.path;

  auto loaded = load_manifest((a / "manifest.csv").string());
  ASSERT_EQ(loaded.size(), generated.size());
  load_images(loaded);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].label, generated[i].label);
    EXPECT_EQ(loaded[i].split, generated[i].split);
    // PGM stores 8 bits.
    for (std::size_t p = 0; p < loaded[i].image.size(); ++p)
      EXPECT_NEAR(loaded[i].image.pixels[p], generated[i].image.pixels[p], 0.5 / 255.0 + 1e-6);
  }
}

TEST(ThresholdBaseline, SeparableToyIsPerfect) {
  std::vector<SampleRecord> data;
  for (int i = 0; i < 10; ++i) {
    SampleRecord r;
    r.label = i % 2;
    r.image = Image(2, 2, 1, r.label ? 0.7f : 0.2f);
    data.push_back(r);
  }
  EXPECT_DOUBLE_EQ(ThresholdBaseline::fit(data).accuracy(data), 1.0);
  for (auto& r : data) r.label = 1 - r.label;
  EXPECT_DOUBLE_EQ(ThresholdBaseline::fit(data).accuracy(data), 1.0);
}

TEST(ThresholdBaseline, SyntheticTaskIsNotTrivial) {
  SynthSpec spec;
  spec.seed = 7;
  const auto recs = make_benchmark(spec, 400, 100, 100);
  const auto baseline = ThresholdBaseline::fit(filter_split(recs, Split::train));
  EXPECT_LE(baseline.accuracy(filter_split(recs, Split::val)), 0.70);
}
