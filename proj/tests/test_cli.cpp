#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "swinqa/image.hpp"
#include "swinqa/metrics.hpp"
#include "swinqa/rng.hpp"
#include "swinqa/run_config.hpp"

using namespace swinqa;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "swinqa_cli_test";

int run(const std::string& args, const fs::path& log = {}) {
  const std::string redirect = log.empty() ? " > /dev/null 2>&1" : " > " + log.string() + " 2>&1";
  const int status = std::system((std::string(SWINQA_CLI) + " " + args + redirect).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh(const std::string& name) {
  const auto d = kRoot / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_json(const fs::path& p, const Json& j) {
  std::ofstream(p) << j.dump(2);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

// Small, fast training run on the synthetic generator.
Json smoke_config(std::size_t epochs) {
  return Json{{"synth", {{"spec", {{"size", 32}, {"seed", 3}}}, {"n_train", 16}, {"n_val", 8}, {"n_test", 8}}},
              {"train",
               {{"epochs", epochs},
                {"warmup_epochs", 0},
                {"batch_size", 8},
                {"grad_accum_steps", 1},
                {"img_size", 32},
                {"eval_batch_size", 8},
                {"base_lr", 1e-3},
                {"seed", 11}}}};
}

// Dark noisy field; positives carry a bright 8x8 square. Written as PGM + manifest.
fs::path write_square_dataset(const fs::path& dir) {
  std::ofstream manifest(dir / "manifest.csv");
  manifest << "path,label,split\n";
  const std::array<std::pair<const char*, std::size_t>, 3> splits{{{"train", 160}, {"val", 16}, {"test", 16}}};
  for (const auto& [split, n] : splits) {
    Rng rng(7, {std::hash<std::string>{}(split)});
    for (std::size_t i = 0; i < n; ++i) {
      Image im(32, 32, 1, 0.3f);
      for (auto& v : im.pixels) v = std::clamp(v + 0.05f * static_cast<float>(rng.normal()), 0.0f, 1.0f);
      const int label = static_cast<int>(i % 2);
      if (label) {
        const auto y = static_cast<std::size_t>(rng.uniform_int(0, 23)), x = static_cast<std::size_t>(rng.uniform_int(0, 23));
        for (std::size_t a = 0; a < 8; ++a)
          for (std::size_t b = 0; b < 8; ++b) im.at(y + a, x + b) = 0.95f;
      }
      const std::string name = std::string(split) + "_" + std::to_string(i) + ".pgm";
      write_pnm((dir / name).string(), im);
      manifest << name << ',' << label << ',' << split << '\n';
    }
  }
  return dir / "manifest.csv";
}

}  // namespace

TEST(CliInspect, PrintsPublishedParameterCounts) {
  const auto out = fresh("inspect");
  ASSERT_EQ(run("inspect --out " + out.string()), 0);
  const auto table = Json::parse(slurp(out / "inspect.json"));
  ASSERT_GE(table.size(), 4u);
  EXPECT_EQ(table[0]["params"].get<std::uint64_t>(), 27520892u);
  EXPECT_EQ(table[1]["params"].get<std::uint64_t>(), 48838796u);
  EXPECT_EQ(table[2]["params"].get<std::uint64_t>(), 86745274u);
  EXPECT_EQ(table[3]["params"].get<std::uint64_t>(), 86766330u);
  EXPECT_EQ(table[3]["img_size"].get<int>(), 1024);
  for (auto [i, g] : {std::pair{0, 4.5}, {1, 8.7}, {2, 15.4}}) {
    EXPECT_NEAR(table[i]["gflops"].get<double>(), g, 0.1 * g);
  }
  EXPECT_TRUE(fs::exists(out / "resolved_config.json"));
}

TEST(CliSynth, DefaultSpecWritesBalancedDataset) {
  const auto out = fresh("synth_default");
  ASSERT_EQ(run("synth --out " + out.string()), 0);
  const auto rows = read_csv(out / "manifest.csv");
  ASSERT_EQ(rows.size(), 601u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"path", "label", "split"}));
  std::map<std::string, std::array<int, 2>> counts;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ++counts[rows[i][2]][rows[i][1] == "1"];
    EXPECT_TRUE(fs::exists(out / rows[i][0]));
  }
  EXPECT_EQ(counts["train"], (std::array<int, 2>{200, 200}));
  EXPECT_EQ(counts["val"], (std::array<int, 2>{50, 50}));
  EXPECT_EQ(counts["test"], (std::array<int, 2>{50, 50}));
}

TEST(CliSynth, SameSeedGivesIdenticalBytes) {
  const auto a = fresh("synth_a"), b = fresh("synth_b");
  const auto cfg = write_json(kRoot / "synth_small.json", Json{{"synth", {{"n_train", 4}, {"n_val", 2}, {"n_test", 2}}}});
  ASSERT_EQ(run("synth --config " + cfg.string() + " --seed 9 --out " + a.string()), 0);
  ASSERT_EQ(run("synth --config " + cfg.string() + " --seed 9 --out " + b.string()), 0);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_TRUE(slurp(e.path()) == slurp(b / rel)) << rel;
  }
  const auto resolved = Json::parse(slurp(a / "resolved_config.json"));
  EXPECT_EQ(resolved["synth"]["spec"]["seed"].get<int>(), 9);  // flag beats file
}

TEST(CliSynth, InvalidSpecExitsWithValidationError) {
  const auto out = fresh("synth_bad");
  const auto bad_range = write_json(kRoot / "bad_range.json", Json{{"synth", {{"spec", {{"object_radius", {5.0, 2.0}}}}}}});
  EXPECT_EQ(run("synth --config " + bad_range.string() + " --out " + out.string(), out / "log.txt"), 1);
  EXPECT_NE(slurp(out / "log.txt").find("object_radius"), std::string::npos);
  const auto unknown = write_json(kRoot / "unknown.json", Json{{"synth", {{"spec", {{"radius", 3}}}}}});
  EXPECT_EQ(run("synth --config " + unknown.string() + " --out " + out.string(), out / "log2.txt"), 1);
  EXPECT_NE(slurp(out / "log2.txt").find("unknown key 'radius'"), std::string::npos);
  const auto version = write_json(kRoot / "version.json", Json{{"schema_version", 99}});
  EXPECT_EQ(run("synth --config " + version.string() + " --out " + out.string()), 1);
  EXPECT_EQ(run("frobnicate"), 1);
}

TEST(CliTrain, SmokeRunWritesAllArtifactsAndResumes) {
  const auto a = fresh("train_a"), b = fresh("train_b");
  const auto cfg2 = write_json(kRoot / "smoke2.json", smoke_config(2));
  ASSERT_EQ(run("train --config " + cfg2.string() + " --out " + a.string()), 0);
  for (const char* f : {"last.swqk", "best.swqk", "history.csv", "resolved_config.json"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  const auto hist = read_csv(a / "history.csv");
  ASSERT_EQ(hist.size(), 3u);
  EXPECT_EQ(hist[0], (std::vector<std::string>{"epoch", "train_loss", "val_acc", "val_auc", "lr"}));
  // The echoed config replays: it parses strictly and resolves to itself.
  const auto resolved = Json::parse(slurp(a / "resolved_config.json"));
  EXPECT_EQ(to_json(run_config_from_json(resolved)), resolved);
  EXPECT_EQ(resolved["train"]["epochs"].get<int>(), 2);
  EXPECT_EQ(resolved["train"]["weight_decay"].get<double>(), 1e-8);

  // Resume the finished 2-epoch run into a 3-epoch run: continues at epoch 2.
  const auto cfg3 = write_json(kRoot / "smoke3.json", smoke_config(3));
  ASSERT_EQ(run("train --config " + cfg3.string() + " --resume " + (a / "last.swqk").string() + " --out " + b.string(),
                b / "log.txt"),
            0);
  EXPECT_NE(slurp(b / "log.txt").find("resuming at epoch 2"), std::string::npos);
  const auto hist3 = read_csv(b / "history.csv");
  ASSERT_EQ(hist3.size(), 4u);
  EXPECT_EQ(hist3[1], hist[1]);
  EXPECT_EQ(hist3[2], hist[2]);
  EXPECT_EQ(hist3[3][0], "3");
}

TEST(CliTrain, NonFiniteLossExitsWithRuntimeAbort) {
  const auto out = fresh("train_nan");
  Json j = smoke_config(2);
  j["train"]["base_lr"] = 1e30;
  const auto cfg = write_json(kRoot / "nan.json", j);
  EXPECT_EQ(run("train --config " + cfg.string() + " --out " + out.string(), out / "log.txt"), 2);
  EXPECT_NE(slurp(out / "log.txt").find("non-finite training loss at epoch"), std::string::npos);
}

TEST(CliTrain, InvalidTrainConfigExitsWithValidationError) {
  Json j = smoke_config(2);
  j["train"]["warmup_epochs"] = 5;
  const auto cfg = write_json(kRoot / "warm.json", j);
  EXPECT_EQ(run("train --config " + cfg.string() + " --out " + fresh("train_bad").string()), 1);
}

TEST(CliEval, SeparableToyCheckpointScoresPerfectly) {
  const auto data = fresh("square_data"), tr = fresh("square_train"), ev = fresh("square_eval");
  const auto manifest = write_square_dataset(data);
  Json cfg{{"train",
            {{"epochs", 10},
             {"warmup_epochs", 1},
             {"batch_size", 8},
             {"grad_accum_steps", 1},
             {"img_size", 32},
             {"base_lr", 1e-3},
             {"seed", 1},
             {"aug", {{"randaug", false}, {"jitter", false}, {"erasing", false}, {"mixing", false}}}}}};
  const auto cfg_path = write_json(kRoot / "square.json", cfg);
  ASSERT_EQ(run("train --config " + cfg_path.string() + " --manifest " + manifest.string() + " --out " + tr.string()), 0);
  ASSERT_EQ(run("eval --checkpoint " + (tr / "best.swqk").string() + " --manifest " + manifest.string() +
                " --split test --out " + ev.string()),
            0);
  const auto report = Json::parse(slurp(ev / "eval.json"));
  EXPECT_EQ(report["accuracy"].get<double>(), 100.0);
  EXPECT_EQ(report["auc"].get<double>(), 1.0);
  EXPECT_EQ(report["n"].get<int>(), 16);
  const auto& c = report["confusion"];
  EXPECT_EQ(c["tp"].get<int>() + c["fp"].get<int>() + c["tn"].get<int>() + c["fn"].get<int>(), 16);

  const auto rows = read_csv(ev / "predictions.csv");
  ASSERT_EQ(rows.size(), 17u);  // header + one row per sample
  EXPECT_EQ(rows[0], (std::vector<std::string>{"index", "path", "label", "score", "predicted", "entropy"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double p = std::stod(rows[i][3]);
    EXPECT_NEAR(std::stod(rows[i][5]), predictive_entropy({1 - p, p}), 1e-7);
  }
}

TEST(CliEval, MissingCheckpointIsAValidationError) {
  EXPECT_EQ(run("eval --out " + fresh("eval_none").string()), 1);
}

TEST(CliBench, ReportsMedianAndIqr) {
  const auto out = fresh("bench");
  const auto cfg = write_json(kRoot / "bench.json",
                              Json{{"bench", {{"model", {{"preset", "micro"}, {"img_size", 32}}}, {"batch", 2}, {"warmup", 3}, {"timed", 12}}}});
  ASSERT_EQ(run("bench --config " + cfg.string() + " --out " + out.string()), 0);
  const auto r = Json::parse(slurp(out / "bench.json"));
  EXPECT_GT(r["median_img_per_s"].get<double>(), 0.0);
  EXPECT_GE(r["iqr_img_per_s"].get<double>(), 0.0);
  EXPECT_EQ(r["timed"].get<int>(), 12);
  EXPECT_EQ(r["warmup"].get<int>(), 3);
  EXPECT_TRUE(r["deterministic"].get<bool>());
  const auto bad = write_json(kRoot / "bench_bad.json", Json{{"bench", {{"timed", 5}}}});
  EXPECT_EQ(run("bench --config " + bad.string() + " --out " + out.string()), 1);
}
