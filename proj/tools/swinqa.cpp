// swinqa command line: synth | train | eval | inspect | bench.
//
// Precedence: flag > config file > built-in default. Every command writes the
// fully resolved config to <out>/resolved_config.json.
// Exit codes: 0 success, 1 invalid config or input, 2 runtime abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "swinqa/checkpoint.hpp"
#include "swinqa/model_stats.hpp"
#include "swinqa/run_config.hpp"
#include "swinqa/train.hpp"

namespace fs = std::filesystem;
using namespace swinqa;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out = "out";
  std::string checkpoint;
  std::string manifest;
  std::string resume;
  std::string split;
};

RunConfig load_run_config(const Flags& f) {
  if (f.config.empty()) return run_config_from_json(Json::object());
  std::ifstream in(f.config);
  if (!in) throw ConfigError("cannot open config '" + f.config + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("config '" + f.config + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

void write_resolved(const RunConfig& c, const Flags& f) {
  fs::create_directories(f.out);
  write_text(fs::path(f.out) / "resolved_config.json", to_json(c).dump(2) + "\n");
}

// Records for the configured manifest, or the synth benchmark when none is set.
std::vector<SampleRecord> load_records(const RunConfig& c) {
  if (c.data.manifest.empty()) {
    return make_benchmark(c.synth.spec, c.synth.n_train, c.synth.n_val, c.synth.n_test);
  }
  auto records = load_manifest(c.data.manifest);
  load_images(records);
  return records;
}

void print_counts(const std::vector<SampleRecord>& records) {
  for (const auto& [split, n] : split_counts(records)) {
    std::size_t pos = 0;
    for (const auto& r : records) pos += r.split == split && r.label == 1;
    std::cout << to_string(split) << ": " << n << " (" << pos << " positive)\n";
  }
}

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

int cmd_synth(RunConfig c, const Flags& f) {
  if (f.seed) c.synth.spec.seed = *f.seed;
  c.validate();
  write_resolved(c, f);
  const auto records = make_benchmark(c.synth.spec, c.synth.n_train, c.synth.n_val, c.synth.n_test, f.out);
  print_counts(records);
  const auto baseline = ThresholdBaseline::fit(filter_split(records, Split::train));
  std::printf("threshold baseline val accuracy: %.2f%%\n", 100.0 * baseline.accuracy(filter_split(records, Split::val)));
  std::cout << "wrote " << (fs::path(f.out) / "manifest.csv").string() << "\n";
  return 0;
}

int cmd_train(RunConfig c, const Flags& f) {
  if (f.seed) c.train.seed = *f.seed;
  if (f.workers) c.train.workers = *f.workers;
  if (!f.manifest.empty()) c.data.manifest = f.manifest;
  if (!f.resume.empty()) c.train.resume_checkpoint = f.resume;
  c.validate();
  write_resolved(c, f);
  const auto records = load_records(c);
  print_counts(records);
  const auto train_set = Dataset::from_records(filter_split(records, Split::train));
  const auto val_set = Dataset::from_records(filter_split(records, Split::val));
  const fs::path out(f.out);
  TrainHooks hooks;
  hooks.log = [](const std::string& s) { std::cout << s << std::endl; };
  // Keeps a resumable checkpoint current after every epoch.
  hooks.on_state = [&](const Checkpoint& ck) { save_checkpoint((out / "last.swqk").string(), ck); };
  const auto result = train(c.train, train_set, val_set, hooks);
  save_checkpoint((out / "last.swqk").string(), result.last);
  if (result.best) save_checkpoint((out / "best.swqk").string(), *result.best);
  std::ofstream hist(out / "history.csv", std::ios::binary);
  write_history_csv(hist, result.history);
  if (result.best_report) {
    std::printf("best epoch %zu: val_acc %.2f val_auc %s\n", result.best->epoch, result.best_report->accuracy,
                result.best_report->auc ? std::to_string(*result.best_report->auc).c_str() : "NA");
  }
  return 0;
}

int cmd_eval(RunConfig c, const Flags& f) {
  if (!f.checkpoint.empty()) c.eval.checkpoint = f.checkpoint;
  if (!f.manifest.empty()) c.data.manifest = f.manifest;
  if (!f.split.empty()) c.eval.split = f.split;
  if (f.workers) c.train.workers = *f.workers;
  if (c.eval.checkpoint.empty()) throw ConfigError("eval: no checkpoint given (--checkpoint or eval.checkpoint)");
  c.validate();
  write_resolved(c, f);
  const Checkpoint ck = load_checkpoint(c.eval.checkpoint);
  // Normalization follows the run that produced the checkpoint.
  AugConfig aug = c.train.aug;
  if (ck.extra.contains("train_config")) aug = train_config_from_json(ck.extra.at("train_config")).aug;
  auto records = load_records(c);
  if (c.eval.split != "all") records = filter_split(records, parse_split(c.eval.split));
  if (records.empty()) throw ConfigError("eval: split '" + c.eval.split + "' has no records");
  const auto report = evaluate(ck, Dataset::from_records(records), aug, c.eval.batch_size, c.train.workers);

  const Json j{{"checkpoint", c.eval.checkpoint},
               {"split", c.eval.split},
               {"n", report.count()},
               {"accuracy", report.accuracy},
               {"auc", opt_json(report.auc)},
               {"mean_loss", report.mean_loss},
               {"confusion", {{"tp", report.tp}, {"fp", report.fp}, {"tn", report.tn}, {"fn", report.fn}}}};
  write_text(fs::path(f.out) / "eval.json", j.dump(2) + "\n");
  std::ofstream csv(fs::path(f.out) / "predictions.csv", std::ios::binary);
  csv << "index,path,label,score,predicted,entropy\n";
  char buf[128];
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    const auto& s = report.samples[i];
    std::snprintf(buf, sizeof buf, ",%d,%.9g,%d,%.9g\n", s.label, s.score, s.predicted, s.entropy);
    csv << i << ',' << records[i].path << buf;
  }
  std::printf("accuracy %.2f%%  auc %s  n %zu\n", report.accuracy,
              report.auc ? std::to_string(*report.auc).c_str() : "NA", report.count());
  return 0;
}

int cmd_inspect(RunConfig c, const Flags& f) {
  c.validate();
  write_resolved(c, f);
  std::vector<SwinConfig> rows;
  if (!f.checkpoint.empty()) {
    rows.push_back(load_checkpoint(f.checkpoint).config);
  } else {
    rows = {SwinConfig::tiny(224, 7), SwinConfig::small(224, 7), SwinConfig::base(224, 7), SwinConfig::base(1024, 8),
            c.train.model_config()};
  }
  Json table = Json::array();
  std::printf("%-8s %6s %6s %14s %10s\n", "model", "img", "window", "params", "GFLOPs");
  for (const auto& m : rows) {
    const auto params = count_params(m);
    const double gflops = count_flops(m, m.img_size, m.img_size) / 1e9;
    std::printf("%-8s %6zu %6zu %14llu %10.2f\n", m.name.c_str(), m.img_size, m.window,
                static_cast<unsigned long long>(params), gflops);
    table.push_back({{"model", m.name}, {"img_size", m.img_size}, {"window", m.window}, {"params", params}, {"gflops", gflops}});
  }
  write_text(fs::path(f.out) / "inspect.json", table.dump(2) + "\n");
  return 0;
}

int cmd_bench(RunConfig c, const Flags& f) {
  if (f.seed) c.bench.seed = *f.seed;
  c.validate();
  write_resolved(c, f);
  const auto& m = c.bench.model;
  Rng rng(c.bench.seed, {kStreamInit});
  const auto params = init_params<float>(m, &rng);
  std::vector<float> pixels(c.bench.batch * m.img_size * m.img_size * m.in_channels);
  for (auto& v : pixels) v = static_cast<float>(rng.normal());
  const auto images = Tensor<float>::from({c.bench.batch, m.img_size, m.img_size, m.in_channels}, pixels);
  std::vector<float> first, last;
  auto run = [&] {
    NoGradGuard no_grad;
    const auto logits = forward(images, m, params, false, nullptr);
    const auto v = logits.values();
    last.assign(v.begin(), v.end());
    if (first.empty()) first = last;
  };
  const auto r = measure_throughput(run, c.bench.batch, c.bench.warmup, c.bench.timed);
  const Json j{{"model", m.name},          {"img_size", m.img_size}, {"window", m.window},
               {"batch", r.batch},         {"warmup", r.warmup},     {"timed", r.timed},
               {"median_img_per_s", r.median}, {"iqr_img_per_s", r.iqr}, {"q1", r.q1},
               {"q3", r.q3},               {"deterministic", first == last}};
  write_text(fs::path(f.out) / "bench.json", j.dump(2) + "\n");
  std::printf("%s %zupx: median %.2f img/s, IQR %.2f (%zu timed, %zu warmup)\n", m.name.c_str(), m.img_size, r.median,
              r.iqr, r.timed, r.warmup);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shifted-window transformer for binary image quality classification"};
  app.require_subcommand(1, 1);
  Flags f;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "Run config JSON");
    sub->add_option("--out", f.out, "Output directory")->capture_default_str();
  };
  auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark (PGM images + manifest.csv)");
  auto* trn = app.add_subcommand("train", "Train and write checkpoints, history.csv, resolved config");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; writes eval.json and predictions.csv");
  auto* inspect = app.add_subcommand("inspect", "Parameter / GFLOP table");
  auto* bench = app.add_subcommand("bench", "Eval-mode throughput (median and IQR)");
  for (auto* s : {synth, trn, eval, inspect, bench}) common(s);
  for (auto* s : {synth, trn, bench}) s->add_option("--seed", f.seed, "Seed override");
  for (auto* s : {trn, eval}) {
    s->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
    s->add_option("--manifest", f.manifest, "Dataset manifest CSV (default: synth benchmark in memory)");
  }
  trn->add_option("--resume", f.resume, "Resume from a checkpoint written by train");
  eval->add_option("--checkpoint", f.checkpoint, "Checkpoint to evaluate");
  eval->add_option("--split", f.split, "train | val | test | all");
  inspect->add_option("--checkpoint", f.checkpoint, "Report this checkpoint's model instead of the presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const RunConfig c = load_run_config(f);
    if (synth->parsed()) return cmd_synth(c, f);
    if (trn->parsed()) return cmd_train(c, f);
    if (eval->parsed()) return cmd_eval(c, f);
    if (inspect->parsed()) return cmd_inspect(c, f);
    return cmd_bench(c, f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
