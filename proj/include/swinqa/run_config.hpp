#pragma once

// One JSON document configures every command. Sections a command does not use
// are still validated, so a typo anywhere is reported. Missing keys take the
// defaults below; the filled-in document is echoed as resolved_config.json.

#include <string>

#include "swinqa/json_io.hpp"
#include "swinqa/train.hpp"

namespace swinqa {

inline constexpr int kRunSchemaVersion = 1;

struct SynthSection {
  SynthSpec spec;
  std::size_t n_train = 400, n_val = 100, n_test = 100;
};

struct DataSection {
  std::string manifest;  // empty: generate the synth benchmark in memory
};

struct EvalSection {
  std::string checkpoint;
  std::string split = "test";  // train | val | test | all
  std::size_t batch_size = 50;
};

struct BenchSection {
  SwinConfig model = SwinConfig::micro();
  std::size_t batch = 8;
  std::size_t warmup = 2;
  std::size_t timed = 10;
  std::uint64_t seed = 0;
};

struct RunConfig {
  SynthSection synth;
  DataSection data;
  TrainConfig train;
  EvalSection eval;
  BenchSection bench;

  void validate() const {
    synth.spec.validate();
    for (auto n : {synth.n_train, synth.n_val, synth.n_test}) {
      if (n < 2 || n % 2 != 0) throw ConfigError("synth: split counts must be even and >= 2");
    }
    train.validate();
    if (eval.split != "all") {
      try {
        (void)parse_split(eval.split);
      } catch (const DataError&) {
        throw ConfigError("eval.split: expected train, val, test or all");
      }
    }
    if (eval.batch_size == 0) throw ConfigError("eval.batch_size must be >= 1");
    bench.model.validate();
    if (bench.batch == 0) throw ConfigError("bench.batch must be >= 1");
    if (bench.timed < 10) throw ConfigError("bench.timed must be >= 10");
  }
};

inline Json to_json(const RunConfig& c) {
  return Json{{"schema_version", kRunSchemaVersion},
              {"synth",
               {{"spec", to_json(c.synth.spec)},
                {"n_train", c.synth.n_train},
                {"n_val", c.synth.n_val},
                {"n_test", c.synth.n_test}}},
              {"data", {{"manifest", c.data.manifest}}},
              {"train", to_json(c.train)},
              {"eval", {{"checkpoint", c.eval.checkpoint}, {"split", c.eval.split}, {"batch_size", c.eval.batch_size}}},
              {"bench",
               {{"model", to_json(c.bench.model)},
                {"batch", c.bench.batch},
                {"warmup", c.bench.warmup},
                {"timed", c.bench.timed},
                {"seed", c.bench.seed}}}};
}

inline RunConfig run_config_from_json(const Json& j) {
  StrictReader r(j, "config");
  int version = kRunSchemaVersion;
  r.get("schema_version", version);
  if (version != kRunSchemaVersion) {
    throw ConfigError("config.schema_version: expected " + std::to_string(kRunSchemaVersion) + ", got " +
                      std::to_string(version));
  }
  RunConfig c;
  if (const Json* s = r.child("synth")) {
    StrictReader rs(*s, "synth");
    if (const Json* spec = rs.child("spec")) c.synth.spec = synth_spec_from_json(*spec, "synth.spec");
    rs.get("n_train", c.synth.n_train);
    rs.get("n_val", c.synth.n_val);
    rs.get("n_test", c.synth.n_test);
    rs.finish();
  }
  if (const Json* d = r.child("data")) {
    StrictReader rd(*d, "data");
    rd.get("manifest", c.data.manifest);
    rd.finish();
  }
  if (const Json* t = r.child("train")) c.train = train_config_from_json(*t, "train");
  if (const Json* e = r.child("eval")) {
    StrictReader re(*e, "eval");
    re.get("checkpoint", c.eval.checkpoint);
    re.get("split", c.eval.split);
    re.get("batch_size", c.eval.batch_size);
    re.finish();
  }
  if (const Json* b = r.child("bench")) {
    StrictReader rb(*b, "bench");
    if (const Json* m = rb.child("model")) c.bench.model = swin_config_from_json(*m, "bench.model");
    rb.get("batch", c.bench.batch);
    rb.get("warmup", c.bench.warmup);
    rb.get("timed", c.bench.timed);
    rb.get("seed", c.bench.seed);
    rb.finish();
  }
  r.finish();
  try {
    c.validate();
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace swinqa
