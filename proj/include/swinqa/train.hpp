#pragma once

// Training recipe: AdamW, per-step linear warmup + linear decay, gradient
// accumulation, stochastic depth, the augmentation pipeline, best-checkpoint
// retention by validation AUC (ties by accuracy), and evaluation.
//
// Every random draw comes from a stream derived from (seed, purpose, epoch,
// index), so runs are reproducible, resumable mid-schedule, and independent
// of the worker count.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "swinqa/augment.hpp"
#include "swinqa/checkpoint.hpp"
#include "swinqa/data.hpp"
#include "swinqa/json_io.hpp"
#include "swinqa/metrics.hpp"
#include "swinqa/ops.hpp"
#include "swinqa/optim.hpp"
#include "swinqa/schedule.hpp"
#include "swinqa/swin.hpp"

namespace swinqa {

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TrainMode { finetune, scratch };

inline std::string to_string(TrainMode m) { return m == TrainMode::finetune ? "finetune" : "scratch"; }

struct TrainConfig {
  TrainMode mode = TrainMode::scratch;
  double base_lr = 5e-4;
  double weight_decay = 1e-8;
  std::size_t epochs = 300;
  std::size_t warmup_epochs = 20;
  std::size_t batch_size = 64;
  std::size_t grad_accum_steps = 2;
  std::uint64_t seed = 0;
  std::string model = "micro";
  std::size_t img_size = 64;
  std::size_t window = 4;
  std::optional<double> drop_path;  // overrides the preset's maximum rate
  AugConfig aug;
  std::string init_checkpoint;    // finetune: weights only
  std::string resume_checkpoint;  // continue at the recorded epoch
  std::size_t eval_batch_size = 50;
  std::size_t workers = 1;

  static TrainConfig finetune() {
    TrainConfig c;
    c.mode = TrainMode::finetune;
    c.base_lr = 6e-5;
    c.epochs = 60;
    c.warmup_epochs = 5;
    return c;
  }
  static TrainConfig scratch() { return TrainConfig{}; }
  static TrainConfig for_mode(TrainMode m) { return m == TrainMode::finetune ? finetune() : scratch(); }

  // (batch, accumulation) presets: "1024w8" = (16, 8), "224w7" = (64, 2).
  void apply_batch_preset(const std::string& name) {
    if (name == "1024w8") {
      batch_size = 16, grad_accum_steps = 8;
    } else if (name == "224w7") {
      batch_size = 64, grad_accum_steps = 2;
    } else {
      throw ConfigError("unknown batch preset '" + name + "' (expected 1024w8 or 224w7)");
    }
  }

  SwinConfig model_config() const {
    SwinConfig c = SwinConfig::by_name(model, img_size, window);
    if (drop_path) c.drop_path_max = *drop_path;
    c.validate();
    return c;
  }

  void validate() const {
    if (!(base_lr >= 0)) throw ConfigError("train: base_lr must be >= 0");
    if (!(weight_decay >= 0)) throw ConfigError("train: weight_decay must be >= 0");
    if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
    if (warmup_epochs >= epochs) throw ConfigError("train: warmup_epochs must be < epochs");
    if (batch_size == 0 || grad_accum_steps == 0 || eval_batch_size == 0) {
      throw ConfigError("train: batch_size, grad_accum_steps and eval_batch_size must be >= 1");
    }
    if (workers == 0) throw ConfigError("train: workers must be >= 1");
    if (!init_checkpoint.empty() && !resume_checkpoint.empty()) {
      throw ConfigError("train: init_checkpoint and resume_checkpoint are mutually exclusive");
    }
    try {
      aug.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("train.aug: ") + e.what());
    }
    (void)model_config();
  }
};

inline Json to_json(const TrainConfig& c) {
  return Json{{"mode", to_string(c.mode)},
              {"base_lr", c.base_lr},
              {"weight_decay", c.weight_decay},
              {"epochs", c.epochs},
              {"warmup_epochs", c.warmup_epochs},
              {"batch_size", c.batch_size},
              {"grad_accum_steps", c.grad_accum_steps},
              {"seed", c.seed},
              {"model", c.model},
              {"img_size", c.img_size},
              {"window", c.window},
              {"drop_path", c.drop_path ? Json(*c.drop_path) : Json(nullptr)},
              {"aug", to_json(c.aug)},
              {"init_checkpoint", c.init_checkpoint},
              {"resume_checkpoint", c.resume_checkpoint},
              {"eval_batch_size", c.eval_batch_size},
              {"workers", c.workers}};
}

// "mode" picks the defaults; "batch_preset" applies a batch/accumulation pair
// before explicit batch_size / grad_accum_steps keys.
inline TrainConfig train_config_from_json(const Json& j, const std::string& ctx = "train") {
  StrictReader r(j, ctx);
  std::string mode = "scratch";
  r.get("mode", mode);
  if (mode != "scratch" && mode != "finetune") throw ConfigError(ctx + ".mode: expected scratch or finetune");
  TrainConfig c = TrainConfig::for_mode(mode == "finetune" ? TrainMode::finetune : TrainMode::scratch);
  std::string preset;
  r.get("batch_preset", preset);
  if (!preset.empty()) c.apply_batch_preset(preset);
  r.get("base_lr", c.base_lr);
  r.get("weight_decay", c.weight_decay);
  r.get("epochs", c.epochs);
  r.get("warmup_epochs", c.warmup_epochs);
  r.get("batch_size", c.batch_size);
  r.get("grad_accum_steps", c.grad_accum_steps);
  r.get("seed", c.seed);
  r.get("model", c.model);
  r.get("img_size", c.img_size);
  r.get("window", c.window);
  if (const Json* dp = r.child("drop_path"); dp && !dp->is_null()) c.drop_path = dp->get<double>();
  if (const Json* a = r.child("aug")) c.aug = aug_config_from_json(*a, ctx + ".aug");
  r.get("init_checkpoint", c.init_checkpoint);
  r.get("resume_checkpoint", c.resume_checkpoint);
  r.get("eval_batch_size", c.eval_batch_size);
  r.get("workers", c.workers);
  r.finish();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }

  static Dataset from_records(const std::vector<SampleRecord>& records) {
    Dataset d;
    for (const auto& r : records) {
      d.images.push_back(r.image.empty() ? read_pnm(r.path) : r.image);
      d.labels.push_back(r.label);
    }
    return d;
  }
};

// Runs fn(i) for i in [0, n) on up to `workers` threads, contiguous blocks.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

enum StreamTag : std::uint64_t { kStreamInit = 1, kStreamShuffle, kStreamAug, kStreamMix, kStreamDrop };

// Eval-mode predictions: positive-class softmax score, entropy and hard-label
// cross-entropy per sample.
template <class T>
EvalReport evaluate(const SwinConfig& cfg, const SwinParams<T>& params, const Dataset& data, const AugConfig& aug,
                    std::size_t batch_size = 50, std::size_t workers = 1) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const AugPipeline pipeline(aug, PipelineMode::eval);
  const std::size_t n_batches = (data.size() + batch_size - 1) / batch_size;
  std::vector<SamplePrediction> preds(data.size());
  std::vector<double> losses(data.size());
  parallel_for(n_batches, workers, [&](std::size_t b) {
    NoGradGuard no_grad;
    LabeledBatch batch;
    Rng unused(0);
    const std::size_t lo = b * batch_size, hi = std::min(data.size(), lo + batch_size);
    for (std::size_t i = lo; i < hi; ++i) {
      batch.images.push_back(pipeline.prepare(data.images[i], cfg.img_size, cfg.img_size, unused));
      batch.labels.push_back(one_hot(static_cast<std::size_t>(data.labels[i]), cfg.num_classes));
    }
    const auto probs = softmax(forward(pipeline.to_tensor<T>(batch), cfg, params, false, nullptr), -1);
    const auto p = probs.values();
    for (std::size_t i = lo; i < hi; ++i) {
      std::vector<double> row(cfg.num_classes);
      for (std::size_t k = 0; k < cfg.num_classes; ++k) row[k] = static_cast<double>(p[(i - lo) * cfg.num_classes + k]);
      const double sum = std::accumulate(row.begin(), row.end(), 0.0);
      for (auto& v : row) v /= sum;  // absorb float rounding before the entropy check
      preds[i].score = row[1];
      preds[i].label = data.labels[i];
      preds[i].entropy = predictive_entropy(row);
      losses[i] = -std::log(std::max(row[static_cast<std::size_t>(data.labels[i])], 1e-30));
    }
  });
  const double mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
  return summarize(std::move(preds), mean_loss);
}

inline EvalReport evaluate(const Checkpoint& ck, const Dataset& data, const AugConfig& aug, std::size_t batch_size = 50,
                           std::size_t workers = 1) {
  const auto params = import_params<float>(ck.config, ck.params);
  return evaluate(ck.config, params, data, aug, batch_size, workers);
}

struct TrainResult {
  Checkpoint last;                 // includes optimizer state, for resuming
  std::optional<Checkpoint> best;  // best validation epoch of this run
  std::vector<HistoryRow> history;
  std::optional<EvalReport> best_report;
};

struct TrainHooks {
  std::function<void(const std::string&)> log;
  std::function<void(const HistoryRow&)> on_epoch;
  // Resumable state (with optimizer moments) after each completed epoch.
  std::function<void(const Checkpoint&)> on_state;
};

namespace detail {

inline bool better(const std::optional<double>& auc, double acc, const std::optional<double>& best_auc, double best_acc,
                   bool have_best) {
  if (!have_best) return true;
  const double a = auc.value_or(-1.0), b = best_auc.value_or(-1.0);
  if (a != b) return a > b;
  return acc > best_acc;
}

}  // namespace detail

inline TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
  if (val_set.size() == 0) throw std::invalid_argument("train: empty validation set");
  auto log = [&](const std::string& s) {
    if (hooks.log) hooks.log(s);
  };

  const SwinConfig model = cfg.model_config();
  SwinParams<float> params;
  AdamState optim;
  std::size_t start_epoch = 0;
  std::vector<HistoryRow> history;
  if (!cfg.resume_checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(cfg.resume_checkpoint);
    if (to_json(ck.config) != to_json(model)) throw ConfigError("resume: checkpoint model config differs from train config");
    if (ck.seed != cfg.seed) throw ConfigError("resume: checkpoint seed differs from train config");
    params = import_params<float>(model, ck.params);
    if (ck.optim) optim = *ck.optim;
    start_epoch = ck.epoch;
    history = ck.history;
    log("resuming at epoch " + std::to_string(start_epoch));
  } else if (!cfg.init_checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(cfg.init_checkpoint);
    params = import_params<float>(model, ck.params);
    log("initialized weights from " + cfg.init_checkpoint);
  } else {
    Rng init(cfg.seed, {kStreamInit});
    params = init_params<float>(model, &init);
  }
  auto named = params.named();
  std::vector<Tensor<float>*> tensors;
  for (auto& [name, t] : named) tensors.push_back(t);

  const std::size_t n = train_set.size();
  const std::size_t micro_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t steps_per_epoch = (micro_per_epoch + cfg.grad_accum_steps - 1) / cfg.grad_accum_steps;
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;
  const std::size_t warmup_steps = cfg.warmup_epochs * steps_per_epoch;
  const AugPipeline pipeline(cfg.aug, PipelineMode::train);

  TrainResult result;
  bool have_best = false;
  std::optional<double> best_auc;
  double best_acc = 0;
  for (const auto& h : history) {
    if (detail::better(h.val_auc, h.val_acc, best_auc, best_acc, have_best)) {
      have_best = true, best_auc = h.val_auc, best_acc = h.val_acc;
    }
  }

  auto snapshot = [&](std::size_t epochs_done, bool with_optim) {
    Checkpoint ck;
    ck.config = model;
    ck.params = export_params(params);
    if (with_optim) ck.optim = optim;
    ck.epoch = epochs_done;
    ck.seed = cfg.seed;
    ck.history = history;
    TrainConfig recorded = cfg;
    // Resumed vs uninterrupted runs, and any worker count, write identical files.
    recorded.resume_checkpoint.clear();
    recorded.workers = 1;
    ck.extra = Json{{"train_config", to_json(recorded)}};
    return ck;
  };

  std::size_t step = start_epoch * steps_per_epoch;
  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    {
      Rng shuffle(cfg.seed, {kStreamShuffle, epoch});
      std::shuffle(order.begin(), order.end(), shuffle.engine());
    }
    double loss_sum = 0;
    std::size_t accumulated = 0;
    double lr = 0;
    for (std::size_t mb = 0; mb < micro_per_epoch; ++mb) {
      const std::size_t lo = mb * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      LabeledBatch batch;
      batch.images.resize(hi - lo);
      batch.labels.resize(hi - lo);
      parallel_for(hi - lo, cfg.workers, [&](std::size_t k) {
        const std::size_t idx = order[lo + k];
        Rng rng(cfg.seed, {kStreamAug, epoch, idx});
        batch.images[k] = pipeline.prepare(train_set.images[idx], model.img_size, model.img_size, rng);
        batch.labels[k] = one_hot(static_cast<std::size_t>(train_set.labels[idx]), model.num_classes);
      });
      {
        Rng mix(cfg.seed, {kStreamMix, epoch, mb});
        batch = pipeline.mix(std::move(batch), mix);
      }
      Rng drop(cfg.seed, {kStreamDrop, epoch, mb});
      const auto logits = forward(pipeline.to_tensor<float>(batch), model, params, true, &drop);
      const auto loss = cross_entropy_soft(logits, pipeline.labels_tensor<float>(batch));
      const double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch + 1 << ", step " << step << ", lr "
            << lr_at(std::min(step, total_steps - 1), total_steps, warmup_steps, cfg.base_lr);
        throw TrainingAborted(msg.str());
      }
      loss.backward();
      loss_sum += lv * static_cast<double>(hi - lo);
      ++accumulated;
      if (accumulated == cfg.grad_accum_steps || mb + 1 == micro_per_epoch) {
        lr = lr_at(step, total_steps, warmup_steps, cfg.base_lr);
        adamw_step(tensors, optim, lr, cfg.weight_decay, 1.0 / static_cast<double>(accumulated));
        params.zero_grad();
        accumulated = 0;
        ++step;
      }
    }

    const auto report = evaluate(model, params, val_set, cfg.aug, cfg.eval_batch_size, cfg.workers);
    HistoryRow row{epoch + 1, loss_sum / static_cast<double>(n), report.accuracy, report.auc, lr};
    history.push_back(row);
    std::ostringstream line;
    line << "epoch " << row.epoch << "/" << cfg.epochs << " loss " << row.train_loss << " val_acc " << row.val_acc
         << " val_auc " << (row.val_auc ? std::to_string(*row.val_auc) : "NA") << " lr " << row.lr;
    log(line.str());
    if (hooks.on_epoch) hooks.on_epoch(row);
    if (detail::better(report.auc, report.accuracy, best_auc, best_acc, have_best)) {
      have_best = true, best_auc = report.auc, best_acc = report.accuracy;
      result.best = snapshot(epoch + 1, false);
      result.best_report = report;
    }
    if (hooks.on_state) hooks.on_state(snapshot(epoch + 1, true));
  }
  result.last = snapshot(cfg.epochs, true);
  result.history = history;
  if (result.best) result.best->history = history;
  return result;
}

}  // namespace swinqa
