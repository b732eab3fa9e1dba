#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace swinqa {

// Area under the ROC curve as P(score_pos > score_neg) + P(tie) / 2.
// Computed on integer counts (2 * wins + ties over 2 * P * N), so it equals
// brute-force pair counting exactly. nullopt when a class is missing.
inline std::optional<double> auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc_roc: scores/labels length mismatch");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("auc_roc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw std::invalid_argument("auc_roc: NaN score");
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::uint64_t pos = 0, neg = 0, twice_wins = 0, neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t gp = 0, gn = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? gp : gn) += 1;
      ++j;
    }
    twice_wins += 2 * gp * neg_below + gp * gn;
    neg_below += gn;
    pos += gp;
    neg += gn;
    i = j;
  }
  if (pos == 0 || neg == 0) return std::nullopt;
  return static_cast<double>(twice_wins) / static_cast<double>(2 * pos * neg);
}

// -sum p ln p in nats, with 0 ln 0 = 0.
inline double predictive_entropy(const std::vector<double>& probs) {
  double sum = 0, h = 0;
  for (double p : probs) {
    if (!(p >= 0.0) || p > 1.0 + 1e-12) throw std::invalid_argument("predictive_entropy: probabilities must lie in [0, 1]");
    sum += p;
    if (p > 0) h -= p * std::log(p);
  }
  if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("predictive_entropy: probabilities sum to " + std::to_string(sum));
  return h;
}

struct SamplePrediction {
  double score = 0;  // probability of the positive class
  int label = 0;
  double entropy = 0;
  int predicted = 0;
};

struct EvalReport {
  double accuracy = 0;  // percent
  std::optional<double> auc;
  double mean_loss = 0;
  std::vector<SamplePrediction> samples;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t count() const { return tp + fp + tn + fn; }
};

// Accuracy at threshold 0.5, confusion counts and AUC from per-sample predictions.
inline EvalReport summarize(std::vector<SamplePrediction> samples, double mean_loss) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalReport r;
  r.mean_loss = mean_loss;
  std::vector<double> scores;
  std::vector<int> labels;
  for (auto& s : samples) {
    s.predicted = s.score > 0.5 ? 1 : 0;
    if (s.label == 1) (s.predicted ? r.tp : r.fn) += 1;
    else (s.predicted ? r.fp : r.tn) += 1;
    scores.push_back(s.score);
    labels.push_back(s.label);
  }
  r.accuracy = 100.0 * static_cast<double>(r.tp + r.tn) / static_cast<double>(samples.size());
  r.auc = auc_roc(scores, labels);
  r.samples = std::move(samples);
  return r;
}

struct ThroughputReport {
  double median = 0;  // images / second
  double iqr = 0;
  double q1 = 0, q3 = 0;
  std::size_t timed = 0, warmup = 0, batch = 0;
};

// Linear-interpolated quantile of sorted data.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty input");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

// Times `run_batch` (one eval forward of `batch` images) n_timed times after
// n_warmup discarded calls; reports images/second.
template <class F>
ThroughputReport measure_throughput(F&& run_batch, std::size_t batch, std::size_t n_warmup, std::size_t n_timed) {
  if (n_timed < 10) throw std::invalid_argument("throughput: n_timed must be >= 10");
  if (batch == 0) throw std::invalid_argument("throughput: batch must be positive");
  for (std::size_t i = 0; i < n_warmup; ++i) run_batch();
  std::vector<double> rates;
  for (std::size_t i = 0; i < n_timed; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run_batch();
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rates.push_back(static_cast<double>(batch) / std::max(sec, 1e-9));
  }
  ThroughputReport r;
  r.q1 = quantile(rates, 0.25);
  r.q3 = quantile(rates, 0.75);
  r.median = quantile(rates, 0.5);
  r.iqr = r.q3 - r.q1;
  r.timed = n_timed;
  r.warmup = n_warmup;
  r.batch = batch;
  return r;
}

}  // namespace swinqa
