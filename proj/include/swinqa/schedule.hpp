#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace swinqa {

// Linear warmup from 0 to base_lr over `warmup_steps`, then linear decay
// reaching 0 at `total_steps`. Peaks at exactly base_lr when step == warmup_steps.
inline double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double base_lr) {
  if (step >= total_steps || warmup_steps >= total_steps) {
    throw std::out_of_range("lr_at: need step < total_steps and warmup_steps < total_steps (step=" +
                            std::to_string(step) + ", warmup=" + std::to_string(warmup_steps) +
                            ", total=" + std::to_string(total_steps) + ")");
  }
  if (step < warmup_steps) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  return base_lr * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup_steps);
}

// Per-block drop-path probabilities ramping linearly from 0 to p_max.
inline std::vector<double> stochastic_depth_rates(double p_max, std::size_t total_blocks) {
  if (total_blocks == 0) throw std::invalid_argument("stochastic_depth_rates: need at least one block");
  std::vector<double> rates(total_blocks, 0.0);
  if (total_blocks == 1) return rates;
  for (std::size_t i = 0; i < total_blocks; ++i) {
    rates[i] = p_max * (static_cast<double>(i) / static_cast<double>(total_blocks - 1));
  }
  return rates;
}

}  // namespace swinqa
