#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "swinqa/tensor.hpp"

namespace swinqa {

// Compares backward() against central differences over every coordinate of
// every input. Returns max |a - n| / max(|a|, |n|, 1e-8).
inline double grad_check(const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& f,
                         std::vector<Tensor<double>> inputs, double h = 1e-6) {
  if (!(h >= 1e-6 && h <= 1e-3)) throw std::invalid_argument("grad_check: step must lie in [1e-6, 1e-3]");
  for (auto& x : inputs) {
    if (!x.requires_grad()) x = x.detach(true);
    x.zero_grad();
  }
  Tensor<double> out = f(inputs);
  if (out.numel() != 1) throw DimensionError("grad_check: function must be scalar, got " + to_string(out.shape()));
  out.backward();

  double worst = 0;
  for (auto& x : inputs) {
    std::vector<double> analytic(x.numel(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
    auto values = x.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f(inputs).item();
      values[i] = saved - h;
      const double down = f(inputs).item();
      values[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

inline double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f, const Tensor<double>& x,
                         double h = 1e-6) {
  return grad_check([&](const std::vector<Tensor<double>>& in) { return f(in[0]); }, {x}, h);
}

}  // namespace swinqa
