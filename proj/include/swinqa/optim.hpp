#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "swinqa/tensor.hpp"

namespace swinqa {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
};

// One AdamW update with decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
// `grads[i]` pairs with `params[i]` (empty = zero gradient); `grad_scale`
// multiplies every gradient (used to average accumulated micro-batch sums).
// Moments are allocated on the first call.
template <class T>
void adamw_step(const std::vector<Tensor<T>*>& params, const std::vector<std::span<const T>>& grads,
                AdamState& state, double lr, double wd, double grad_scale = 1.0) {
  if (lr < 0) throw std::invalid_argument("adamw_step: negative learning rate");
  if (params.size() != grads.size()) throw DimensionError("adamw_step: params/grads count mismatch");
  if (state.m.empty() && state.step == 0) {
    for (auto* p : params) {
      state.m.emplace_back(p->numel(), 0.0f);
      state.v.emplace_back(p->numel(), 0.0f);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adamw_step: optimizer state holds " + std::to_string(state.m.size()) + " tensors, model has " +
                         std::to_string(params.size()));
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::span<T> p = params[i]->mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.size() || v.size() != p.size()) {
      throw DimensionError("adamw_step: moment shape mismatch for tensor " + std::to_string(i));
    }
    const std::span<const T> g = grads[i];
    if (!g.empty() && g.size() != p.size()) throw DimensionError("adamw_step: gradient shape mismatch for tensor " + std::to_string(i));
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.empty() ? 0.0 : static_cast<double>(g[k]) * grad_scale;
      const double mk = state.beta1 * m[k] + (1 - state.beta1) * gk;
      const double vk = state.beta2 * v[k] + (1 - state.beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double update = (mk / bc1) / (std::sqrt(vk / bc2) + state.eps) + wd * static_cast<double>(p[k]);
      p[k] = static_cast<T>(static_cast<double>(p[k]) - lr * update);
    }
  }
}

// Convenience form reading each parameter's accumulated gradient (absent = 0).
template <class T>
void adamw_step(const std::vector<Tensor<T>*>& params, AdamState& state, double lr, double wd, double grad_scale = 1.0) {
  std::vector<std::span<const T>> grads;
  for (auto* p : params) grads.push_back(p->grad());
  adamw_step(params, grads, state, lr, wd, grad_scale);
}

}  // namespace swinqa
