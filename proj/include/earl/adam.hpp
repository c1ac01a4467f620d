#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "earl/common.hpp"
#include "earl/tensor.hpp"

namespace earl {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<ad::Tensor> m;  // first moments, one per parameter
  std::vector<ad::Tensor> v;  // second moments
};

// One bias-corrected Adam update over `params`, in order. Frozen parameters
// are skipped but keep their slot in the state.
inline void optimizer_step(std::span<ad::Parameter* const> params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(ad::Tensor::zeros_like(p->value));
      state.v.push_back(ad::Tensor::zeros_like(p->value));
    }
  }
  if (state.m.size() != params.size()) throw ConfigError("optimizer state holds a different parameter list");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    if (!p.trainable) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (p.grad.shape() != p.value.shape() || m.shape() != p.value.shape()) {
      throw ConfigError("optimizer_step: shape mismatch for " + p.name);
    }
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      p.value[j] -= cfg.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.epsilon);
    }
  }
}

}  // namespace earl
