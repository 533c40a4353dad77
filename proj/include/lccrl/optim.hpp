// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "lccrl/params.hpp"

namespace lccrl {

struct AdamConfig {
  Real learning_rate = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
  // Global gradient-norm clip; 0 disables.
  Real clip_norm = 0.0;
};

/// Adam with bias correction. Moment buffers are laid out in the store's
/// parameter order.
class Adam {
 public:
  Adam(ParamStore& params, AdamConfig config = {}) : params_(&params), config_(config) {
    for (const auto& e : params.entries()) {
      m_.emplace_back(e.tensor.size(), 0.0);
      v_.emplace_back(e.tensor.size(), 0.0);
    }
  }

  const AdamConfig& config() const { return config_; }
  long steps() const { return step_; }

  /// Applies one update from the accumulated gradients, then clears them.
  void step() {
    ++step_;
    Real clip_scale = 1.0;
    if (config_.clip_norm > 0) {
      Real sq = 0;
      for (const auto& e : params_->entries()) {
        if (!e.tensor.has_grad() || params_->is_frozen(e.name)) continue;
        for (Real g : e.tensor.grad()) sq += g * g;
      }
      const Real norm = std::sqrt(sq);
      if (norm > config_.clip_norm) clip_scale = config_.clip_norm / norm;
    }
    const Real bc1 = 1.0 - std::pow(config_.beta1, static_cast<Real>(step_));
    const Real bc2 = 1.0 - std::pow(config_.beta2, static_cast<Real>(step_));
    const auto& entries = params_->entries();
    for (std::size_t k = 0; k < entries.size(); ++k) {
      Tensor t = entries[k].tensor;
      if (!t.has_grad() || params_->is_frozen(entries[k].name)) continue;
      auto g = t.grad();
      auto w = t.values();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const Real gi = g[i] * clip_scale;
        m[i] = config_.beta1 * m[i] + (1 - config_.beta1) * gi;
        v[i] = config_.beta2 * v[i] + (1 - config_.beta2) * gi * gi;
        const Real mhat = m[i] / bc1;
        const Real vhat = v[i] / bc2;
        w[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
      }
    }
    params_->zero_grad();
  }

 private:
  ParamStore* params_;
  AdamConfig config_;
  std::vector<std::vector<Real>> m_, v_;
  long step_ = 0;
};

}  // namespace lccrl
