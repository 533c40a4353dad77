// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "lccrl/params.hpp"

namespace lccrl {

using LossFn = std::function<Tensor(Tape&)>;

struct GradCheckOptions {
  Real epsilon = 1e-3;
  // Coordinates sampled per parameter tensor; tensors at or below this size
  // are checked exhaustively.
  std::size_t samples_per_param = 16;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  Real max_relative_error = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  Real worst_analytic = 0;
  Real worst_numeric = 0;
  std::size_t coordinates_checked = 0;
};

inline Real relative_error(Real analytic, Real numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-12);
}

/// Compares tape gradients of `loss` against central differences on sampled
/// coordinates of every parameter in `params`.
///
/// `loss` must be deterministic: it is evaluated twice at the base point and
/// any difference (e.g. live dropout) raises ContractError.
inline GradCheckResult finite_difference_check(const LossFn& loss, ParamStore& params,
                                               const GradCheckOptions& options = {}) {
  if (!(options.epsilon >= 1e-6 && options.epsilon <= 1e-3)) {
    throw DomainError("finite-difference epsilon must lie in [1e-6, 1e-3]");
  }
  params.zero_grad();
  Real base;
  {
    Tape tape;
    Tensor l = loss(tape);
    base = l.item();
    tape.backward(l);
  }
  {
    Tape tape;
    if (loss(tape).item() != base) {
      params.zero_grad();
      throw ContractError("loss is not deterministic; disable dropout before checking gradients");
    }
  }
  std::vector<std::vector<Real>> analytic;
  for (const auto& e : params.entries()) {
    if (e.tensor.has_grad()) analytic.emplace_back(e.tensor.grad().begin(), e.tensor.grad().end());
    else analytic.emplace_back(e.tensor.size(), 0.0);
  }
  params.zero_grad();

  auto eval = [&loss]() {
    Tape tape;
    return loss(tape).item();
  };

  Rng rng(options.seed);
  GradCheckResult result;
  const auto& entries = params.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Tensor t = entries[k].tensor;
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.samples_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.samples_per_param);
    }
    auto values = t.values();
    for (std::size_t i : coords) {
      const Real saved = values[i];
      auto at = [&](Real offset) {
        values[i] = saved + offset;
        return eval();
      };
      const Real h = options.epsilon;
      // Five-point central difference: truncation error O(h^4).
      const Real numeric = (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
      values[i] = saved;
      const Real err = relative_error(analytic[k][i], numeric);
      ++result.coordinates_checked;
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = std::max(result.max_relative_error, err);
        if (err >= result.max_relative_error) {
          result.worst_parameter = entries[k].name;
          result.worst_index = i;
          result.worst_analytic = analytic[k][i];
          result.worst_numeric = numeric;
        }
      }
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace lccrl
