// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "lccrl/optim.hpp"
#include "lccrl/layers.hpp"
#include "lccrl/vocab.hpp"

// Conversation-level mini-batch training with Adam and early stopping. Works
// with any model exposing `params` and
// `Tensor loss(Tape&, const IndexedConversation&, const RunContext&) const`.

namespace lccrl {

struct TrainConfig {
  std::size_t batch_size = 5;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;       // epochs without improvement before stopping
  Real heldout_fraction = 0.1;    // taken from the end of the training list
  Real dropout = 0.2;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t restarts = 1;       // models trained from different initial parameters
};

struct EpochStats {
  std::size_t epoch = 0;
  Real train_nll = 0;    // mean per conversation, measured during the epoch (epoch 0: before training)
  Real heldout_nll = std::numeric_limits<Real>::quiet_NaN();  // mean per conversation
};

struct TrainResult {
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
  Real best_selection_loss = std::numeric_limits<Real>::infinity();
  std::size_t restart = 0;  // which restart produced the kept parameters
};

struct DataSplit {
  std::vector<IndexedConversation> train;
  std::vector<IndexedConversation> heldout;
};

/// Moves the last floor(fraction * n) conversations into the held-out set.
inline DataSplit split_heldout(std::vector<IndexedConversation> data, Real fraction) {
  if (!(fraction >= 0 && fraction < 1)) throw ValidationError("held-out fraction must lie in [0, 1)");
  const auto n_held = static_cast<std::size_t>(std::floor(fraction * static_cast<Real>(data.size())));
  DataSplit s;
  s.heldout.assign(data.end() - static_cast<std::ptrdiff_t>(n_held), data.end());
  data.resize(data.size() - n_held);
  s.train = std::move(data);
  return s;
}

/// Mean loss per conversation with dropout off.
template <typename Model>
Real mean_loss(const Model& model, const std::vector<IndexedConversation>& data) {
  if (data.empty()) return std::numeric_limits<Real>::quiet_NaN();
  Real total = 0;
  RunContext ctx;
  for (const auto& c : data) {
    Tape tape;
    total += model.loss(tape, c, ctx).item();
  }
  return total / static_cast<Real>(data.size());
}

/// Trains in place and leaves the parameters at the epoch with the lowest
/// selection loss: held-out loss when a held-out set exists, otherwise the
/// dropout-free training loss.
template <typename Model>
TrainResult train_model(Model& model, const std::vector<IndexedConversation>& train,
                        const std::vector<IndexedConversation>& heldout, const TrainConfig& cfg,
                        std::ostream* progress = nullptr) {
  if (train.empty()) throw ValidationError("training set is empty");
  if (cfg.batch_size < 1) throw ValidationError("batch size must be at least 1");
  Rng rng(cfg.seed);
  Adam adam(model.params, cfg.adam);
  model.params.zero_grad();
  RunContext ctx{true, cfg.dropout, &rng};

  auto selection_loss = [&]() { return heldout.empty() ? mean_loss(model, train) : mean_loss(model, heldout); };

  TrainResult result;
  {
    EpochStats s;
    s.epoch = 0;
    s.train_nll = mean_loss(model, train);
    s.heldout_nll = mean_loss(model, heldout);
    result.curve.push_back(s);
    result.best_selection_loss = heldout.empty() ? s.train_nll : s.heldout_nll;
  }
  auto best = model.params.snapshot();
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    Real epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t k = start; k < end; ++k) {
        Tape tape;
        Tensor l = model.loss(tape, train[order[k]], ctx);
        epoch_loss += l.item();
        tape.backward(l);
      }
      adam.step();
    }
    EpochStats s;
    s.epoch = epoch;
    s.train_nll = epoch_loss / static_cast<Real>(train.size());
    s.heldout_nll = mean_loss(model, heldout);
    result.curve.push_back(s);
    const Real sel = selection_loss();
    if (progress != nullptr) {
      *progress << "epoch " << epoch << " train_nll " << s.train_nll << " heldout_nll " << s.heldout_nll << '\n';
    }
    if (sel < result.best_selection_loss) {
      result.best_selection_loss = sel;
      result.best_epoch = epoch;
      best = model.params.snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  model.params.restore(best);
  return result;
}

/// Trains `cfg.restarts` models built by `make(restart_index)` and returns
/// the one with the lowest selection loss.
template <typename Model, typename Factory>
Model train_with_restarts(Factory make, const std::vector<IndexedConversation>& train,
                          const std::vector<IndexedConversation>& heldout, const TrainConfig& cfg,
                          TrainResult* out_result = nullptr, std::ostream* progress = nullptr) {
  const std::size_t runs = std::max<std::size_t>(cfg.restarts, 1);
  Model best_model = make(0);
  TrainResult best = train_model(best_model, train, heldout, cfg, progress);
  for (std::size_t r = 1; r < runs; ++r) {
    Model m = make(r);
    TrainConfig c = cfg;
    c.seed = cfg.seed + r;
    TrainResult res = train_model(m, train, heldout, c, progress);
    res.restart = r;
    if (res.best_selection_loss < best.best_selection_loss) {
      best = std::move(res);
      best_model = std::move(m);
    }
  }
  if (out_result != nullptr) *out_result = std::move(best);
  return best_model;
}

inline void write_loss_curve(std::ostream& out, const std::vector<EpochStats>& curve) {
  out << "epoch,train_nll,heldout_nll\n";
  out.precision(17);
  for (const auto& s : curve) {
    out << s.epoch << ',' << s.train_nll << ',';
    if (!std::isnan(s.heldout_nll)) out << s.heldout_nll;
    out << '\n';
  }
}

}  // namespace lccrl
