// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "lccrl/labeler.hpp"
#include "lccrl/log.hpp"
#include "lccrl/metrics.hpp"

// Accuracy as a function of labeled-data size, with and without a
// pre-trained encoder.

namespace lccrl {

/// Test accuracy (percent) of a labeler.
inline Real test_accuracy(const Labeler& model, const std::vector<IndexedConversation>& test) {
  std::vector<std::vector<std::size_t>> pred, gold;
  for (const auto& c : test) {
    pred.push_back(model.label(c));
    gold.push_back(c.labels);
  }
  return evaluate(pred, gold, model.labels).accuracy;
}

/// Deterministic subsample of floor(fraction * n) conversations, kept in
/// their original order. fraction 1 returns the input unchanged.
inline std::vector<IndexedConversation> subsample(const std::vector<IndexedConversation>& data, Real fraction,
                                                  std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) throw ValidationError("sweep fractions must lie in (0, 1]");
  const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<Real>(data.size()) + 1e-9));
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n < data.size()) {
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<IndexedConversation> out;
  for (auto i : idx) out.push_back(data[i]);
  return out;
}

struct SweepRow {
  Real fraction = 0;
  std::size_t num_conversations = 0;
  std::uint64_t seed = 0;
  Real random_init_accuracy = 0;
  Real pretrained_accuracy = 0;
};

struct SweepSummary {
  Real fraction = 0;
  std::size_t num_conversations = 0;
  Real mean_random_init = 0;
  Real mean_pretrained = 0;
  Real gap() const { return mean_pretrained - mean_random_init; }
};

struct SweepConfig {
  std::vector<Real> fractions{0.25, 0.5, 1.0};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  FinetuneOptions finetune;
};

/// For every fraction and seed: subsample, fine-tune from random and from
/// pre-trained initial parameters, and score both on `test`.
inline std::vector<SweepRow> data_size_sweep(const ModelDims& dims, const Vocabulary& vocab, const LabelSet& labels,
                                             const std::vector<IndexedConversation>& labeled,
                                             const std::vector<IndexedConversation>& test,
                                             const Checkpoint& pretrained, const SweepConfig& cfg,
                                             std::ostream* progress = nullptr) {
  std::vector<SweepRow> rows;
  for (Real fraction : cfg.fractions) {
    for (auto seed : cfg.seeds) {
      auto subset = subsample(labeled, fraction, seed);
      if (subset.empty()) {
        log::warn("fraction " + std::to_string(fraction) + " selects no conversations; skipped");
        break;
      }
      FinetuneOptions opt = cfg.finetune;
      opt.init_seed = seed;
      opt.train.seed = seed;
      SweepRow row;
      row.fraction = fraction;
      row.num_conversations = subset.size();
      row.seed = seed;
      row.random_init_accuracy = test_accuracy(finetune(dims, vocab, labels, subset, opt), test);
      row.pretrained_accuracy = test_accuracy(finetune(dims, vocab, labels, subset, opt, &pretrained), test);
      if (progress != nullptr) {
        *progress << "fraction " << fraction << " seed " << seed << " random " << row.random_init_accuracy
                  << " pretrained " << row.pretrained_accuracy << '\n';
      }
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows) {
  std::vector<SweepSummary> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SweepSummary& s) { return s.fraction == r.fraction; });
    if (it == out.end()) {
      out.push_back({r.fraction, r.num_conversations, 0, 0});
      it = out.end() - 1;
    }
    it->mean_random_init += r.random_init_accuracy;
    it->mean_pretrained += r.pretrained_accuracy;
  }
  for (auto& s : out) {
    const auto n = static_cast<Real>(
        std::count_if(rows.begin(), rows.end(), [&](const SweepRow& r) { return r.fraction == s.fraction; }));
    s.mean_random_init /= n;
    s.mean_pretrained /= n;
  }
  return out;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "fraction,num_conversations,seed,random_init_accuracy,pretrained_accuracy\n";
  for (const auto& r : rows) {
    out << r.fraction << ',' << r.num_conversations << ',' << r.seed << ',' << r.random_init_accuracy << ','
        << r.pretrained_accuracy << '\n';
  }
}

}  // namespace lccrl
