// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lccrl/corpus.hpp"
#include "lccrl/tensor.hpp"

namespace lccrl {

// All figures are percentages.
struct LabelMetrics {
  std::string label;
  Real precision = 0;
  Real recall = 0;
  Real f_measure = 0;  // 2PR / (P + R), 0 when P + R = 0
  std::size_t gold_count = 0;
  std::size_t predicted_count = 0;
  bool absent = false;  // in neither gold nor predictions; excluded from macro_f
};

struct MetricsReport {
  Real accuracy = 0;
  Real macro_f = 0;
  std::size_t total = 0;
  std::vector<LabelMetrics> per_label;  // label-set order
};

/// Utterance-level accuracy and per-label precision / recall / F-measure.
inline MetricsReport evaluate(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& gold,
                              const LabelSet& labels) {
  if (predicted.size() != gold.size()) {
    throw ValidationError("prediction length " + std::to_string(predicted.size()) + " != gold length " +
                          std::to_string(gold.size()));
  }
  const std::size_t L = labels.size();
  std::vector<std::size_t> tp(L, 0), n_pred(L, 0), n_gold(L, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] >= L || gold[i] >= L) throw ValidationError("label index outside the label set");
    ++n_pred[predicted[i]];
    ++n_gold[gold[i]];
    if (predicted[i] == gold[i]) {
      ++tp[gold[i]];
      ++correct;
    }
  }
  MetricsReport r;
  r.total = gold.size();
  r.accuracy = gold.empty() ? 0.0 : 100.0 * static_cast<Real>(correct) / static_cast<Real>(gold.size());
  Real f_sum = 0;
  std::size_t f_count = 0;
  for (std::size_t l = 0; l < L; ++l) {
    LabelMetrics m;
    m.label = labels.name(l);
    m.gold_count = n_gold[l];
    m.predicted_count = n_pred[l];
    m.absent = n_gold[l] == 0 && n_pred[l] == 0;
    const Real p = n_pred[l] ? static_cast<Real>(tp[l]) / static_cast<Real>(n_pred[l]) : 0.0;
    const Real rc = n_gold[l] ? static_cast<Real>(tp[l]) / static_cast<Real>(n_gold[l]) : 0.0;
    m.precision = 100.0 * p;
    m.recall = 100.0 * rc;
    m.f_measure = p + rc > 0 ? 100.0 * 2 * p * rc / (p + rc) : 0.0;
    if (!m.absent) {
      f_sum += m.f_measure;
      ++f_count;
    }
    r.per_label.push_back(m);
  }
  r.macro_f = f_count ? f_sum / static_cast<Real>(f_count) : 0.0;
  return r;
}

/// Pools every utterance of every conversation.
inline MetricsReport evaluate(const std::vector<std::vector<std::size_t>>& predicted,
                              const std::vector<std::vector<std::size_t>>& gold, const LabelSet& labels) {
  if (predicted.size() != gold.size()) throw ValidationError("prediction and gold conversation counts differ");
  std::vector<std::size_t> p, g;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i].size() != gold[i].size()) {
      throw ValidationError("conversation " + std::to_string(i) + ": prediction length differs from gold");
    }
    p.insert(p.end(), predicted[i].begin(), predicted[i].end());
    g.insert(g.end(), gold[i].begin(), gold[i].end());
  }
  return evaluate(p, g, labels);
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["macro_f"] = r.macro_f;
  j["utterances"] = r.total;
  j["labels"] = nlohmann::json::array();
  for (const auto& m : r.per_label) {
    j["labels"].push_back({{"label", m.label},
                           {"precision", m.precision},
                           {"recall", m.recall},
                           {"f_measure", m.f_measure},
                           {"gold_count", m.gold_count},
                           {"predicted_count", m.predicted_count},
                           {"absent", m.absent}});
  }
  return j;
}

/// One row for the whole set (accuracy, macro F) followed by one row per label.
inline void write_metrics_csv(std::ostream& out, const MetricsReport& r) {
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "label,accuracy,precision,recall,f_measure,gold_count,predicted_count,absent\n";
  out << "all," << r.accuracy << ",,," << r.macro_f << ',' << r.total << ',' << r.total << ",0\n";
  for (const auto& m : r.per_label) {
    out << m.label << ",," << m.precision << ',' << m.recall << ',' << m.f_measure << ',' << m.gold_count << ','
        << m.predicted_count << ',' << (m.absent ? 1 : 0) << '\n';
  }
}

}  // namespace lccrl
