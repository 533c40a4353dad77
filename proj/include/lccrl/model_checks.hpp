// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>

#include "lccrl/gradcheck.hpp"
#include "lccrl/labeler.hpp"
#include "lccrl/lccrl_model.hpp"

// Whole-model gradient checks on tiny conversations, dropout off. Parameters
// are redrawn from U(-1, 1) so that gradients sit well above finite-difference
// round-off.

namespace lccrl {

inline ModelDims tiny_dims() {
  ModelDims d;
  d.word_dim = 4;
  d.speaker_dim = 3;
  d.hidden = 3;
  d.encoder_layers = 2;
  d.context_hidden = 3;
  d.context_layers = 2;
  d.decoder_hidden = 3;
  return d;
}

/// Two speakers, a handful of words each seen at least twice.
inline Corpus tiny_corpus() {
  auto conv = [](std::string id, std::vector<std::pair<std::string, std::string>> turns,
                 std::vector<std::string> labels) {
    Conversation c;
    c.id = std::move(id);
    for (auto& [speaker, text] : turns) c.utterances.push_back({speaker, tokenize(text)});
    c.labels = std::move(labels);
    return c;
  };
  return {conv("a", {{"Operator", "hello there"}, {"Customer", "card lost"}, {"Operator", "thank you bye"}},
               {"C1", "C2", "C3"}),
          conv("b", {{"Customer", "hello card"}, {"Operator", "lost there you"}, {"Customer", "thank bye"}},
               {"C1", "C2", "C3"})};
}

inline void redraw_uniform(ParamStore& params, Real scale, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<Real> u(-scale, scale);
  for (const auto& e : params.entries()) {
    Tensor t = e.tensor;
    for (Real& v : t.values()) v = u(rng);
  }
}

inline GradCheckResult lccrl_gradient_check(std::uint64_t seed, const GradCheckOptions& options = {}) {
  const Corpus corpus = tiny_corpus();
  const Vocabulary vocab = Vocabulary::build(corpus);
  auto conv = vocab.index(corpus[0]);
  conv.utterances.resize(2);  // T = 2, at most 3 words per utterance
  LcCrlModel model = LcCrlModel::create(tiny_dims(), vocab, seed);
  redraw_uniform(model.params, 1.0, seed);
  GradCheckOptions opt = options;
  opt.seed = seed;
  return finite_difference_check([&](Tape& tape) { return model.conversation_nll(tape, conv); }, model.params,
                                 opt);
}

inline GradCheckResult labeler_gradient_check(std::uint64_t seed, const GradCheckOptions& options = {}) {
  const Corpus corpus = tiny_corpus();
  const Vocabulary vocab = Vocabulary::build(corpus);
  const LabelSet labels({"C1", "C2", "C3"});
  const auto conv = vocab.index(corpus[1], &labels);  // T = 3, 3 labels
  Labeler model = Labeler::create(tiny_dims(), vocab, labels, seed);
  redraw_uniform(model.params, 1.0, seed);
  GradCheckOptions opt = options;
  opt.seed = seed;
  return finite_difference_check([&](Tape& tape) { return model.loss(tape, conv, RunContext{}); }, model.params,
                                 opt);
}

}  // namespace lccrl
