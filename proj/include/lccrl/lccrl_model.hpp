// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "lccrl/checkpoint.hpp"
#include "lccrl/encoder.hpp"
#include "lccrl/trainer.hpp"

// Large-context self-supervised model: every utterance (its speaker, then its
// words) is predicted from the past-context vector L^t and the future-context
// vector R^t of the surrounding conversation.

namespace lccrl {

class LcCrlModel {
 public:
  ModelDims dims;
  Vocabulary vocab;
  ParamStore params;
  ConversationEncoder encoder;
  Linear speaker_head;  // softmax over speakers from [L^t; R^t]
  LstmParams decoder;   // input [w_{n-1}; q^t; L^t; R^t]
  Linear word_head;     // softmax over the word vocabulary

  static LcCrlModel create(const ModelDims& dims, const Vocabulary& vocab, std::uint64_t seed) {
    LcCrlModel m;
    m.dims = dims;
    m.vocab = vocab;
    Rng rng(seed);
    m.encoder = ConversationEncoder::create(m.params, dims, vocab, rng);
    const std::size_t ctx = 2 * m.encoder.context_dim();
    m.speaker_head = Linear::create(m.params, "speaker_head", ctx, std::max<std::size_t>(vocab.num_speakers(), 1), rng);
    m.decoder = LstmParams::create(m.params, "word_decoder.layer0", dims.word_dim + dims.speaker_dim + ctx,
                                   dims.decoder_hidden, rng);
    m.word_head = Linear::create(m.params, "word_head", dims.decoder_hidden, vocab.num_words(), rng);
    return m;
  }

  /// P(q^t | context) as log-probabilities, from past = L^t and future = R^t.
  Tensor speaker_log_probs(Tape& tape, const Tensor& past, const Tensor& future) const {
    return linear_log_softmax(tape, speaker_head, concat(tape, {past, future}));
  }

  Tensor decode_speaker(Tape& tape, const Tensor& past, const Tensor& future) const {
    return linear_softmax(tape, speaker_head, concat(tape, {past, future}));
  }

  /// Teacher-forced word log-probabilities. `targets` must end with <eos>;
  /// step n is fed the embedding of targets[n-1] (<bos> at n = 0).
  ///
  /// With a word limit, the step after `max_utterance_words` words can only
  /// emit <eos>; that step is returned as an undefined tensor (log-prob 0).
  std::vector<Tensor> word_log_probs(Tape& tape, std::size_t speaker, const Tensor& past, const Tensor& future,
                                     const std::vector<std::size_t>& targets, const RunContext& ctx) const {
    if (targets.empty() || targets.back() != Vocabulary::kEos) {
      throw ContractError("decoder targets must end with <eos>");
    }
    const std::size_t limit = dims.max_utterance_words;
    if (limit > 0 && targets.size() > limit + 1) {
      throw ContractError("utterance of " + std::to_string(targets.size() - 1) + " words exceeds the decoder limit of " +
                          std::to_string(limit));
    }
    Tensor q = embed(tape, encoder.speakers, speaker);
    Tensor context = concat(tape, {q, past, future});
    LstmState state = LstmState::zeros(decoder.hidden_dim());
    std::vector<Tensor> out;
    out.reserve(targets.size());
    std::size_t prev = Vocabulary::kBos;
    for (std::size_t n = 0; n < targets.size(); ++n) {
      if (limit > 0 && n == limit) {
        out.emplace_back();
        break;
      }
      Tensor x = dropout(tape, concat(tape, {embed(tape, encoder.words, prev), context}), ctx);
      state = lstm_step(tape, decoder, x, state);
      out.push_back(linear_log_softmax(tape, word_head, state.h));
      prev = targets[n];
    }
    return out;
  }

  /// Per-step probability vectors for the same teacher-forced pass.
  std::vector<Tensor> decode_words(Tape& tape, std::size_t speaker, const Tensor& past, const Tensor& future,
                                   const std::vector<std::size_t>& targets, const RunContext& ctx = {}) const {
    auto logs = word_log_probs(tape, speaker, past, future, targets, ctx);
    std::vector<Tensor> out;
    for (const auto& lp : logs) {
      if (!lp.defined()) {
        std::vector<Real> onehot(vocab.num_words(), 0.0);
        onehot[Vocabulary::kEos] = 1.0;
        out.push_back(Tensor::vector(std::move(onehot)));
        continue;
      }
      std::vector<Real> p;
      for (Real v : lp.values()) p.push_back(std::exp(v));
      out.push_back(Tensor::vector(std::move(p)));
    }
    return out;
  }

  static std::vector<std::size_t> decoder_targets(const IndexedUtterance& u) {
    std::vector<std::size_t> t = u.words;
    t.push_back(Vocabulary::kEos);
    return t;
  }

  /// -log P(U^t | U^{1:t-1}, U^{t+1:T}) for utterance t given encoded contexts.
  Tensor utterance_nll(Tape& tape, const EncodedConversation& enc, const IndexedConversation& c, std::size_t t,
                       const RunContext& ctx) const {
    const auto& u = c.utterances.at(t);
    const Tensor& past = enc.past[t];
    const Tensor& future = enc.future[t + 1];
    std::vector<Tensor> terms;
    terms.push_back(pick(tape, speaker_log_probs(tape, past, future), u.speaker));
    auto targets = decoder_targets(u);
    auto logs = word_log_probs(tape, u.speaker, past, future, targets, ctx);
    for (std::size_t n = 0; n < logs.size(); ++n) {
      if (logs[n].defined()) terms.push_back(pick(tape, logs[n], targets[n]));
    }
    return scale(tape, add_n(tape, terms), -1.0);
  }

  /// Sum over utterances of the negative log-likelihood, <eos> terms included.
  Tensor conversation_nll(Tape& tape, const IndexedConversation& c, const RunContext& ctx = {}) const {
    EncodedConversation enc = encoder.encode(tape, c, ctx);
    std::vector<Tensor> terms;
    for (std::size_t t = 0; t < c.size(); ++t) terms.push_back(utterance_nll(tape, enc, c, t, ctx));
    return add_n(tape, terms);
  }

  Tensor loss(Tape& tape, const IndexedConversation& c, const RunContext& ctx) const {
    return conversation_nll(tape, c, ctx);
  }

  /// Number of predicted word tokens (words plus <eos>) in a conversation.
  static std::size_t num_word_targets(const IndexedConversation& c) {
    std::size_t n = 0;
    for (const auto& u : c.utterances) n += u.words.size() + 1;
    return n;
  }

  nlohmann::json metadata() const {
    return {{"model", "lccrl"},
            {"dims", dims.to_json()},
            {"vocab", vocab.to_json()},
            {"vocab_hash", std::to_string(vocab.hash())}};
  }

  Checkpoint checkpoint() const { return Checkpoint::from_params(params, metadata()); }

  static LcCrlModel from_checkpoint(const Checkpoint& ck) {
    if (ck.metadata.value("model", std::string()) != "lccrl") {
      throw ValidationError("checkpoint does not hold a pre-training model");
    }
    auto vocab = Vocabulary::from_json(ck.metadata.at("vocab"));
    if (ck.metadata.value("vocab_hash", std::string()) != std::to_string(vocab.hash())) {
      throw ValidationError("checkpoint vocabulary does not match its recorded hash");
    }
    auto m = create(ModelDims::from_json(ck.metadata.at("dims")), vocab, 0);
    auto report = ck.apply_to(m.params);
    if (!report.missing.empty()) throw TransferError("checkpoint lacks parameter '" + report.missing.front() + "'");
    return m;
  }
};

/// Self-supervised pre-training on unlabeled conversations.
inline LcCrlModel pretrain(const ModelDims& dims, const Vocabulary& vocab,
                           const std::vector<IndexedConversation>& corpus, const TrainConfig& cfg,
                           std::uint64_t init_seed = 0, TrainResult* out = nullptr,
                           std::ostream* progress = nullptr,
                           const std::function<void(LcCrlModel&)>& customize = {}) {
  if (corpus.empty()) throw ValidationError("pre-training corpus is empty");
  auto split = split_heldout(corpus, cfg.heldout_fraction);
  auto make = [&](std::size_t restart) {
    LcCrlModel m = LcCrlModel::create(dims, vocab, init_seed + restart);
    if (customize) customize(m);
    return m;
  };
  return train_with_restarts<LcCrlModel>(make, split.train, split.heldout, cfg, out, progress);
}

}  // namespace lccrl
