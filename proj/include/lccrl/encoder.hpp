// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lccrl/layers.hpp"
#include "lccrl/vocab.hpp"

// Utterance encoder plus past/future context encoders, shared verbatim by
// the self-supervised model and the labeler.

namespace lccrl {

struct ModelDims {
  std::size_t word_dim = 32;
  std::size_t speaker_dim = 8;
  std::size_t hidden = 32;           // per-direction units of the utterance BLSTM
  std::size_t encoder_layers = 2;
  std::size_t context_hidden = 32;   // past/future LSTM units
  std::size_t context_layers = 2;
  std::size_t decoder_hidden = 32;
  std::size_t attention_dim = 0;     // 0: same as hidden
  std::size_t max_utterance_words = 0;  // decoder forces EOS after this many words; 0: unlimited

  std::size_t attention() const { return attention_dim == 0 ? hidden : attention_dim; }

  /// 512-d words, 32-d speakers, two-layer 512-unit recurrences.
  static ModelDims large() {
    ModelDims d;
    d.word_dim = 512;
    d.speaker_dim = 32;
    d.hidden = 512;
    d.context_hidden = 512;
    d.decoder_hidden = 512;
    return d;
  }

  nlohmann::json to_json() const {
    return {{"word_dim", word_dim},           {"speaker_dim", speaker_dim},
            {"hidden", hidden},               {"encoder_layers", encoder_layers},
            {"context_hidden", context_hidden}, {"context_layers", context_layers},
            {"decoder_hidden", decoder_hidden}, {"attention_dim", attention_dim},
            {"max_utterance_words", max_utterance_words}};
  }

  static ModelDims from_json(const nlohmann::json& j) {
    ModelDims d;
    d.word_dim = j.at("word_dim");
    d.speaker_dim = j.at("speaker_dim");
    d.hidden = j.at("hidden");
    d.encoder_layers = j.at("encoder_layers");
    d.context_hidden = j.at("context_hidden");
    d.context_layers = j.at("context_layers");
    d.decoder_hidden = j.at("decoder_hidden");
    d.attention_dim = j.value("attention_dim", std::size_t{0});
    d.max_utterance_words = j.value("max_utterance_words", std::size_t{0});
    return d;
  }

  bool operator==(const ModelDims&) const = default;
};

/// Parameter groups shared between the pre-training model and the labeler.
inline const std::set<std::string>& shared_groups() {
  static const std::set<std::string> groups{"utterance_attention", "utterance_encoder", "word_embedding",
                                            "speaker_embedding",   "past_context",      "future_context"};
  return groups;
}

inline std::vector<std::string> shared_parameter_names(const ParamStore& params) {
  std::vector<std::string> out;
  for (const auto& e : params.entries()) {
    if (shared_groups().count(e.name.substr(0, e.name.find('.')))) out.push_back(e.name);
  }
  return out;
}

/// S, L and R for one conversation.
///
/// past[k] is the past context before utterance k (k = 0..T): past[0] is the
/// zero state and past[T] has read every utterance. future[k] is the future
/// context after utterance k-1 read backward: future[k] has read utterances
/// k..T-1, so future[T] is the zero state and future[0] has read everything.
/// In one-based notation, past[t-1] = L^t and future[t] = R^t.
struct EncodedConversation {
  std::vector<Tensor> utterances;  // S, [2h] each
  std::vector<Tensor> past;        // T + 1 entries
  std::vector<Tensor> future;      // T + 1 entries
};

struct ConversationEncoder {
  EmbeddingTable words;
  EmbeddingTable speakers;
  BlstmStack utterance;
  AttentionParams attention;
  LstmStack past;
  LstmStack future;

  static ConversationEncoder create(ParamStore& store, const ModelDims& d, const Vocabulary& vocab, Rng& rng) {
    ConversationEncoder e;
    e.words = EmbeddingTable::create(store, "word_embedding", vocab.num_words(), d.word_dim, rng);
    e.speakers = EmbeddingTable::create(store, "speaker_embedding", std::max<std::size_t>(vocab.num_speakers(), 1),
                                        d.speaker_dim, rng);
    e.utterance = BlstmStack::create(store, "utterance_encoder", d.word_dim + d.speaker_dim, d.hidden,
                                     d.encoder_layers, rng);
    e.attention = AttentionParams::create(store, "utterance_attention", 2 * d.hidden, d.attention(), rng);
    e.past = LstmStack::create(store, "past_context", 2 * d.hidden, d.context_hidden, d.context_layers, rng);
    e.future = LstmStack::create(store, "future_context", 2 * d.hidden, d.context_hidden, d.context_layers, rng);
    return e;
  }

  std::size_t context_dim() const { return past.output_dim(); }

  /// Speaker vector; the speaker-blind ablation substitutes a zero vector.
  Tensor speaker_vector(Tape& tape, std::size_t speaker, bool speaker_blind) const {
    if (speaker_blind) return Tensor::zeros({speakers.dim()});
    return embed(tape, speakers, speaker);
  }

  /// S^t = SelfAttention(BLSTM([q; w_1], ..., [q; w_N])).
  Tensor encode_utterance(Tape& tape, const IndexedUtterance& u, const RunContext& ctx,
                          bool speaker_blind = false) const {
    if (u.words.empty()) throw DomainError("cannot encode an utterance with no words");
    Tensor q = speaker_vector(tape, u.speaker, speaker_blind);
    std::vector<Tensor> inputs;
    inputs.reserve(u.words.size());
    for (auto w : u.words) inputs.push_back(concat(tape, {q, embed(tape, words, w)}));
    return self_attention_pool(tape, attention, utterance.run(tape, std::move(inputs), ctx));
  }

  /// Runs the forward (past) and backward (future) utterance-level LSTMs.
  void encode_contexts(Tape& tape, EncodedConversation& enc, const RunContext& ctx) const {
    const auto& S = enc.utterances;
    if (S.empty()) throw DomainError("cannot encode an empty conversation");
    const std::size_t T = S.size();
    enc.past.assign(T + 1, Tensor());
    enc.future.assign(T + 1, Tensor());
    enc.past[0] = Tensor::zeros({context_dim()});
    enc.future[T] = Tensor::zeros({context_dim()});
    auto ps = past.zero_state();
    for (std::size_t t = 0; t < T; ++t) enc.past[t + 1] = past.step(tape, S[t], ps, ctx);
    auto fs = future.zero_state();
    for (std::size_t t = T; t-- > 0;) enc.future[t] = future.step(tape, S[t], fs, ctx);
  }

  EncodedConversation encode(Tape& tape, const IndexedConversation& c, const RunContext& ctx,
                             bool speaker_blind = false) const {
    if (c.utterances.empty()) throw DomainError("cannot encode an empty conversation");
    EncodedConversation enc;
    for (const auto& u : c.utterances) enc.utterances.push_back(encode_utterance(tape, u, ctx, speaker_blind));
    encode_contexts(tape, enc, ctx);
    return enc;
  }
};

}  // namespace lccrl
