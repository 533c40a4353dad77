// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lccrl/checkpoint.hpp"
#include "lccrl/crf.hpp"
#include "lccrl/encoder.hpp"
#include "lccrl/lccrl_model.hpp"
#include "lccrl/trainer.hpp"

// Speaker-aware hierarchical BLSTM-CRF labeler. It reuses the encoders of the
// self-supervised model; the CRF sees y^t = [L^{t+1}; R^{t-1}], i.e. past and
// future contexts that both include utterance t.

namespace lccrl {

class Labeler {
 public:
  ModelDims dims;
  Vocabulary vocab;
  LabelSet labels;
  bool speaker_blind = false;
  ParamStore params;
  ConversationEncoder encoder;
  CrfParams crf;

  static Labeler create(const ModelDims& dims, const Vocabulary& vocab, const LabelSet& labels, std::uint64_t seed,
                        bool speaker_blind = false) {
    Labeler m;
    m.dims = dims;
    m.vocab = vocab;
    m.labels = labels;
    m.speaker_blind = speaker_blind;
    Rng rng(seed);
    m.encoder = ConversationEncoder::create(m.params, dims, vocab, rng);
    m.crf = CrfParams::create(m.params, "crf", 2 * m.encoder.context_dim(), labels.size(), rng);
    return m;
  }

  /// y^t = concat(L^{t+1}, R^{t-1}) for t = 1..T.
  std::vector<Tensor> context_features(Tape& tape, const EncodedConversation& enc) const {
    const std::size_t T = enc.utterances.size();
    std::vector<Tensor> feats;
    feats.reserve(T);
    for (std::size_t t = 0; t < T; ++t) feats.push_back(concat(tape, {enc.past[t + 1], enc.future[t]}));
    return feats;
  }

  std::vector<Tensor> build_context_features(Tape& tape, const IndexedConversation& c,
                                             const RunContext& ctx = {}) const {
    return context_features(tape, encoder.encode(tape, c, ctx, speaker_blind));
  }

  Tensor emissions(Tape& tape, const IndexedConversation& c, const RunContext& ctx = {}) const {
    return crf_emissions(tape, crf, build_context_features(tape, c, ctx));
  }

  /// -log P(O | U).
  Tensor loss(Tape& tape, const IndexedConversation& c, const RunContext& ctx) const {
    if (c.labels.size() != c.size()) {
      throw ValidationError("conversation '" + c.id + "' needs one label per utterance");
    }
    return crf_nll(tape, emissions(tape, c, ctx), crf.transitions, c.labels);
  }

  /// Viterbi labeling of a whole conversation.
  std::vector<std::size_t> label(const IndexedConversation& c) const {
    Tape tape;
    return viterbi_decode(emissions(tape, c), crf.transitions).labels;
  }

  std::vector<std::string> label_names(const IndexedConversation& c) const {
    std::vector<std::string> out;
    for (auto l : label(c)) out.push_back(labels.name(l));
    return out;
  }

  /// Copies the shared encoder groups from a pre-training checkpoint. The
  /// CRF head is never transferred.
  ///
  /// A vocabulary mismatch is an error unless allowed; then embedding rows
  /// are copied by word and speaker name, and rows without a counterpart
  /// keep their fresh values.
  TransferReport load_pretrained(const Checkpoint& ck, bool allow_vocab_mismatch = false) {
    const std::string hash = ck.metadata.value("vocab_hash", std::string());
    if (hash == std::to_string(vocab.hash())) return ck.apply_to(params, &shared_groups());
    if (!allow_vocab_mismatch) {
      throw TransferError("checkpoint vocabulary hash " + hash + " does not match the labeler vocabulary " +
                          std::to_string(vocab.hash()) + " (use --allow-vocab-mismatch to override)");
    }
    if (!ck.metadata.contains("vocab")) throw TransferError("checkpoint carries no vocabulary to remap embeddings");
    const Vocabulary source = Vocabulary::from_json(ck.metadata.at("vocab"));
    auto groups = shared_groups();
    groups.erase(encoder.words.name);
    groups.erase(encoder.speakers.name);
    TransferReport report = ck.apply_to(params, &groups);
    std::erase(report.missing, encoder.words.name);
    std::erase(report.missing, encoder.speakers.name);
    std::erase(report.ignored, encoder.words.name);
    std::erase(report.ignored, encoder.speakers.name);
    auto remap = [&](const EmbeddingTable& table, const std::vector<std::string>& from,
                     const std::function<std::optional<std::size_t>(const std::string&)>& to) {
      const CheckpointEntry* e = ck.find(table.name);
      if (e == nullptr) {
        report.missing.push_back(table.name);
        return;
      }
      if (e->shape.size() != 2 || e->shape[0] < from.size() || e->shape[1] != table.dim()) {
        throw TransferError("cannot transfer '" + table.name + "': checkpoint shape " + shape_string(e->shape) +
                            " does not fit its vocabulary and the model dimension");
      }
      Tensor m = table.matrix;
      auto v = m.values();
      const std::size_t d = table.dim();
      for (std::size_t i = 0; i < from.size(); ++i) {
        auto j = to(from[i]);
        if (!j) continue;
        for (std::size_t k = 0; k < d; ++k) v[*j * d + k] = static_cast<Real>(e->values[i * d + k]);
      }
      report.loaded.push_back(table.name);
    };
    remap(encoder.words, source.words(), [&](const std::string& w) -> std::optional<std::size_t> {
      if (!vocab.contains_word(w)) return std::nullopt;
      return vocab.word_index(w);
    });
    remap(encoder.speakers, source.speakers(), [&](const std::string& s) -> std::optional<std::size_t> {
      const auto& sp = vocab.speakers();
      auto it = std::find(sp.begin(), sp.end(), s);
      if (it == sp.end()) return std::nullopt;
      return static_cast<std::size_t>(it - sp.begin());
    });
    return report;
  }

  void set_shared_frozen(bool frozen) {
    for (const auto& name : shared_parameter_names(params)) params.set_frozen(name, frozen);
  }

  std::uint64_t shared_hash() const { return hash_parameters(params, shared_parameter_names(params)); }

  nlohmann::json metadata() const {
    return {{"model", "labeler"},
            {"dims", dims.to_json()},
            {"vocab", vocab.to_json()},
            {"vocab_hash", std::to_string(vocab.hash())},
            {"labels", labels.names()},
            {"speaker_blind", speaker_blind}};
  }

  Checkpoint checkpoint() const { return Checkpoint::from_params(params, metadata()); }

  static Labeler from_checkpoint(const Checkpoint& ck) {
    if (ck.metadata.value("model", std::string()) != "labeler") {
      throw ValidationError("checkpoint does not hold a labeler");
    }
    auto vocab = Vocabulary::from_json(ck.metadata.at("vocab"));
    if (ck.metadata.value("vocab_hash", std::string()) != std::to_string(vocab.hash())) {
      throw ValidationError("checkpoint vocabulary does not match its recorded hash");
    }
    auto m = create(ModelDims::from_json(ck.metadata.at("dims")), vocab,
                    LabelSet(ck.metadata.at("labels").get<std::vector<std::string>>()), 0,
                    ck.metadata.value("speaker_blind", false));
    auto report = ck.apply_to(m.params);
    if (!report.missing.empty()) throw TransferError("checkpoint lacks parameter '" + report.missing.front() + "'");
    return m;
  }
};

struct FinetuneOptions {
  TrainConfig train;
  bool speaker_blind = false;
  bool freeze_shared = false;
  bool allow_vocab_mismatch = false;
  std::uint64_t init_seed = 0;  // initial parameters (CRF head always fresh)
  std::function<void(Labeler&)> customize;  // runs on each fresh model before any transfer
};

struct FinetuneResult {
  TrainResult training;
  std::optional<TransferReport> transfer;
  std::optional<std::uint64_t> initial_shared_hash;  // after transfer, before the first step
};

/// Fits a labeler on labeled conversations, optionally starting the shared
/// encoders from a pre-training checkpoint. Held-out conversations for early
/// stopping come from the end of `data`.
inline Labeler finetune(const ModelDims& dims, const Vocabulary& vocab, const LabelSet& labels,
                        const std::vector<IndexedConversation>& data, const FinetuneOptions& opt,
                        const Checkpoint* init = nullptr, FinetuneResult* out = nullptr,
                        std::ostream* progress = nullptr) {
  for (const auto& c : data) {
    if (c.labels.size() != c.size()) throw ValidationError("conversation '" + c.id + "' is not fully labeled");
    for (auto l : c.labels) {
      if (l >= labels.size()) throw ValidationError("label index outside the label set");
    }
  }
  auto split = split_heldout(data, opt.train.heldout_fraction);
  FinetuneResult result;
  auto make = [&](std::size_t restart) {
    Labeler m = Labeler::create(dims, vocab, labels, opt.init_seed + restart, opt.speaker_blind);
    if (opt.customize) opt.customize(m);
    if (init != nullptr) {
      auto report = m.load_pretrained(*init, opt.allow_vocab_mismatch);
      if (restart == 0) {
        result.transfer = report;
        result.initial_shared_hash = m.shared_hash();
      }
    }
    if (opt.freeze_shared) m.set_shared_frozen(true);
    return m;
  };
  Labeler best = train_with_restarts<Labeler>(make, split.train, split.heldout, opt.train, &result.training, progress);
  if (out != nullptr) *out = std::move(result);
  return best;
}

}  // namespace lccrl
