// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0
//
// The self-supervised conversation model: utterance and context encoders,
// speaker and word decoders, the conversation loss and pre-training.

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "test_util.hpp"

using namespace lccrl;
using namespace lccrl::testing;
using Catch::Approx;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.word_dim = 6;
  d.speaker_dim = 3;
  d.hidden = 5;
  d.context_hidden = 4;
  d.decoder_hidden = 5;
  return d;
}

Vocabulary vocab_of(std::size_t words, std::vector<std::string> speakers) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < words; ++i) w.push_back("w" + std::to_string(i));
  return Vocabulary(w, std::move(speakers), 1);
}

IndexedConversation random_conversation(const Vocabulary& v, std::size_t T, std::size_t max_words, Rng& rng) {
  IndexedConversation c;
  c.id = "r";
  for (std::size_t t = 0; t < T; ++t) {
    IndexedUtterance u;
    u.speaker = std::uniform_int_distribution<std::size_t>(0, v.num_speakers() - 1)(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_words)(rng);
    for (std::size_t k = 0; k < n; ++k) u.words.push_back(std::uniform_int_distribution<std::size_t>(3, v.num_words() - 1)(rng));
    c.utterances.push_back(u);
  }
  return c;
}

bool same_values(const Tensor& a, const Tensor& b) { return to_vec(a) == to_vec(b); }

// Sum of log-probabilities of `words` + <eos> under the decoder.
Real utterance_log_prob(const LcCrlModel& m, std::size_t speaker, const Tensor& past, const Tensor& future,
                        std::vector<std::size_t> words) {
  words.push_back(Vocabulary::kEos);
  Tape tape;
  auto logs = m.word_log_probs(tape, speaker, past, future, words, RunContext{});
  Real s = 0;
  for (std::size_t n = 0; n < logs.size(); ++n) {
    if (logs[n].defined()) s += logs[n][words[n]];
  }
  return s;
}

// Every sequence over the non-<eos> outputs of the word head, up to `max_len`.
template <typename F>
void for_each_utterance(std::size_t num_words, std::size_t max_len, F&& f) {
  std::vector<std::size_t> alphabet;
  for (std::size_t w = 0; w < num_words; ++w)
    if (w != Vocabulary::kEos) alphabet.push_back(w);
  std::vector<std::size_t> seq;
  std::function<void()> rec = [&]() {
    f(seq);
    if (seq.size() == max_len) return;
    for (auto w : alphabet) {
      seq.push_back(w);
      rec();
      seq.pop_back();
    }
  };
  rec();
}

Corpus alternating(Corpus corpus) {
  for (auto& c : corpus)
    for (std::size_t t = 0; t < c.utterances.size(); ++t) c.utterances[t].speaker = t % 2 ? "Customer" : "Operator";
  return corpus;
}

}  // namespace

TEST_CASE("utterance encoder with zero parameters outputs zeros", "[encoder]") {
  Vocabulary v = vocab_of(5, {"A", "B"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 1);
  zero_all(m.params);
  Tape tape;
  Tensor s = m.encoder.encode_utterance(tape, {1, {3, 4, 5}}, RunContext{});
  CHECK(s.size() == 2 * small_dims().hidden);
  for (Real x : s.values()) CHECK(x == 0.0);
}

TEST_CASE("single-word utterance pools to its BLSTM output", "[encoder]") {
  Vocabulary v = vocab_of(5, {"A", "B"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 2);
  Tape tape;
  Tensor s = m.encoder.encode_utterance(tape, {1, {6}}, RunContext{});
  Tensor x = concat(tape, {embed(tape, m.encoder.speakers, 1), embed(tape, m.encoder.words, 6)});
  Tensor h = m.encoder.utterance.run(tape, {x}, RunContext{})[0];
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == Approx(h[i]).margin(1e-15));
}

TEST_CASE("changing the speaker changes the utterance vector", "[encoder]") {
  Vocabulary v = vocab_of(5, {"A", "B"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 3);
  Tape tape;
  CHECK_FALSE(same_values(m.encoder.encode_utterance(tape, {0, {3, 5}}, RunContext{}),
                          m.encoder.encode_utterance(tape, {1, {3, 5}}, RunContext{})));
  CHECK_THROWS_AS(m.encoder.encode_utterance(tape, {0, {}}, RunContext{}), DomainError);
}

TEST_CASE("contexts of a one-utterance conversation", "[contexts]") {
  Vocabulary v = vocab_of(5, {"A", "B"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 4);
  IndexedConversation c{"one", {{0, {3, 4}}}, {}};
  Tape tape;
  auto enc = m.encoder.encode(tape, c, RunContext{});
  REQUIRE(enc.past.size() == 2);
  REQUIRE(enc.future.size() == 2);
  for (Real x : enc.past[0].values()) CHECK(x == 0.0);
  for (Real x : enc.future[1].values()) CHECK(x == 0.0);
  auto ps = m.encoder.past.zero_state();
  auto fs = m.encoder.future.zero_state();
  CHECK(same_values(enc.past[1], m.encoder.past.step(tape, enc.utterances[0], ps, RunContext{})));
  CHECK(same_values(enc.future[0], m.encoder.future.step(tape, enc.utterances[0], fs, RunContext{})));
  Tape empty;
  CHECK_THROWS_AS(m.encoder.encode(empty, IndexedConversation{}, RunContext{}), DomainError);
}

TEST_CASE("editing one utterance leaves earlier past and later future contexts intact", "[contexts]") {
  Vocabulary v = vocab_of(8, {"A", "B"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 5);
  Rng rng(5);
  auto c = random_conversation(v, 6, 4, rng);
  auto edited = c;
  edited.utterances[2].words = {3, 3, 3, 10};
  edited.utterances[2].speaker = 1 - c.utterances[2].speaker;
  Tape tape;
  auto a = m.encoder.encode(tape, c, RunContext{});
  auto b = m.encoder.encode(tape, edited, RunContext{});
  REQUIRE_FALSE(same_values(a.utterances[2], b.utterances[2]));
  for (std::size_t k = 0; k <= 2; ++k) CHECK(same_values(a.past[k], b.past[k]));
  for (std::size_t k = 3; k <= 6; ++k) CHECK(same_values(a.future[k], b.future[k]));
  CHECK_FALSE(same_values(a.past[3], b.past[3]));
  CHECK_FALSE(same_values(a.future[2], b.future[2]));
}

TEST_CASE("contexts with zero parameters are zero", "[contexts]") {
  Vocabulary v = vocab_of(8, {"A", "B"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 6);
  zero_all(m.params);
  Rng rng(6);
  Tape tape;
  auto enc = m.encoder.encode(tape, random_conversation(v, 4, 3, rng), RunContext{});
  for (const auto& t : enc.past)
    for (Real x : t.values()) CHECK(x == 0.0);
  for (const auto& t : enc.future)
    for (Real x : t.values()) CHECK(x == 0.0);
}

TEST_CASE("speaker decoder is a normalized distribution", "[decoder]") {
  Vocabulary v = vocab_of(4, {"A", "B", "C"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 7);
  Rng rng(7);
  Tape tape;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor p = m.decode_speaker(tape, Tensor::vector(random_values(4, rng)), Tensor::vector(random_values(4, rng)));
    CHECK(p.size() == 3);
    Real total = 0;
    for (Real x : p.values()) total += x;
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
  zero_all(m.params);
  Tensor u = m.decode_speaker(tape, Tensor::vector(random_values(4, rng)), Tensor::vector(random_values(4, rng)));
  for (Real x : u.values()) CHECK(x == Approx(1.0 / 3).margin(1e-15));
  CHECK_THROWS_AS(m.decode_speaker(tape, Tensor::zeros({3}), Tensor::zeros({4})), ShapeError);
}

TEST_CASE("word decoder outputs are normalized and uniform at zero", "[decoder]") {
  Vocabulary v = vocab_of(6, {"A", "B"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 8);
  Rng rng(8);
  Tape tape;
  const Tensor past = Tensor::vector(random_values(4, rng)), future = Tensor::vector(random_values(4, rng));
  for (const auto& p : m.decode_words(tape, 1, past, future, {4, 5, 3, Vocabulary::kEos})) {
    Real total = 0;
    for (Real x : p.values()) total += x;
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
  zero_all(m.params);
  for (const auto& p : m.decode_words(tape, 0, past, future, {4, Vocabulary::kEos})) {
    for (Real x : p.values()) CHECK(x == Approx(1.0 / v.num_words()).margin(1e-15));
  }
}

TEST_CASE("word decoder targets must end with eos", "[decoder]") {
  Vocabulary v = vocab_of(4, {"A"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 9);
  Tape tape;
  const Tensor z = Tensor::zeros({4});
  CHECK_THROWS_AS(m.decode_words(tape, 0, z, z, {3, 4}), ContractError);
  CHECK_THROWS_AS(m.decode_words(tape, 0, z, z, {}), ContractError);
}

TEST_CASE("word probabilities sum to one over every utterance up to the length limit", "[decoder]") {
  Vocabulary v = vocab_of(3, {"A", "B"});
  ModelDims d = small_dims();
  d.max_utterance_words = 2;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    LcCrlModel m = LcCrlModel::create(d, v, seed);
    redraw_uniform(m.params, 1.0, seed);
    Rng rng(seed);
    const Tensor past = Tensor::vector(random_values(4, rng)), future = Tensor::vector(random_values(4, rng));
    Real total = 0;
    std::size_t count = 0;
    for_each_utterance(v.num_words(), 2, [&](const std::vector<std::size_t>& words) {
      total += std::exp(utterance_log_prob(m, seed % 2, past, future, words));
      ++count;
    });
    CHECK(count == 1 + 5 + 25);
    CHECK(std::abs(total - 1.0) <= 1e-6);
  }
}

TEST_CASE("word decoder rejects utterances beyond the length limit", "[decoder]") {
  Vocabulary v = vocab_of(3, {"A"});
  ModelDims d = small_dims();
  d.max_utterance_words = 2;
  LcCrlModel m = LcCrlModel::create(d, v, 10);
  Tape tape;
  const Tensor z = Tensor::zeros({4});
  CHECK(m.word_log_probs(tape, 0, z, z, {3, 4, Vocabulary::kEos}, RunContext{}).back().defined() == false);
  CHECK_THROWS_AS(m.word_log_probs(tape, 0, z, z, {3, 4, 5, Vocabulary::kEos}, RunContext{}), ContractError);
}

TEST_CASE("conversation loss at zero parameters is ln 2 + 2 ln 10", "[loss]") {
  Vocabulary v = vocab_of(7, {"A", "B"});
  REQUIRE(v.num_words() == 10);
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 11);
  zero_all(m.params);
  IndexedConversation c{"z", {{1, {5}}}, {}};
  Tape tape;
  CHECK(m.conversation_nll(tape, c).item() == Approx(std::log(2.0) + 2 * std::log(10.0)).margin(1e-12));
}

TEST_CASE("conversation loss is the sum of independent utterance losses", "[loss]") {
  Vocabulary v = vocab_of(8, {"A", "B"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 12);
  Rng rng(12);
  auto c = random_conversation(v, 5, 4, rng);
  Tape tape;
  const Real total = m.conversation_nll(tape, c).item();
  auto enc = m.encoder.encode(tape, c, RunContext{});
  Real parts = 0;
  for (std::size_t t = 0; t < c.size(); ++t) {
    Tape own;
    parts += m.utterance_nll(own, enc, c, t, RunContext{}).item();
  }
  CHECK(std::abs(total - parts) <= 1e-9);
}

TEST_CASE("with silent context encoders each utterance term ignores the others", "[loss]") {
  Vocabulary v = vocab_of(8, {"A", "B"});
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 13);
  for (const auto& e : m.params.entries()) {
    if (e.name.rfind("past_context", 0) == 0 || e.name.rfind("future_context", 0) == 0) {
      Tensor t = e.tensor;
      std::fill(t.values().begin(), t.values().end(), 0.0);
    }
  }
  Rng rng(13);
  auto c = random_conversation(v, 4, 4, rng);
  auto edited = c;
  edited.utterances[0].words = {9, 9};
  edited.utterances[3].speaker = 1 - c.utterances[3].speaker;
  Tape tape;
  auto a = m.encoder.encode(tape, c, RunContext{});
  auto b = m.encoder.encode(tape, edited, RunContext{});
  for (std::size_t t = 1; t < 3; ++t) {
    CHECK(m.utterance_nll(tape, a, c, t, RunContext{}).item() == m.utterance_nll(tape, b, edited, t, RunContext{}).item());
  }
}

TEST_CASE("conversation loss passes the finite-difference check", "[loss][gradcheck]") {
  GradCheckOptions all;
  all.samples_per_param = 1u << 20;
  for (std::uint64_t seed = 1; seed <= 2; ++seed) CHECK(lccrl_gradient_check(seed, all).max_relative_error <= kGradTol);
}

TEST_CASE("conversation loss falls at every one of 50 Adam steps", "[training]") {
  const Corpus corpus = tiny_corpus();
  const Vocabulary v = Vocabulary::build(corpus, 1);
  const auto c = v.index(corpus[0]);
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 14);
  Adam adam(m.params);
  Real prev = std::numeric_limits<Real>::infinity();
  for (int step = 0; step < 50; ++step) {
    Tape tape;
    Tensor loss = m.conversation_nll(tape, c);
    CHECK(loss.item() < prev);
    prev = loss.item();
    tape.backward(loss);
    adam.step();
  }
}

TEST_CASE("pre-training one conversation lowers its loss", "[training]") {
  const Corpus corpus = tiny_corpus();
  const Vocabulary v = Vocabulary::build(corpus, 1);
  TrainConfig cfg;
  cfg.max_epochs = 20;
  cfg.heldout_fraction = 0;
  TrainResult r;
  LcCrlModel m = pretrain(small_dims(), v, {v.index(corpus[0])}, cfg, 0, &r);
  REQUIRE(r.curve.size() >= 2);
  CHECK(r.curve.back().train_nll < r.curve.front().train_nll);
  CHECK(std::isnan(r.curve.back().heldout_nll));
  CHECK(mean_loss(m, {v.index(corpus[0])}) < r.curve.front().train_nll);
}

TEST_CASE("pre-training is deterministic for a fixed seed", "[training]") {
  const Corpus corpus = generate_synthetic(default_synthetic_spec(), 6, 21);
  const Vocabulary v = Vocabulary::build(corpus);
  const auto data = v.index(corpus);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.seed = 4;
  TrainResult a, b;
  LcCrlModel ma = pretrain(small_dims(), v, data, cfg, 2, &a);
  LcCrlModel mb = pretrain(small_dims(), v, data, cfg, 2, &b);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].train_nll == b.curve[i].train_nll);
    CHECK((a.curve[i].heldout_nll == b.curve[i].heldout_nll ||
           (std::isnan(a.curve[i].heldout_nll) && std::isnan(b.curve[i].heldout_nll))));
  }
  CHECK(ma.params.snapshot() == mb.params.snapshot());
}

TEST_CASE("pre-training input errors", "[training]") {
  const Vocabulary v = vocab_of(3, {"A"});
  TrainConfig cfg;
  CHECK_THROWS_AS(pretrain(small_dims(), v, {}, cfg), ValidationError);
  cfg.batch_size = 0;
  IndexedConversation c{"c", {{0, {3}}}, {}};
  CHECK_THROWS_AS(pretrain(small_dims(), v, {c}, cfg), ValidationError);
}

TEST_CASE("pre-trained model beats a unigram on held-out perplexity", "[training][slow]") {
  const Corpus corpus = strip_labels(generate_synthetic(default_synthetic_spec(), 64, 31));
  const Vocabulary v = Vocabulary::build(corpus);
  const auto data = v.index(corpus);
  TrainConfig cfg;
  cfg.max_epochs = 6;
  auto split = split_heldout(data, cfg.heldout_fraction);
  REQUIRE(split.heldout.size() == 6);
  LcCrlModel m = pretrain(ModelDims{}, v, data, cfg, 0);

  // Add-one unigram over words and <eos>, fitted on the training part.
  std::vector<Real> counts(v.num_words(), 1.0);
  for (const auto& c : split.train)
    for (const auto& u : c.utterances) {
      for (auto w : u.words) counts[w] += 1;
      counts[Vocabulary::kEos] += 1;
    }
  const Real total = std::accumulate(counts.begin(), counts.end(), 0.0);

  Real model_nll = 0, unigram_nll = 0;
  std::size_t tokens = 0;
  for (const auto& c : split.heldout) {
    Tape tape;
    auto enc = m.encoder.encode(tape, c, RunContext{});
    for (std::size_t t = 0; t < c.size(); ++t) {
      const auto& u = c.utterances[t];
      model_nll -= utterance_log_prob(m, u.speaker, enc.past[t], enc.future[t + 1], u.words);
      for (auto w : LcCrlModel::decoder_targets(u)) unigram_nll -= std::log(counts[w] / total);
      tokens += u.words.size() + 1;
    }
  }
  const Real model_ppl = std::exp(model_nll / tokens), unigram_ppl = std::exp(unigram_nll / tokens);
  INFO("model " << model_ppl << " unigram " << unigram_ppl);
  CHECK(model_ppl < unigram_ppl);
}

TEST_CASE("speaker decoder learns strict alternation", "[training][slow]") {
  const Corpus train = alternating(strip_labels(generate_synthetic(default_synthetic_spec(), 16, 41)));
  const Corpus probe = alternating(strip_labels(generate_synthetic(default_synthetic_spec(), 4, 42)));
  Corpus all = train;
  all.insert(all.end(), probe.begin(), probe.end());
  const Vocabulary v = Vocabulary::build(all);
  TrainConfig cfg;
  cfg.max_epochs = 25;
  cfg.heldout_fraction = 0;
  cfg.dropout = 0;
  cfg.adam.learning_rate = 0.01;
  cfg.batch_size = 1;
  LcCrlModel m = pretrain(small_dims(), v, v.index(train), cfg, 0);
  Real mean = 0;
  std::size_t n = 0;
  for (const auto& c : v.index(probe)) {
    Tape tape;
    auto enc = m.encoder.encode(tape, c, RunContext{});
    for (std::size_t t = 0; t < c.size(); ++t) {
      mean += m.decode_speaker(tape, enc.past[t], enc.future[t + 1])[c.utterances[t].speaker];
      ++n;
    }
  }
  mean /= static_cast<Real>(n);
  INFO("mean probability of the alternating speaker " << mean);
  CHECK(mean > 0.9);
}

TEST_CASE("checkpoint round trip restores the model", "[checkpoint]") {
  const Corpus corpus = tiny_corpus();
  const Vocabulary v = Vocabulary::build(corpus, 1);
  LcCrlModel m = LcCrlModel::create(small_dims(), v, 15);
  LcCrlModel back = LcCrlModel::from_checkpoint(m.checkpoint());
  CHECK(back.dims == m.dims);
  CHECK(back.vocab.hash() == v.hash());
  const auto c = v.index(corpus[1]);
  Tape t1, t2;
  CHECK(std::abs(back.conversation_nll(t1, c).item() - m.conversation_nll(t2, c).item()) <= 1e-4);
}
