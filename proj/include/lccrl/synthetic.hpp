// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lccrl/corpus.hpp"
#include "lccrl/params.hpp"

// Synthetic contact-center style dialogues. A conversation walks the scenes
// left to right; each scene lasts a random number of turns, draws its words
// from a scene distribution mixed with shared filler words, and has its own
// speaker-turn habit (who opens the scene, how often the floor changes).

namespace lccrl {

struct WeightedWord {
  std::string word;
  Real probability = 0;
};

struct SceneSpec {
  std::string label;
  std::vector<WeightedWord> words;
  std::size_t min_turns = 1;
  std::size_t max_turns = 1;
  std::size_t first_speaker = 0;  // index into SyntheticSpec::speakers
  Real switch_probability = 1.0;  // chance the next utterance changes speaker
};

struct SyntheticSpec {
  std::vector<std::string> speakers{"Operator", "Customer"};
  std::vector<WeightedWord> common_words;
  Real common_rate = 0.5;  // chance a token is drawn from common_words
  std::size_t min_words = 3;
  std::size_t max_words = 8;
  std::vector<SceneSpec> scenes;

  std::vector<std::string> label_names() const {
    std::vector<std::string> out;
    for (const auto& s : scenes) out.push_back(s.label);
    return out;
  }
};

namespace detail {

inline void check_distribution(const std::vector<WeightedWord>& dist, const std::string& what) {
  if (dist.empty()) throw ValidationError(what + " has no words");
  Real total = 0;
  for (const auto& w : dist) {
    if (!(w.probability >= 0)) throw ValidationError(what + " has a negative probability");
    if (w.word.empty()) throw ValidationError(what + " has an empty word");
    total += w.probability;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ValidationError(what + " probabilities sum to " + std::to_string(total) + ", not 1");
  }
}

inline std::size_t sample_index(const std::vector<WeightedWord>& dist, Rng& rng) {
  Real u = std::uniform_real_distribution<Real>(0.0, 1.0)(rng);
  for (std::size_t i = 0; i < dist.size(); ++i) {
    u -= dist[i].probability;
    if (u < 0) return i;
  }
  return dist.size() - 1;
}

inline std::size_t uniform_int(std::size_t lo, std::size_t hi, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Zipf-like weights over `names`, normalized to `mass`.
inline void append_zipf(std::vector<WeightedWord>& out, const std::vector<std::string>& names, Real mass) {
  Real z = 0;
  for (std::size_t r = 0; r < names.size(); ++r) z += 1.0 / static_cast<Real>(r + 1);
  for (std::size_t r = 0; r < names.size(); ++r) {
    out.push_back({names[r], mass / (static_cast<Real>(r + 1) * z)});
  }
}

inline std::vector<std::string> word_pool(const std::string& stem, std::size_t n, std::size_t first = 0) {
  std::vector<std::string> out;
  for (std::size_t i = first; i < first + n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

inline std::vector<WeightedWord> default_common_words() {
  std::vector<std::string> names{"the", "i", "you", "a", "to", "and", "is", "it", "that", "my",
                                 "your", "for", "of", "uh", "{um}", "okay", "so", "we", "this", "yes"};
  std::vector<WeightedWord> out;
  append_zipf(out, names, 1.0);
  return out;
}

}  // namespace detail

inline void validate(const SyntheticSpec& spec) {
  if (spec.speakers.empty()) throw ValidationError("synthetic spec needs at least one speaker");
  if (spec.scenes.empty()) throw ValidationError("synthetic spec needs at least one scene");
  if (!(spec.common_rate >= 0 && spec.common_rate < 1)) throw ValidationError("common_rate must lie in [0, 1)");
  if (spec.common_rate > 0) detail::check_distribution(spec.common_words, "common words");
  if (spec.min_words < 1 || spec.min_words > spec.max_words) throw ValidationError("invalid utterance length range");
  for (const auto& s : spec.scenes) {
    detail::check_distribution(s.words, "scene " + s.label);
    if (s.min_turns < 1 || s.min_turns > s.max_turns) throw ValidationError("invalid turn range in scene " + s.label);
    if (s.first_speaker >= spec.speakers.size()) throw ValidationError("bad first_speaker in scene " + s.label);
    if (!(s.switch_probability >= 0 && s.switch_probability <= 1)) {
      throw ValidationError("switch_probability must lie in [0, 1] in scene " + s.label);
    }
  }
  LabelSet check(spec.label_names());
}

/// Five left-to-right call scenes. Each scene owns a Zipfian pool of 36
/// words and borrows the head of the next scene's pool, so neighbouring
/// scenes overlap partially.
inline SyntheticSpec default_synthetic_spec() {
  SyntheticSpec spec;
  spec.common_words = detail::default_common_words();
  const std::vector<std::string> labels{"C1", "C2", "C3", "C4", "C5"};
  const std::vector<std::string> stems{"greet", "request", "answer", "verify", "farewell"};
  const std::size_t pool = 36, borrowed = 8;
  const std::vector<std::pair<std::size_t, std::size_t>> turns{{2, 4}, {3, 7}, {4, 10}, {2, 6}, {2, 4}};
  const std::vector<std::size_t> first{0, 1, 0, 0, 0};
  const std::vector<Real> switching{0.9, 0.7, 0.7, 0.8, 0.9};
  for (std::size_t k = 0; k < labels.size(); ++k) {
    SceneSpec s;
    s.label = labels[k];
    detail::append_zipf(s.words, detail::word_pool(stems[k], pool), 0.8);
    const std::size_t next = k + 1 < labels.size() ? k + 1 : k - 1;
    detail::append_zipf(s.words, detail::word_pool(stems[next], borrowed), 0.2);
    s.min_turns = turns[k].first;
    s.max_turns = turns[k].second;
    s.first_speaker = first[k];
    s.switch_probability = switching[k];
    spec.scenes.push_back(std::move(s));
  }
  return spec;
}

/// Variant where the three middle scenes share one word distribution and
/// differ only in their speaker-turn habits: a customer-led stretch, an
/// operator-led stretch, then strict back-and-forth confirmation.
inline SyntheticSpec speaker_cue_synthetic_spec() {
  SyntheticSpec spec;
  spec.common_words = detail::default_common_words();
  std::vector<WeightedWord> topic;
  detail::append_zipf(topic, detail::word_pool("topic", 40), 1.0);
  auto scene = [](std::string label, std::vector<WeightedWord> words, std::size_t lo, std::size_t hi,
                  std::size_t first, Real sw) {
    SceneSpec s;
    s.label = std::move(label);
    s.words = std::move(words);
    s.min_turns = lo;
    s.max_turns = hi;
    s.first_speaker = first;
    s.switch_probability = sw;
    return s;
  };
  std::vector<WeightedWord> open, close;
  detail::append_zipf(open, detail::word_pool("greet", 24), 1.0);
  detail::append_zipf(close, detail::word_pool("farewell", 24), 1.0);
  spec.scenes.push_back(scene("C1", open, 2, 3, 0, 0.9));
  spec.scenes.push_back(scene("C2", topic, 3, 8, 1, 0.15));
  spec.scenes.push_back(scene("C3", topic, 3, 8, 0, 0.15));
  spec.scenes.push_back(scene("C4", topic, 3, 8, 1, 1.0));
  spec.scenes.push_back(scene("C5", close, 2, 3, 0, 0.9));
  return spec;
}

inline Corpus generate_synthetic(const SyntheticSpec& spec, std::size_t num_conversations, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  std::bernoulli_distribution use_common(spec.common_rate);
  Corpus corpus;
  corpus.reserve(num_conversations);
  for (std::size_t n = 0; n < num_conversations; ++n) {
    Conversation c;
    c.id = "synth-" + std::to_string(seed) + "-" + std::to_string(n);
    c.labels.emplace();
    for (const auto& scene : spec.scenes) {
      const std::size_t turns = detail::uniform_int(scene.min_turns, scene.max_turns, rng);
      std::size_t speaker = scene.first_speaker;
      for (std::size_t k = 0; k < turns; ++k) {
        if (k > 0 && spec.speakers.size() > 1 &&
            std::bernoulli_distribution(scene.switch_probability)(rng)) {
          speaker = (speaker + 1 + detail::uniform_int(0, spec.speakers.size() - 2, rng)) % spec.speakers.size();
        }
        Utterance u;
        u.speaker = spec.speakers[speaker];
        const std::size_t len = detail::uniform_int(spec.min_words, spec.max_words, rng);
        for (std::size_t w = 0; w < len; ++w) {
          const bool common = spec.common_rate > 0 && use_common(rng);
          const auto& dist = common ? spec.common_words : scene.words;
          u.words.push_back(dist[detail::sample_index(dist, rng)].word);
        }
        c.utterances.push_back(std::move(u));
        c.labels->push_back(scene.label);
      }
    }
    corpus.push_back(std::move(c));
  }
  return corpus;
}

inline Corpus strip_labels(Corpus corpus) {
  for (auto& c : corpus) c.labels.reset();
  return corpus;
}

// JSON form of the spec, for gen-synth --spec.

inline nlohmann::json to_json(const SyntheticSpec& spec) {
  auto dist = [](const std::vector<WeightedWord>& d) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& w : d) a.push_back({w.word, w.probability});
    return a;
  };
  nlohmann::json j;
  j["speakers"] = spec.speakers;
  j["common_words"] = dist(spec.common_words);
  j["common_rate"] = spec.common_rate;
  j["min_words"] = spec.min_words;
  j["max_words"] = spec.max_words;
  j["scenes"] = nlohmann::json::array();
  for (const auto& s : spec.scenes) {
    j["scenes"].push_back({{"label", s.label},
                           {"words", dist(s.words)},
                           {"min_turns", s.min_turns},
                           {"max_turns", s.max_turns},
                           {"first_speaker", s.first_speaker},
                           {"switch_probability", s.switch_probability}});
  }
  return j;
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  auto dist = [](const nlohmann::json& a) {
    std::vector<WeightedWord> d;
    for (const auto& e : a) d.push_back({e.at(0).get<std::string>(), e.at(1).get<Real>()});
    return d;
  };
  try {
    SyntheticSpec spec;
    spec.speakers = j.at("speakers").get<std::vector<std::string>>();
    spec.common_words = dist(j.value("common_words", nlohmann::json::array()));
    spec.common_rate = j.value("common_rate", 0.0);
    spec.min_words = j.at("min_words").get<std::size_t>();
    spec.max_words = j.at("max_words").get<std::size_t>();
    for (const auto& s : j.at("scenes")) {
      SceneSpec scene;
      scene.label = s.at("label").get<std::string>();
      scene.words = dist(s.at("words"));
      scene.min_turns = s.at("min_turns").get<std::size_t>();
      scene.max_turns = s.at("max_turns").get<std::size_t>();
      scene.first_speaker = s.value("first_speaker", std::size_t{0});
      scene.switch_probability = s.value("switch_probability", 1.0);
      spec.scenes.push_back(std::move(scene));
    }
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed synthetic spec: ") + e.what());
  }
}

inline SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open synthetic spec " + path);
  try {
    return synthetic_spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace lccrl
