// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "lccrl/corpus.hpp"

namespace lccrl {

struct IndexedUtterance {
  std::size_t speaker = 0;
  std::vector<std::size_t> words;
};

struct IndexedConversation {
  std::string id;
  std::vector<IndexedUtterance> utterances;
  std::vector<std::size_t> labels;  // empty when unlabeled

  std::size_t size() const { return utterances.size(); }
};

/// Word and speaker index maps.
///
/// Word indices: 0 <unk>, 1 <bos>, 2 <eos>, then kept words in lexicographic
/// order, so the result does not depend on corpus order. Speakers are an
/// open set taken from the data and never collapse to <unk>.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;

  Vocabulary() : Vocabulary(std::vector<std::string>{}, std::vector<std::string>{}, 2) {}

  Vocabulary(const std::vector<std::string>& words, std::vector<std::string> speakers, std::size_t min_count)
      : min_count_(min_count) {
    words_ = {"<unk>", "<bos>", "<eos>"};
    for (const auto& w : words) {
      if (w == "<unk>" || w == "<bos>" || w == "<eos>") continue;
      words_.push_back(w);
    }
    std::sort(words_.begin() + 3, words_.end());
    words_.erase(std::unique(words_.begin() + 3, words_.end()), words_.end());
    std::sort(speakers.begin(), speakers.end());
    speakers.erase(std::unique(speakers.begin(), speakers.end()), speakers.end());
    speakers_ = std::move(speakers);
    for (std::size_t i = 0; i < words_.size(); ++i) word_index_[words_[i]] = i;
    for (std::size_t i = 0; i < speakers_.size(); ++i) speaker_index_[speakers_[i]] = i;
  }

  /// Words seen fewer than `min_count` times map to <unk>.
  static Vocabulary build(const Corpus& corpus, std::size_t min_count = 2) {
    if (corpus.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
    std::map<std::string, std::size_t> counts;
    std::set<std::string> speakers;
    for (const auto& c : corpus) {
      for (const auto& u : c.utterances) {
        speakers.insert(u.speaker);
        for (const auto& w : u.words) ++counts[w];
      }
    }
    std::vector<std::string> kept;
    for (const auto& [w, n] : counts) {
      if (n >= min_count) kept.push_back(w);
    }
    return Vocabulary(kept, {speakers.begin(), speakers.end()}, min_count);
  }

  std::size_t num_words() const { return words_.size(); }
  std::size_t num_speakers() const { return speakers_.size(); }
  std::size_t min_count() const { return min_count_; }
  const std::string& word(std::size_t i) const { return words_.at(i); }
  const std::string& speaker(std::size_t i) const { return speakers_.at(i); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::string>& speakers() const { return speakers_; }

  bool contains_word(const std::string& w) const { return word_index_.count(w) != 0; }

  std::size_t word_index(const std::string& w) const {
    auto it = word_index_.find(w);
    return it == word_index_.end() ? kUnk : it->second;
  }

  std::size_t speaker_index(const std::string& s) const {
    auto it = speaker_index_.find(s);
    if (it == speaker_index_.end()) throw ValidationError("unknown speaker '" + s + "'");
    return it->second;
  }

  /// FNV-1a over the word and speaker lists.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
      }
      h ^= 0xff;
      h *= 1099511628211ull;
    };
    for (const auto& w : words_) mix(w);
    mix("\x01speakers");
    for (const auto& s : speakers_) mix(s);
    return h;
  }

  IndexedConversation index(const Conversation& c, const LabelSet* labels = nullptr) const {
    IndexedConversation ic;
    ic.id = c.id;
    for (const auto& u : c.utterances) {
      IndexedUtterance iu;
      iu.speaker = speaker_index(u.speaker);
      for (const auto& w : u.words) iu.words.push_back(word_index(w));
      ic.utterances.push_back(std::move(iu));
    }
    if (labels != nullptr) {
      if (!c.labels) throw ValidationError("conversation '" + c.id + "' has no labels");
      for (const auto& l : *c.labels) ic.labels.push_back(labels->index(l));
    }
    return ic;
  }

  std::vector<IndexedConversation> index(const Corpus& corpus, const LabelSet* labels = nullptr) const {
    std::vector<IndexedConversation> out;
    out.reserve(corpus.size());
    for (const auto& c : corpus) out.push_back(index(c, labels));
    return out;
  }

  nlohmann::json to_json() const {
    return {{"words", std::vector<std::string>(words_.begin() + 3, words_.end())},
            {"speakers", speakers_},
            {"min_count", min_count_}};
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    return Vocabulary(j.at("words").get<std::vector<std::string>>(),
                      j.at("speakers").get<std::vector<std::string>>(), j.value("min_count", std::size_t{2}));
  }

  bool operator==(const Vocabulary& o) const { return words_ == o.words_ && speakers_ == o.speakers_; }

 private:
  std::vector<std::string> words_;
  std::vector<std::string> speakers_;
  std::size_t min_count_ = 2;
  std::unordered_map<std::string, std::size_t> word_index_;
  std::unordered_map<std::string, std::size_t> speaker_index_;
};

}  // namespace lccrl
