// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lccrl/errors.hpp"
#include "lccrl/log.hpp"

// Conversation corpora as JSON Lines. Accepted line shapes:
//
//   {"id": "...", "utterances": [{"speaker": "Operator", "text": "..."}, ...],
//    "labels": ["C1", ...]}                      conversation (labels optional)
//   {"speaker": "Operator", "text": "..."}       single-utterance conversation
//   {"text": "..."}                              sentence, dummy speaker
//
// Any "text" may be replaced by a pre-tokenized "words" array. Text is split
// on whitespace and lowercased; brace fillers such as "{um}" stay one token.

namespace lccrl {

inline constexpr const char* kSentenceSpeaker = "<sentence>";

struct Utterance {
  std::string speaker;
  std::vector<std::string> words;

  bool operator==(const Utterance&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;
  std::optional<std::vector<std::string>> labels;

  std::size_t size() const { return utterances.size(); }
  bool labeled() const { return labels.has_value(); }
  bool operator==(const Conversation&) const = default;
};

using Corpus = std::vector<Conversation>;

inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(tok));
  }
  return out;
}

/// Checks the structural invariants: T >= 1, every utterance has a speaker
/// and at least one word, labels (if any) have length T.
inline void validate(const Conversation& c) {
  if (c.utterances.empty()) throw ValidationError("conversation '" + c.id + "' has no utterances");
  for (std::size_t t = 0; t < c.utterances.size(); ++t) {
    const auto& u = c.utterances[t];
    if (u.speaker.empty()) {
      throw ValidationError("conversation '" + c.id + "' utterance " + std::to_string(t) + " has no speaker");
    }
    if (u.words.empty()) {
      throw ValidationError("conversation '" + c.id + "' utterance " + std::to_string(t) + " has no words");
    }
  }
  if (c.labels && c.labels->size() != c.utterances.size()) {
    throw ValidationError("conversation '" + c.id + "' has " + std::to_string(c.labels->size()) +
                          " labels for " + std::to_string(c.utterances.size()) + " utterances");
  }
}

namespace detail {

inline std::vector<std::string> words_of(const nlohmann::json& j) {
  if (j.contains("words")) {
    std::vector<std::string> w;
    for (const auto& x : j.at("words")) {
      auto tok = tokenize(x.get<std::string>());
      if (tok.size() != 1) throw ValidationError("\"words\" entries must be single tokens");
      w.push_back(tok.front());
    }
    return w;
  }
  if (j.contains("text")) return tokenize(j.at("text").get<std::string>());
  throw ValidationError("utterance needs \"text\" or \"words\"");
}

inline Utterance utterance_of(const nlohmann::json& j, bool require_speaker) {
  Utterance u;
  if (j.contains("speaker")) u.speaker = j.at("speaker").get<std::string>();
  else if (require_speaker) throw ValidationError("utterance has no \"speaker\"");
  else u.speaker = kSentenceSpeaker;
  u.words = words_of(j);
  return u;
}

}  // namespace detail

inline Conversation conversation_from_json(const nlohmann::json& j, const std::string& default_id) {
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  Conversation c;
  c.id = j.contains("id") ? j.at("id").get<std::string>() : default_id;
  if (j.contains("utterances")) {
    for (const auto& u : j.at("utterances")) c.utterances.push_back(detail::utterance_of(u, true));
  } else {
    c.utterances.push_back(detail::utterance_of(j, false));
  }
  if (j.contains("labels")) c.labels = j.at("labels").get<std::vector<std::string>>();
  validate(c);
  return c;
}

inline nlohmann::json to_json(const Conversation& c) {
  nlohmann::json j;
  j["id"] = c.id;
  j["utterances"] = nlohmann::json::array();
  for (const auto& u : c.utterances) j["utterances"].push_back({{"speaker", u.speaker}, {"words", u.words}});
  if (c.labels) j["labels"] = *c.labels;
  return j;
}

inline Corpus parse_jsonl(std::istream& in, const std::string& source = "<stream>") {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      corpus.push_back(conversation_from_json(nlohmann::json::parse(line), "line-" + std::to_string(line_no)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (corpus.empty()) log::warn(source + " contains no conversations");
  return corpus;
}

inline Corpus parse_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file " + path);
  return parse_jsonl(in, path);
}

inline void write_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& c : corpus) out << to_json(c).dump() << '\n';
}

inline void write_jsonl(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_jsonl(out, corpus);
}

/// Ordered, unique scene label names.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw ValidationError("label set is empty");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (names_[i] == names_[j]) throw ValidationError("duplicate label '" + names_[i] + "'");
      }
    }
  }

  /// The five call scenes C1..C5.
  static LabelSet call_scenes() { return LabelSet({"C1", "C2", "C3", "C4", "C5"}); }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::size_t index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw ValidationError("label '" + name + "' is not in the label set");
    return static_cast<std::size_t>(it - names_.begin());
  }

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> names_;
};

}  // namespace lccrl
