// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lccrl/layers.hpp"
#include "lccrl/vocab.hpp"

namespace lccrl {

/// Rows read from a text word-vector file, aligned to a vocabulary.
struct WordVectorInit {
  std::size_t dim = 0;
  std::vector<std::optional<std::vector<Real>>> rows;  // by vocabulary index
  std::size_t covered = 0;                             // regular words found
  Real coverage = 0;                                   // covered / regular words
};

/// Reads "word v1 v2 ... vd" lines. Words are lowercased to match the
/// vocabulary; words outside the vocabulary are skipped.
inline WordVectorInit load_word_vectors(std::istream& in, const Vocabulary& vocab,
                                        const std::string& source = "<stream>") {
  WordVectorInit init;
  init.rows.assign(vocab.num_words(), std::nullopt);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream is(line);
    std::string word;
    if (!(is >> word)) continue;
    std::vector<Real> v;
    std::string tok;
    while (is >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FormatError(source + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
    }
    if (v.empty()) throw FormatError(source + ":" + std::to_string(line_no) + ": no vector values");
    if (init.dim == 0) init.dim = v.size();
    if (v.size() != init.dim) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(init.dim) +
                        " values, found " + std::to_string(v.size()));
    }
    auto lowered = tokenize(word);
    if (lowered.size() != 1 || !vocab.contains_word(lowered.front())) continue;
    auto idx = vocab.word_index(lowered.front());
    if (!init.rows[idx]) {
      if (idx > Vocabulary::kEos) ++init.covered;
      init.rows[idx] = std::move(v);
    }
  }
  const std::size_t regular = vocab.num_words() - 3;
  init.coverage = regular == 0 ? 0.0 : static_cast<Real>(init.covered) / static_cast<Real>(regular);
  return init;
}

inline WordVectorInit load_word_vectors(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open word-vector file " + path);
  return load_word_vectors(in, vocab, path);
}

/// Copies the loaded rows into `table`; rows without a vector keep their
/// current values. Returns the number of rows written.
inline std::size_t apply_word_vectors(const WordVectorInit& init, EmbeddingTable& table) {
  if (init.rows.size() != table.vocab_size()) {
    throw ShapeError("word vectors cover " + std::to_string(init.rows.size()) + " rows, table has " +
                     std::to_string(table.vocab_size()));
  }
  if (init.covered == 0 && init.dim == 0) return 0;
  if (init.dim != table.dim()) {
    throw ShapeError("word vectors have dimension " + std::to_string(init.dim) + ", table '" + table.name +
                     "' has " + std::to_string(table.dim()));
  }
  auto m = table.matrix.values();
  std::size_t written = 0;
  for (std::size_t i = 0; i < init.rows.size(); ++i) {
    if (!init.rows[i]) continue;
    std::copy(init.rows[i]->begin(), init.rows[i]->end(), m.begin() + i * init.dim);
    ++written;
  }
  return written;
}

}  // namespace lccrl
