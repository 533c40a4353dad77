// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lccrl/params.hpp"

// Binary checkpoint, all integers little-endian:
//
//   magic      8 bytes  "LCCRLCKP"
//   version    u32      kCheckpointVersion
//   meta_len   u64      length of the metadata JSON
//   metadata   bytes    UTF-8 JSON (model kind, dims, vocabulary, vocab hash)
//   count      u32      number of entries
//   entries    count x { name_len u32, name bytes, rank u32, dims u64 x rank,
//                        payload float32 x product(dims) }

namespace lccrl {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'L', 'C', 'C', 'R', 'L', 'C', 'K', 'P'};

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(source_ + ": truncated checkpoint while reading " + what);
  }
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace detail

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

/// Outcome of copying checkpoint entries into a parameter store.
struct TransferReport {
  std::vector<std::string> loaded;   // copied
  std::vector<std::string> ignored;  // in the checkpoint, not wanted by the target
  std::vector<std::string> missing;  // in the target, absent from the checkpoint (left fresh)
};

/// Group of a parameter name: everything before the first '.'.
inline std::string parameter_group(const std::string& name) { return name.substr(0, name.find('.')); }

inline std::set<std::string> groups_of(const std::vector<std::string>& names) {
  std::set<std::string> out;
  for (const auto& n : names) out.insert(parameter_group(n));
  return out;
}

class Checkpoint {
 public:
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<CheckpointEntry> entries;

  static Checkpoint from_params(const ParamStore& params, nlohmann::json metadata = nlohmann::json::object()) {
    Checkpoint ck;
    ck.metadata = std::move(metadata);
    for (const auto& e : params.entries()) {
      CheckpointEntry ce{e.name, e.tensor.shape(), {}};
      ce.values.reserve(e.tensor.size());
      for (Real v : e.tensor.values()) {
        if (!std::isfinite(v)) throw ContractError("parameter " + e.name + " holds a non-finite value");
        ce.values.push_back(static_cast<float>(v));
      }
      ck.entries.push_back(std::move(ce));
    }
    return ck;
  }

  const CheckpointEntry* find(const std::string& name) const {
    for (const auto& e : entries) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }

  std::string serialize() const {
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put_le<std::uint32_t>(out, kCheckpointVersion);
    const std::string meta = metadata.dump();
    detail::put_le<std::uint64_t>(out, meta.size());
    out += meta;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
      if (shape_size(e.shape) != e.values.size()) throw ContractError("entry " + e.name + " shape/payload mismatch");
      detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
      out += e.name;
      detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
      for (auto d : e.shape) detail::put_le<std::uint64_t>(out, d);
      for (float f : e.values) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        detail::put_le<std::uint32_t>(out, bits);
      }
    }
    return out;
  }

  static Checkpoint deserialize(const std::string& bytes, const std::string& source = "<checkpoint>") {
    detail::Reader r(bytes, source);
    if (r.get_bytes(sizeof kCheckpointMagic, "magic") != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
      throw FormatError(source + ": not a checkpoint (bad magic)");
    }
    const auto version = r.get_le<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
      throw FormatError(source + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ck;
    const auto meta_len = r.get_le<std::uint64_t>("metadata length");
    try {
      ck.metadata = nlohmann::json::parse(r.get_bytes(meta_len, "metadata"));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(source + ": bad checkpoint metadata: " + e.what());
    }
    const auto count = r.get_le<std::uint32_t>("entry count");
    std::set<std::string> seen;
    for (std::uint32_t k = 0; k < count; ++k) {
      CheckpointEntry e;
      e.name = r.get_bytes(r.get_le<std::uint32_t>("name length"), "entry name");
      if (!seen.insert(e.name).second) throw FormatError(source + ": duplicate entry " + e.name);
      const auto rank = r.get_le<std::uint32_t>("rank");
      for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(r.get_le<std::uint64_t>("shape"));
      const std::size_t n = shape_size(e.shape);
      e.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto bits = r.get_le<std::uint32_t>("payload");
        std::memcpy(&e.values[i], &bits, sizeof bits);
      }
      ck.entries.push_back(std::move(e));
    }
    if (!r.at_end()) throw FormatError(source + ": trailing bytes after last checkpoint entry");
    return ck;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path);
    const std::string bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes, path);
  }

  /// Copies entries into `params`. When `groups` is given, only entries whose
  /// group is listed are considered; everything else is reported ignored.
  /// Shape conflicts throw TransferError naming the entry.
  TransferReport apply_to(ParamStore& params, const std::set<std::string>* groups = nullptr) const {
    TransferReport report;
    for (const auto& e : entries) {
      const bool wanted = groups == nullptr || groups->count(parameter_group(e.name));
      if (!wanted || !params.contains(e.name)) {
        report.ignored.push_back(e.name);
        continue;
      }
      Tensor t = params.get(e.name);
      if (t.shape() != e.shape) {
        throw TransferError("cannot transfer '" + e.name + "': checkpoint shape " + shape_string(e.shape) +
                            " vs model shape " + shape_string(t.shape()));
      }
    }
    for (const auto& p : params.entries()) {
      const bool wanted = groups == nullptr || groups->count(parameter_group(p.name));
      const CheckpointEntry* e = wanted ? find(p.name) : nullptr;
      if (e == nullptr) {
        report.missing.push_back(p.name);
        continue;
      }
      Tensor t = p.tensor;
      auto v = t.values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Real>(e->values[i]);
      report.loaded.push_back(p.name);
    }
    return report;
  }

  /// FNV-1a over the payloads of the named entries; matches
  /// hash_parameters() on a store holding the same values.
  std::uint64_t hash(const std::vector<std::string>& names) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
      auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
      }
    };
    for (const auto& name : names) {
      const CheckpointEntry* e = find(name);
      if (e == nullptr) throw IndexError("checkpoint has no entry '" + name + "'");
      mix(name.data(), name.size());
      for (float f : e->values) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        mix(&bits, sizeof bits);
      }
    }
    return h;
  }
};

}  // namespace lccrl
