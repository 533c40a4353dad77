// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "lccrl/tensor.hpp"

namespace lccrl {

using Rng = std::mt19937_64;

/// Named, ordered collection of trainable tensors.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  /// Registers a zero-filled parameter.
  Tensor add(const std::string& name, Shape shape) {
    if (index_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
    Tensor t = Tensor::zeros(std::move(shape), true);
    index_[name] = entries_.size();
    entries_.push_back({name, t});
    return t;
  }

  /// Registers a parameter filled from uniform(-bound, +bound).
  Tensor add_uniform(const std::string& name, Shape shape, Real bound, Rng& rng) {
    Tensor t = add(name, std::move(shape));
    std::uniform_real_distribution<Real> dist(-bound, bound);
    for (Real& v : t.values()) v = dist(rng);
    return t;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw IndexError("no parameter named '" + name + "'");
    return entries_[it->second].tensor;
  }

  struct Entry {
    std::string name;
    Tensor tensor;
  };
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

  // Frozen parameters keep their gradients but the optimizer skips them.
  void set_frozen(const std::string& name, bool frozen) {
    get(name);
    if (frozen) frozen_.insert(name);
    else frozen_.erase(name);
  }
  bool is_frozen(const std::string& name) const { return frozen_.count(name) != 0; }

  using Snapshot = std::vector<std::vector<Real>>;

  Snapshot snapshot() const {
    Snapshot s;
    s.reserve(entries_.size());
    for (const auto& e : entries_) s.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
    return s;
  }

  void restore(const Snapshot& s) {
    if (s.size() != entries_.size()) throw ContractError("snapshot does not match parameter store");
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto v = entries_[i].tensor.values();
      if (v.size() != s[i].size()) throw ContractError("snapshot size mismatch for " + entries_[i].name);
      std::copy(s[i].begin(), s[i].end(), v.begin());
    }
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::set<std::string> frozen_;
};

/// FNV-1a over the 32-bit float image of the named parameters, in order.
/// Two stores hash equal iff they would serialize to identical payloads.
inline std::uint64_t hash_parameters(const ParamStore& store, const std::vector<std::string>& names) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t n) {
    auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& name : names) {
    mix(name.data(), name.size());
    for (Real v : store.get(name).values()) {
      float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      mix(&bits, sizeof bits);
    }
  }
  return h;
}

}  // namespace lccrl
