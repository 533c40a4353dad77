// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "catch_amalgamated.hpp"
#include "lccrl/lccrl.hpp"

namespace lccrl::testing {

inline constexpr Real kGradTol = 1e-4;

inline std::vector<Real> random_values(std::size_t n, Rng& rng, Real lo = -1.0, Real hi = 1.0) {
  std::uniform_real_distribution<Real> u(lo, hi);
  std::vector<Real> v(n);
  for (Real& x : v) x = u(rng);
  return v;
}

inline Tensor random_param(ParamStore& store, const std::string& name, Shape shape, Rng& rng) {
  Tensor t = store.add(name, shape);
  auto v = random_values(t.size(), rng);
  std::copy(v.begin(), v.end(), t.values().begin());
  return t;
}

/// Max relative error of the full (exhaustive) finite-difference check.
inline Real grad_error(const LossFn& f, ParamStore& store, std::uint64_t seed = 0) {
  GradCheckOptions opt;
  opt.samples_per_param = 1u << 20;
  opt.seed = seed;
  return finite_difference_check(f, store, opt).max_relative_error;
}

inline void zero_all(ParamStore& store) {
  for (const auto& e : store.entries()) {
    Tensor t = e.tensor;
    std::fill(t.values().begin(), t.values().end(), 0.0);
  }
}

inline std::vector<Real> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lccrl-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace lccrl::testing
