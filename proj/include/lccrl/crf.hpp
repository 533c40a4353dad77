// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lccrl/layers.hpp"

// Linear-chain CRF. The potential of moving from label i to label j at step t
// is transitions[i][j] + emissions[t][j], where emissions = W y^t + b and row
// `num_labels` of the transition matrix is the START state used at t = 0.
// There is no STOP state.

namespace lccrl {

struct CrfParams {
  Linear emission;    // [L x feat_dim], [L]
  Tensor transitions;  // [(L+1) x L]

  static CrfParams create(ParamStore& store, const std::string& prefix, std::size_t feat_dim,
                          std::size_t num_labels, Rng& rng) {
    CrfParams p;
    p.emission = Linear::create(store, prefix + ".emission", feat_dim, num_labels, rng);
    p.transitions = store.add_uniform(prefix + ".transitions", {num_labels + 1, num_labels},
                                      1.0 / std::sqrt(static_cast<Real>(num_labels)), rng);
    return p;
  }
  std::size_t num_labels() const { return transitions.dim(1); }
  std::size_t start_row() const { return num_labels(); }
};

/// Stacks per-step emission scores into a [T x L] tensor.
inline Tensor crf_emissions(Tape& tape, const CrfParams& p, const std::vector<Tensor>& feats) {
  if (feats.empty()) throw DomainError("CRF over an empty sequence");
  std::vector<Tensor> rows;
  rows.reserve(feats.size());
  for (const auto& y : feats) rows.push_back(linear(tape, p.emission, y));
  return reshape(tape, concat(tape, rows), {feats.size(), p.num_labels()});
}

namespace detail {

inline void check_crf_inputs(const Tensor& emissions, const Tensor& transitions) {
  if (emissions.rank() != 2 || transitions.rank() != 2 || transitions.dim(1) != emissions.dim(1) ||
      transitions.dim(0) != emissions.dim(1) + 1) {
    throw ShapeError("CRF shape mismatch: emissions " + shape_string(emissions.shape()) +
                     ", transitions " + shape_string(transitions.shape()));
  }
}

inline void check_labels(const std::vector<std::size_t>& labels, std::size_t steps, std::size_t num_labels) {
  if (labels.size() != steps) {
    throw ShapeError("label sequence length " + std::to_string(labels.size()) + " != " +
                     std::to_string(steps) + " steps");
  }
  for (auto l : labels) {
    if (l >= num_labels) {
      throw IndexError("label " + std::to_string(l) + " out of range for " + std::to_string(num_labels) +
                       " labels");
    }
  }
}

}  // namespace detail

/// Unnormalized log score of one labeling.
inline Tensor crf_score(Tape& tape, const Tensor& emissions, const Tensor& transitions,
                        const std::vector<std::size_t>& labels) {
  detail::check_crf_inputs(emissions, transitions);
  const std::size_t T = emissions.dim(0), L = emissions.dim(1);
  detail::check_labels(labels, T, L);
  auto e = emissions.values();
  auto tr = transitions.values();
  Real s = 0;
  std::size_t prev = L;
  for (std::size_t t = 0; t < T; ++t) {
    s += tr[prev * L + labels[t]] + e[t * L + labels[t]];
    prev = labels[t];
  }
  const bool rg = emissions.requires_grad() || transitions.requires_grad();
  Tensor result({1}, {s}, rg);
  if (rg) {
    tape.record([emissions, transitions, result, labels, T, L]() mutable {
      if (!result.has_grad()) return;
      const Real g = result.grad()[0];
      if (emissions.requires_grad()) {
        auto ge = emissions.grad_buffer();
        for (std::size_t t = 0; t < T; ++t) ge[t * L + labels[t]] += g;
      }
      if (transitions.requires_grad()) {
        auto gt = transitions.grad_buffer();
        std::size_t prev = L;
        for (std::size_t t = 0; t < T; ++t) {
          gt[prev * L + labels[t]] += g;
          prev = labels[t];
        }
      }
    });
  }
  return result;
}

/// Forward and backward log-space lattices of a chain.
struct CrfLattice {
  std::size_t steps = 0;
  std::size_t labels = 0;
  std::vector<Real> alpha;  // [T x L]
  std::vector<Real> beta;   // [T x L]
  Real log_z = 0;

  /// P(o^t = j).
  Real marginal(std::size_t t, std::size_t j) const {
    return std::exp(alpha[t * labels + j] + beta[t * labels + j] - log_z);
  }
};

inline CrfLattice crf_lattice(std::span<const Real> e, std::span<const Real> tr, std::size_t T,
                              std::size_t L) {
  CrfLattice lat;
  lat.steps = T;
  lat.labels = L;
  lat.alpha.assign(T * L, 0.0);
  lat.beta.assign(T * L, 0.0);
  std::vector<Real> buf(L);
  for (std::size_t j = 0; j < L; ++j) lat.alpha[j] = tr[L * L + j] + e[j];
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t i = 0; i < L; ++i) buf[i] = lat.alpha[(t - 1) * L + i] + tr[i * L + j];
      lat.alpha[t * L + j] = logsumexp(buf) + e[t * L + j];
    }
  }
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < L; ++j) {
        buf[j] = tr[i * L + j] + e[(t + 1) * L + j] + lat.beta[(t + 1) * L + j];
      }
      lat.beta[t * L + i] = logsumexp(buf);
    }
  }
  lat.log_z = logsumexp(std::span<const Real>(lat.alpha).subspan((T - 1) * L, L));
  return lat;
}

/// log of the sum over all labelings of exp(score), by the forward
/// algorithm in log space. The backward pass uses forward-backward marginals.
inline Tensor crf_log_partition(Tape& tape, const Tensor& emissions, const Tensor& transitions) {
  detail::check_crf_inputs(emissions, transitions);
  const std::size_t T = emissions.dim(0), L = emissions.dim(1);
  auto lat = std::make_shared<CrfLattice>(crf_lattice(emissions.values(), transitions.values(), T, L));
  const bool rg = emissions.requires_grad() || transitions.requires_grad();
  Tensor result({1}, {lat->log_z}, rg);
  if (rg) {
    tape.record([emissions, transitions, result, lat, T, L]() mutable {
      if (!result.has_grad()) return;
      const Real g = result.grad()[0];
      auto e = emissions.values();
      auto tr = transitions.values();
      if (emissions.requires_grad()) {
        auto ge = emissions.grad_buffer();
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t j = 0; j < L; ++j) ge[t * L + j] += g * lat->marginal(t, j);
      }
      if (transitions.requires_grad()) {
        auto gt = transitions.grad_buffer();
        for (std::size_t j = 0; j < L; ++j) gt[L * L + j] += g * lat->marginal(0, j);
        for (std::size_t t = 1; t < T; ++t) {
          for (std::size_t i = 0; i < L; ++i) {
            for (std::size_t j = 0; j < L; ++j) {
              const Real lp = lat->alpha[(t - 1) * L + i] + tr[i * L + j] + e[t * L + j] +
                              lat->beta[t * L + j] - lat->log_z;
              gt[i * L + j] += g * std::exp(lp);
            }
          }
        }
      }
    });
  }
  return result;
}

/// -log P(labels | emissions) = log Z - score(labels).
inline Tensor crf_nll(Tape& tape, const Tensor& emissions, const Tensor& transitions,
                      const std::vector<std::size_t>& labels) {
  Tensor score = crf_score(tape, emissions, transitions, labels);
  return sub(tape, crf_log_partition(tape, emissions, transitions), score);
}

// Feature-level overloads.

inline Tensor score_sequence(Tape& tape, const CrfParams& p, const std::vector<Tensor>& feats,
                             const std::vector<std::size_t>& labels) {
  if (feats.size() != labels.size()) {
    throw ShapeError("feature/label length mismatch: " + std::to_string(feats.size()) + " vs " +
                     std::to_string(labels.size()));
  }
  return crf_score(tape, crf_emissions(tape, p, feats), p.transitions, labels);
}

inline Tensor log_partition(Tape& tape, const CrfParams& p, const std::vector<Tensor>& feats) {
  return crf_log_partition(tape, crf_emissions(tape, p, feats), p.transitions);
}

inline Tensor crf_nll(Tape& tape, const CrfParams& p, const std::vector<Tensor>& feats,
                      const std::vector<std::size_t>& labels) {
  if (feats.size() != labels.size()) {
    throw ShapeError("feature/label length mismatch: " + std::to_string(feats.size()) + " vs " +
                     std::to_string(labels.size()));
  }
  return crf_nll(tape, crf_emissions(tape, p, feats), p.transitions, labels);
}

struct ViterbiResult {
  std::vector<std::size_t> labels;
  Real score = 0;
};

/// Max-scoring labeling. Ties go to the lower label index, resolved from the
/// last step backward: the final label is the lowest-index maximizer and each
/// backpointer is the lowest-index maximizing predecessor.
inline ViterbiResult viterbi(std::span<const Real> e, std::span<const Real> tr, std::size_t T, std::size_t L) {
  if (T == 0) throw DomainError("Viterbi over an empty sequence");
  std::vector<Real> delta(T * L);
  std::vector<std::size_t> back(T * L, 0);
  for (std::size_t j = 0; j < L; ++j) delta[j] = tr[L * L + j] + e[j];
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < L; ++j) {
      std::size_t best = 0;
      Real best_v = delta[(t - 1) * L] + tr[j];
      for (std::size_t i = 1; i < L; ++i) {
        const Real v = delta[(t - 1) * L + i] + tr[i * L + j];
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
      delta[t * L + j] = best_v + e[t * L + j];
      back[t * L + j] = best;
    }
  }
  ViterbiResult r;
  r.labels.assign(T, 0);
  std::size_t last = 0;
  for (std::size_t j = 1; j < L; ++j) {
    if (delta[(T - 1) * L + j] > delta[(T - 1) * L + last]) last = j;
  }
  r.score = delta[(T - 1) * L + last];
  r.labels[T - 1] = last;
  for (std::size_t t = T - 1; t > 0; --t) r.labels[t - 1] = back[t * L + r.labels[t]];
  return r;
}

inline ViterbiResult viterbi_decode(const Tensor& emissions, const Tensor& transitions) {
  detail::check_crf_inputs(emissions, transitions);
  return viterbi(emissions.values(), transitions.values(), emissions.dim(0), emissions.dim(1));
}

inline ViterbiResult viterbi_decode(const CrfParams& p, const std::vector<Tensor>& feats) {
  Tape scratch;
  return viterbi_decode(crf_emissions(scratch, p, feats), p.transitions);
}

}  // namespace lccrl
