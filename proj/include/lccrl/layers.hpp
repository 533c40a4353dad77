// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lccrl/ops.hpp"
#include "lccrl/params.hpp"

// Neural building blocks: embeddings, LSTM / BLSTM recurrences, additive
// self-attention pooling, linear-softmax heads and inverted dropout.
//
// Recurrences always start from zero hidden and cell states.

namespace lccrl {

/// Per-forward-pass switches shared by every layer.
struct RunContext {
  bool training = false;
  Real dropout = 0.0;
  Rng* rng = nullptr;
};

/// Inverted dropout. Identity when not training or when rate is zero.
inline Tensor dropout(Tape& tape, const Tensor& x, Real rate, bool training, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  if (rng == nullptr) throw ContractError("training-mode dropout needs an rng");
  std::bernoulli_distribution keep(1.0 - rate);
  const Real scale = 1.0 / (1.0 - rate);
  std::vector<Real> mask(x.size());
  for (Real& m : mask) m = keep(*rng) ? scale : 0.0;
  return apply_mask(tape, x, std::move(mask));
}

inline Tensor dropout(Tape& tape, const Tensor& x, const RunContext& ctx) {
  return dropout(tape, x, ctx.dropout, ctx.training, ctx.rng);
}

// ---------------------------------------------------------------------------

struct EmbeddingTable {
  std::string name;
  Tensor matrix;  // [vocab_size x dim]

  static EmbeddingTable create(ParamStore& store, const std::string& name, std::size_t vocab_size,
                               std::size_t dim, Rng& rng) {
    // One-hot input over the table: fan_in = vocab_size.
    return {name, store.add_uniform(name, {vocab_size, dim}, 1.0 / std::sqrt(static_cast<Real>(vocab_size)), rng)};
  }
  std::size_t vocab_size() const { return matrix.dim(0); }
  std::size_t dim() const { return matrix.dim(1); }
};

inline Tensor embed(Tape& tape, const EmbeddingTable& table, std::size_t index) {
  if (index >= table.vocab_size()) {
    throw IndexError("embedding index " + std::to_string(index) + " out of range for table '" +
                     table.name + "' of size " + std::to_string(table.vocab_size()));
  }
  return row(tape, table.matrix, index);
}

// ---------------------------------------------------------------------------

/// Weights of one LSTM layer. The four gate blocks are stacked in the order
/// input, forget, cell candidate, output: rows [0,h), [h,2h), [2h,3h), [3h,4h).
struct LstmParams {
  Tensor w_input;   // [4h x d_in]
  Tensor w_hidden;  // [4h x h]
  Tensor bias;      // [4h]

  std::size_t input_dim() const { return w_input.dim(1); }
  std::size_t hidden_dim() const { return w_hidden.dim(1); }

  static LstmParams create(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                           std::size_t hidden_dim, Rng& rng) {
    LstmParams p;
    p.w_input = store.add_uniform(prefix + ".w_input", {4 * hidden_dim, input_dim},
                                  1.0 / std::sqrt(static_cast<Real>(input_dim)), rng);
    p.w_hidden = store.add_uniform(prefix + ".w_hidden", {4 * hidden_dim, hidden_dim},
                                   1.0 / std::sqrt(static_cast<Real>(hidden_dim)), rng);
    p.bias = store.add(prefix + ".bias", {4 * hidden_dim});
    auto b = p.bias.values();
    for (std::size_t i = hidden_dim; i < 2 * hidden_dim; ++i) b[i] = 1.0;
    return p;
  }
};

struct LstmState {
  Tensor h;
  Tensor c;

  static LstmState zeros(std::size_t hidden_dim) {
    return {Tensor::zeros({hidden_dim}), Tensor::zeros({hidden_dim})};
  }
};

namespace detail {

// z = W_x x + W_h h + b as one tape node.
inline Tensor lstm_preactivation(Tape& tape, const LstmParams& p, const Tensor& x, const Tensor& h) {
  const std::size_t rows = p.w_input.dim(0), nx = x.size(), nh = h.size();
  std::vector<Real> z(p.bias.values().begin(), p.bias.values().end());
  auto wx = p.w_input.values(), wh = p.w_hidden.values(), xv = x.values(), hv = h.values();
  for (std::size_t r = 0; r < rows; ++r) {
    Real s = 0;
    const Real* a = wx.data() + r * nx;
    for (std::size_t k = 0; k < nx; ++k) s += a[k] * xv[k];
    const Real* b = wh.data() + r * nh;
    for (std::size_t k = 0; k < nh; ++k) s += b[k] * hv[k];
    z[r] += s;
  }
  const Tensor inputs[] = {p.w_input, p.w_hidden, p.bias, x, h};
  bool rg = false;
  for (const auto& t : inputs) rg = rg || t.requires_grad();
  Tensor result = make_result({rows}, std::move(z), rg);
  if (rg) {
    tape.record([p, x, h, result, rows, nx, nh]() {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto xv = x.values(), hv = h.values();
      if (p.bias.requires_grad()) {
        auto gb = p.bias.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) gb[r] += g[r];
      }
      if (p.w_input.requires_grad()) {
        auto gw = p.w_input.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          Real* row = gw.data() + r * nx;
          for (std::size_t k = 0; k < nx; ++k) row[k] += g[r] * xv[k];
        }
      }
      if (p.w_hidden.requires_grad()) {
        auto gw = p.w_hidden.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          Real* row = gw.data() + r * nh;
          for (std::size_t k = 0; k < nh; ++k) row[k] += g[r] * hv[k];
        }
      }
      if (x.requires_grad()) {
        auto gx = x.grad_buffer();
        auto w = p.w_input.values();
        for (std::size_t r = 0; r < rows; ++r) {
          const Real* row = w.data() + r * nx;
          for (std::size_t k = 0; k < nx; ++k) gx[k] += g[r] * row[k];
        }
      }
      if (h.requires_grad()) {
        auto gh = h.grad_buffer();
        auto w = p.w_hidden.values();
        for (std::size_t r = 0; r < rows; ++r) {
          const Real* row = w.data() + r * nh;
          for (std::size_t k = 0; k < nh; ++k) gh[k] += g[r] * row[k];
        }
      }
    });
  }
  return result;
}

// Gate nonlinearities and state update from z = [i; f; g; o] as one node:
// c' = s(f) c + s(i) tanh(g), h' = s(o) tanh(c').
inline LstmState lstm_cell(Tape& tape, const Tensor& z, const Tensor& c_prev) {
  const std::size_t n = c_prev.size();
  if (z.size() != 4 * n) throw ShapeError("lstm_cell gate vector does not match the cell size");
  auto zv = z.values(), cp = c_prev.values();
  std::vector<Real> gi(n), gf(n), gg(n), go(n), c(n), tc(n), h(n);
  for (std::size_t k = 0; k < n; ++k) {
    gi[k] = stable_sigmoid(zv[k]);
    gf[k] = stable_sigmoid(zv[n + k]);
    gg[k] = std::tanh(zv[2 * n + k]);
    go[k] = stable_sigmoid(zv[3 * n + k]);
    c[k] = gf[k] * cp[k] + gi[k] * gg[k];
    tc[k] = std::tanh(c[k]);
    h[k] = go[k] * tc[k];
  }
  const bool rg = z.requires_grad() || c_prev.requires_grad();
  Tensor hn = make_result({n}, std::move(h), rg);
  Tensor cn = make_result({n}, std::move(c), rg);
  if (rg) {
    tape.record([z, c_prev, hn, cn, gi = std::move(gi), gf = std::move(gf), gg = std::move(gg),
                 go = std::move(go), tc = std::move(tc), n]() {
      if (!hn.has_grad() && !cn.has_grad()) return;
      auto dh = hn.grad(), dc_out = cn.grad();
      auto cp = c_prev.values();
      std::vector<Real> dz(4 * n), dcp(n);
      for (std::size_t k = 0; k < n; ++k) {
        const Real gh = dh.empty() ? 0.0 : dh[k];
        Real dc = dc_out.empty() ? 0.0 : dc_out[k];
        dc += gh * go[k] * (1 - tc[k] * tc[k]);
        dz[k] = dc * gg[k] * gi[k] * (1 - gi[k]);
        dz[n + k] = dc * cp[k] * gf[k] * (1 - gf[k]);
        dz[2 * n + k] = dc * gi[k] * (1 - gg[k] * gg[k]);
        dz[3 * n + k] = gh * tc[k] * go[k] * (1 - go[k]);
        dcp[k] = dc * gf[k];
      }
      if (z.requires_grad()) accumulate(z, dz);
      if (c_prev.requires_grad()) accumulate(c_prev, dcp);
    });
  }
  return {hn, cn};
}

}  // namespace detail

inline LstmState lstm_step(Tape& tape, const LstmParams& p, const Tensor& x, const LstmState& state) {
  const std::size_t h = p.hidden_dim();
  if (x.rank() != 1 || x.size() != p.input_dim()) {
    throw ShapeError("lstm_step input " + shape_string(x.shape()) + " does not match input dim " +
                     std::to_string(p.input_dim()));
  }
  if (state.h.size() != h || state.c.size() != h) {
    throw ShapeError("lstm_step state does not match hidden dim " + std::to_string(h));
  }
  return detail::lstm_cell(tape, detail::lstm_preactivation(tape, p, x, state.h), state.c);
}

/// Runs one LSTM layer over `inputs`, forward or reversed. Output n is the
/// hidden state after consuming input n in the chosen direction.
inline std::vector<Tensor> lstm_sequence(Tape& tape, const LstmParams& p,
                                         const std::vector<Tensor>& inputs, bool reverse = false) {
  std::vector<Tensor> out(inputs.size());
  LstmState s = LstmState::zeros(p.hidden_dim());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::size_t n = reverse ? inputs.size() - 1 - k : k;
    s = lstm_step(tape, p, inputs[n], s);
    out[n] = s.h;
  }
  return out;
}

/// Single bidirectional layer: out[n] = [fwd_h(n); bwd_h(n)].
inline std::vector<Tensor> blstm_sequence(Tape& tape, const LstmParams& fwd, const LstmParams& bwd,
                                          const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw DomainError("blstm_sequence over an empty sequence");
  auto f = lstm_sequence(tape, fwd, inputs, false);
  auto b = lstm_sequence(tape, bwd, inputs, true);
  std::vector<Tensor> out(inputs.size());
  for (std::size_t n = 0; n < inputs.size(); ++n) out[n] = concat(tape, {f[n], b[n]});
  return out;
}

/// Stacked bidirectional LSTM; layer k consumes layer k-1's 2h outputs.
/// Dropout is applied to each layer's inputs.
struct BlstmStack {
  std::vector<std::pair<LstmParams, LstmParams>> layers;

  static BlstmStack create(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                           std::size_t hidden_dim, std::size_t num_layers, Rng& rng) {
    BlstmStack s;
    std::size_t d = input_dim;
    for (std::size_t k = 0; k < num_layers; ++k) {
      const std::string lp = prefix + ".layer" + std::to_string(k);
      auto f = LstmParams::create(store, lp + ".fwd", d, hidden_dim, rng);
      auto b = LstmParams::create(store, lp + ".bwd", d, hidden_dim, rng);
      s.layers.emplace_back(std::move(f), std::move(b));
      d = 2 * hidden_dim;
    }
    return s;
  }
  std::size_t output_dim() const { return 2 * layers.back().first.hidden_dim(); }

  std::vector<Tensor> run(Tape& tape, std::vector<Tensor> inputs, const RunContext& ctx) const {
    if (inputs.empty()) throw DomainError("blstm over an empty sequence");
    for (const auto& [f, b] : layers) {
      for (auto& x : inputs) x = dropout(tape, x, ctx);
      inputs = blstm_sequence(tape, f, b, inputs);
    }
    return inputs;
  }
};

/// Stacked unidirectional LSTM with step-wise access to its state.
struct LstmStack {
  std::vector<LstmParams> layers;
  using State = std::vector<LstmState>;

  static LstmStack create(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                          std::size_t hidden_dim, std::size_t num_layers, Rng& rng) {
    LstmStack s;
    std::size_t d = input_dim;
    for (std::size_t k = 0; k < num_layers; ++k) {
      s.layers.push_back(
          LstmParams::create(store, prefix + ".layer" + std::to_string(k), d, hidden_dim, rng));
      d = hidden_dim;
    }
    return s;
  }
  std::size_t output_dim() const { return layers.back().hidden_dim(); }

  State zero_state() const {
    State s;
    for (const auto& l : layers) s.push_back(LstmState::zeros(l.hidden_dim()));
    return s;
  }

  /// Advances every layer by one input; returns the top layer's hidden state.
  Tensor step(Tape& tape, const Tensor& x, State& state, const RunContext& ctx) const {
    Tensor in = x;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      state[k] = lstm_step(tape, layers[k], dropout(tape, in, ctx), state[k]);
      in = state[k].h;
    }
    return in;
  }
};

// ---------------------------------------------------------------------------

/// Single-hop additive scorer: score_n = v . tanh(P c_n).
struct AttentionParams {
  Tensor projection;  // [a x d]
  Tensor score;       // [a]

  static AttentionParams create(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                                std::size_t attention_dim, Rng& rng) {
    AttentionParams p;
    p.projection = store.add_uniform(prefix + ".projection", {attention_dim, input_dim},
                                     1.0 / std::sqrt(static_cast<Real>(input_dim)), rng);
    p.score = store.add_uniform(prefix + ".score", {attention_dim},
                                1.0 / std::sqrt(static_cast<Real>(attention_dim)), rng);
    return p;
  }
};

struct AttentionPool {
  Tensor pooled;
  Tensor weights;  // [N], nonnegative, sums to one
};

inline AttentionPool self_attention_pool_weights(Tape& tape, const AttentionParams& p,
                                                 const std::vector<Tensor>& seq) {
  if (seq.empty()) throw DomainError("self-attention over an empty sequence");
  const std::size_t d = seq.front().size();
  if (p.projection.dim(1) != d) {
    throw ShapeError("attention projection " + shape_string(p.projection.shape()) +
                     " does not match input dim " + std::to_string(d));
  }
  Tensor states = reshape(tape, concat(tape, seq), {seq.size(), d});                 // [N x d]
  Tensor hidden = tanh(tape, matmul(tape, states, transpose(tape, p.projection)));  // [N x a]
  Tensor weights = softmax(tape, matmul(tape, hidden, p.score));                    // [N]
  Tensor pooled = matmul(tape, transpose(tape, states), weights);                   // [d]
  return {pooled, weights};
}

inline Tensor self_attention_pool(Tape& tape, const AttentionParams& p, const std::vector<Tensor>& seq) {
  return self_attention_pool_weights(tape, p, seq).pooled;
}

// ---------------------------------------------------------------------------

struct Linear {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  static Linear create(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                       std::size_t output_dim, Rng& rng) {
    return {store.add_uniform(prefix + ".weight", {output_dim, input_dim},
                              1.0 / std::sqrt(static_cast<Real>(input_dim)), rng),
            store.add(prefix + ".bias", {output_dim})};
  }
};

inline Tensor linear(Tape& tape, const Linear& l, const Tensor& x) {
  return add(tape, matmul(tape, l.weight, x), l.bias);
}

/// softmax(W x + b).
inline Tensor linear_softmax(Tape& tape, const Linear& l, const Tensor& x) {
  return softmax(tape, linear(tape, l, x));
}

inline Tensor linear_log_softmax(Tape& tape, const Linear& l, const Tensor& x) {
  return log_softmax(tape, linear(tape, l, x));
}

}  // namespace lccrl
