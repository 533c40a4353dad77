// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lccrl/tensor.hpp"

// Differentiable primitives. Every function records its backward closure on
// the given tape when any input requires a gradient; otherwise the result is
// a constant and nothing is recorded.
//
// Broadcasting is limited to scalar-with-tensor on the binary ops.

namespace lccrl {

namespace detail {

inline Tensor make_result(Shape shape, std::vector<Real> values, bool requires_grad) {
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

inline void accumulate(const Tensor& t, std::span<const Real> g) {
  auto buf = t.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

enum class BinaryKind { Add, Sub, Mul };

inline Tensor binary(Tape& tape, Tensor a, Tensor b, BinaryKind kind) {
  const bool a_scalar = a.is_scalar() && !b.is_scalar();
  const bool b_scalar = b.is_scalar() && !a.is_scalar();
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw ShapeError("elementwise op on mismatched shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const Shape& shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_size(shape);
  auto av = a.values();
  auto bv = b.values();
  std::vector<Real> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Real x = av[a_scalar ? 0 : i];
    Real y = bv[b_scalar ? 0 : i];
    switch (kind) {
      case BinaryKind::Add: out[i] = x + y; break;
      case BinaryKind::Sub: out[i] = x - y; break;
      case BinaryKind::Mul: out[i] = x * y; break;
    }
  }
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor result = make_result(shape, std::move(out), rg);
  if (rg) {
    tape.record([a, b, result, kind, a_scalar, b_scalar, n]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto av = a.values();
      auto bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          Real d = kind == BinaryKind::Mul ? g[i] * bv[b_scalar ? 0 : i] : g[i];
          ga[a_scalar ? 0 : i] += d;
        }
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          Real d = kind == BinaryKind::Add   ? g[i]
                   : kind == BinaryKind::Sub ? -g[i]
                                             : g[i] * av[a_scalar ? 0 : i];
          gb[b_scalar ? 0 : i] += d;
        }
      }
    });
  }
  return result;
}

// Unary op with derivative expressed through input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(Tape& tape, Tensor a, Fwd fwd, Deriv deriv) {
  auto av = a.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  Tensor result = make_result(a.shape(), std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    tape.record([a, result, deriv]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto x = a.values();
      auto y = result.values();
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
    });
  }
  return result;
}

inline Real stable_sigmoid(Real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  Real e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return detail::binary(tape, a, b, detail::BinaryKind::Add);
}
inline Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return detail::binary(tape, a, b, detail::BinaryKind::Sub);
}
inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return detail::binary(tape, a, b, detail::BinaryKind::Mul);
}

/// Multiplies by a constant.
inline Tensor scale(Tape& tape, const Tensor& a, Real factor) {
  return detail::unary(tape, a, [factor](Real x) { return factor * x; },
                       [factor](Real, Real) { return factor; });
}

inline Tensor sigmoid(Tape& tape, const Tensor& a) {
  return detail::unary(tape, a, detail::stable_sigmoid, [](Real, Real y) { return y * (1.0 - y); });
}

inline Tensor tanh(Tape& tape, const Tensor& a) {
  return detail::unary(tape, a, [](Real x) { return std::tanh(x); },
                       [](Real, Real y) { return 1.0 - y * y; });
}

inline Tensor relu(Tape& tape, const Tensor& a) {
  return detail::unary(tape, a, [](Real x) { return x > 0 ? x : 0.0; },
                       [](Real x, Real) { return x > 0 ? 1.0 : 0.0; });
}

/// Matrix product. `b` may be a matrix [k x n] or a vector [k]; a vector
/// operand yields a vector result [m].
inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul shape mismatch: " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.rank() == 2 ? b.dim(1) : 1;
  auto av = a.values();
  auto bv = b.values();
  std::vector<Real> out(m * n, 0.0);
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const Real* arow = av.data() + i * k;
      Real s = 0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * bv[p];
      out[i] = s;
    }
  }
  for (std::size_t i = 0; i < m && n > 1; ++i) {
    const Real* arow = av.data() + i * k;
    Real* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = arow[p];
      const Real* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Shape shape = b.rank() == 2 ? Shape{m, n} : Shape{m};
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor result = detail::make_result(std::move(shape), std::move(out), rg);
  if (rg) {
    tape.record([a, b, result, m, k, n]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto av = a.values();
      auto bv = b.values();
      if (n == 1) {
        if (a.requires_grad()) {
          auto ga = a.grad_buffer();
          for (std::size_t i = 0; i < m; ++i) {
            Real* garow = ga.data() + i * k;
            const Real gi = g[i];
            for (std::size_t p = 0; p < k; ++p) garow[p] += gi * bv[p];
          }
        }
        if (b.requires_grad()) {
          auto gb = b.grad_buffer();
          for (std::size_t i = 0; i < m; ++i) {
            const Real* arow = av.data() + i * k;
            const Real gi = g[i];
            for (std::size_t p = 0; p < k; ++p) gb[p] += arow[p] * gi;
          }
        }
        return;
      }
      if (a.requires_grad()) {
        // dA = G * B^T
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          const Real* grow = g.data() + i * n;
          Real* garow = ga.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) {
            const Real* brow = bv.data() + p * n;
            Real s = 0;
            for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            garow[p] += s;
          }
        }
      }
      if (b.requires_grad()) {
        // dB = A^T * G
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          const Real* arow = av.data() + i * k;
          const Real* grow = g.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const Real aip = arow[p];
            Real* gbrow = gb.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
          }
        }
      }
    });
  }
  return result;
}

/// Concatenates along `axis`; every other axis must agree.
inline Tensor concat(Tape& tape, const std::vector<Tensor>& parts, std::size_t axis = 0) {
  if (parts.empty()) throw DomainError("concat of an empty list");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw DomainError("concat axis " + std::to_string(axis) + " out of range for rank " +
                      std::to_string(first.size()));
  }
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) {
      throw ShapeError("concat shape mismatch: " + shape_string(first) + " vs " + shape_string(s) +
                       " on axis " + std::to_string(axis));
    }
    shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::vector<Real> out(shape_size(shape));
  const std::size_t out_stride = shape[axis] * inner;
  bool rg = false;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t block = p.dim(axis) * inner;
    auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.data() + o * block, block, out.data() + o * out_stride + offset);
    }
    offset += block;
    rg = rg || p.requires_grad();
  }
  Tensor result = detail::make_result(shape, std::move(out), rg);
  if (rg) {
    tape.record([parts, result, axis, outer, inner, out_stride]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      std::size_t offset = 0;
      for (auto& p : parts) {
        const std::size_t block = p.dim(axis) * inner;
        if (p.requires_grad()) {
          auto gp = p.grad_buffer();
          for (std::size_t o = 0; o < outer; ++o) {
            const Real* src = g.data() + o * out_stride + offset;
            Real* dst = gp.data() + o * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
          }
        }
        offset += block;
      }
    });
  }
  return result;
}

/// Matrix transpose.
inline Tensor transpose(Tape& tape, const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose needs a matrix, got " + shape_string(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto av = a.values();
  std::vector<Real> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  Tensor result = detail::make_result({c, r}, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    tape.record([a, result, r, c]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    });
  }
  return result;
}

/// Contiguous sub-range [offset, offset + length) of a flattened tensor.
inline Tensor slice(Tape& tape, const Tensor& a, std::size_t offset, std::size_t length) {
  if (length == 0 || offset + length > a.size()) {
    throw ShapeError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of range for " + shape_string(a.shape()));
  }
  auto av = a.values();
  std::vector<Real> out(av.begin() + offset, av.begin() + offset + length);
  Tensor result = detail::make_result({length}, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    tape.record([a, result, offset, length]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < length; ++i) ga[offset + i] += g[i];
    });
  }
  return result;
}

/// Row `index` of a matrix. Gradient flows into that row only.
inline Tensor row(Tape& tape, const Tensor& matrix, std::size_t index) {
  if (matrix.rank() != 2) throw ShapeError("row() needs a matrix, got " + shape_string(matrix.shape()));
  if (index >= matrix.dim(0)) {
    throw IndexError("row index " + std::to_string(index) + " out of range for " +
                     std::to_string(matrix.dim(0)) + " rows");
  }
  return slice(tape, matrix, index * matrix.dim(1), matrix.dim(1));
}

/// Single element as a scalar tensor.
inline Tensor pick(Tape& tape, const Tensor& a, std::size_t index) {
  if (index >= a.size()) {
    throw IndexError("pick index " + std::to_string(index) + " out of range for size " +
                     std::to_string(a.size()));
  }
  return slice(tape, a, index, 1);
}

inline Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  std::vector<Real> out(a.values().begin(), a.values().end());
  Tensor result = detail::make_result(std::move(shape), std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    tape.record([a, result]() mutable {
      if (!result.has_grad()) return;
      detail::accumulate(a, result.grad());
    });
  }
  return result;
}

inline Tensor sum(Tape& tape, const Tensor& a) {
  Real s = 0;
  for (Real v : a.values()) s += v;
  Tensor result = detail::make_result({1}, {s}, a.requires_grad());
  if (a.requires_grad()) {
    tape.record([a, result]() mutable {
      if (!result.has_grad()) return;
      const Real g = result.grad()[0];
      for (Real& x : a.grad_buffer()) x += g;
    });
  }
  return result;
}

/// Sum of a list of same-shape tensors.
inline Tensor add_n(Tape& tape, const std::vector<Tensor>& terms) {
  if (terms.empty()) throw DomainError("add_n of an empty list");
  const Shape& shape = terms.front().shape();
  std::vector<Real> out(shape_size(shape), 0.0);
  bool rg = false;
  for (const auto& t : terms) {
    if (t.shape() != shape) {
      throw ShapeError("add_n shape mismatch: " + shape_string(shape) + " vs " + shape_string(t.shape()));
    }
    auto tv = t.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += tv[i];
    rg = rg || t.requires_grad();
  }
  Tensor result = detail::make_result(shape, std::move(out), rg);
  if (rg) {
    tape.record([terms, result]() mutable {
      if (!result.has_grad()) return;
      for (auto& t : terms) {
        if (t.requires_grad()) detail::accumulate(t, result.grad());
      }
    });
  }
  return result;
}

inline Real logsumexp(std::span<const Real> x) {
  Real mx = -std::numeric_limits<Real>::infinity();
  for (Real v : x) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  Real s = 0;
  for (Real v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

/// Numerically stable log-softmax over a flattened tensor.
inline Tensor log_softmax(Tape& tape, const Tensor& logits) {
  if (!logits.defined() || logits.size() == 0) throw DomainError("log_softmax of empty input");
  auto x = logits.values();
  const Real lse = logsumexp(x);
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
  Tensor result = detail::make_result(logits.shape(), std::move(out), logits.requires_grad());
  if (logits.requires_grad()) {
    tape.record([logits, result]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto y = result.values();
      Real gs = 0;
      for (Real v : g) gs += v;
      auto gx = logits.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] - std::exp(y[i]) * gs;
    });
  }
  return result;
}

/// Softmax with max subtraction.
inline Tensor softmax(Tape& tape, const Tensor& logits) {
  if (!logits.defined() || logits.size() == 0) throw DomainError("softmax of empty input");
  auto x = logits.values();
  const Real mx = *std::max_element(x.begin(), x.end());
  std::vector<Real> out(x.size());
  Real s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    s += out[i];
  }
  for (Real& v : out) v /= s;
  Tensor result = detail::make_result(logits.shape(), std::move(out), logits.requires_grad());
  if (logits.requires_grad()) {
    tape.record([logits, result]() mutable {
      if (!result.has_grad()) return;
      auto g = result.grad();
      auto y = result.values();
      Real dot = 0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
      auto gx = logits.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += y[i] * (g[i] - dot);
    });
  }
  return result;
}

/// Inverted dropout with a precomputed keep mask (1/(1-rate) or 0 entries).
inline Tensor apply_mask(Tape& tape, const Tensor& x, std::vector<Real> mask) {
  if (mask.size() != x.size()) throw ShapeError("dropout mask size mismatch");
  return mul(tape, x, Tensor(x.shape(), std::move(mask)));
}

}  // namespace lccrl
