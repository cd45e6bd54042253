#pragma once

// Encoder backbone. Attention mixes all (channel, patch) tokens jointly:
// energies take a rotary inner product over the temporal offset plus a pair
// of learnable per-head scalars keyed on same-channel vs cross-channel, so
// the computation never depends on channel order. Feed-forward is a gated
// linear unit. Blocks are pre-norm residual; register tokens extend the grid
// by one channel row, one time column and a corner token.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ephyslab/autodiff.hpp"
#include "ephyslab/config.hpp"
#include "ephyslab/params.hpp"

namespace ephyslab::moirai {

using autodiff::Tape;
using autodiff::Var;
using ndcore::RealArray;

// per-row channel identity and temporal index of a flattened token matrix
struct TokenLayout {
  std::vector<std::int64_t> variate;
  std::vector<std::int64_t> time;
};

struct Dropout {
  double p = 0.0;
  ndcore::SeededRng* rng = nullptr;  // null disables

  Var apply(Tape& t, Var x) const {
    if (rng == nullptr || p <= 0.0) return x;
    RealArray mask(x.val().shape);
    const double keep = 1.0 - p;
    for (auto& v : mask.data) v = (rng->uniform01() < keep) ? 1.0 / keep : 0.0;
    return t.mul(x, t.constant(std::move(mask)));
  }
};

inline void declare_block_params(params::ParamStore& s, const std::string& prefix,
                                 std::int64_t dim, std::int64_t heads, std::int64_t head_dim) {
  using params::ParamClass;
  s.add(prefix + ".norm1.g", {dim}, ParamClass::norm);
  for (std::int64_t h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".attn.h" + std::to_string(h);
    s.add(hp + ".wq", {dim, head_dim}, ParamClass::hidden, dim);
    s.add(hp + ".wk", {dim, head_dim}, ParamClass::hidden, dim);
    s.add(hp + ".wv", {dim, head_dim}, ParamClass::hidden, dim);
    s.add(hp + ".wo", {head_dim, dim}, ParamClass::hidden, head_dim);
    s.add(hp + ".u1", {1}, ParamClass::scalar);
    s.add(hp + ".u2", {1}, ParamClass::scalar);
  }
  s.add(prefix + ".norm2.g", {dim}, ParamClass::norm);
  s.add(prefix + ".ffn.gate.w", {dim, 2 * dim}, ParamClass::hidden, dim);
  s.add(prefix + ".ffn.up.w", {dim, 2 * dim}, ParamClass::hidden, dim);
  s.add(prefix + ".ffn.down.w", {2 * dim, dim}, ParamClass::hidden, 2 * dim);
}

// 0/1 indicator matrices for same-channel and cross-channel key pairs
inline std::pair<RealArray, RealArray> variate_masks(const TokenLayout& layout) {
  const std::int64_t n = static_cast<std::int64_t>(layout.variate.size());
  RealArray same({n, n}), diff({n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      const bool eq = layout.variate[static_cast<std::size_t>(i)] ==
                      layout.variate[static_cast<std::size_t>(j)];
      same.at(i, j) = eq ? 1.0 : 0.0;
      diff.at(i, j) = eq ? 0.0 : 1.0;
    }
  return {std::move(same), std::move(diff)};
}

inline Var leafp(Tape& t, params::ParamStore& s, const std::string& name) {
  return t.leaf(s.at(name).value, true);
}

struct BlockVars {
  // taped leaves of one block's parameters, so gradients can be read back
  std::vector<std::pair<std::string, Var>> leaves;
};

// x_normed: [T x dim] already normalized. same/diff: constant indicator vars.
inline Var any_variate_attention(Tape& t, params::ParamStore& s, const std::string& prefix,
                                 Var x_normed, const TokenLayout& layout, Var same, Var diff,
                                 std::int64_t heads, std::int64_t head_dim, double rope_base,
                                 bool break_rope, BlockVars* reg) {
  const auto take = [&](const std::string& name) {
    Var v = leafp(t, s, name);
    if (reg) reg->leaves.emplace_back(name, v);
    return v;
  };
  Var out{};
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (std::int64_t h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".attn.h" + std::to_string(h);
    Var q = t.matmul(x_normed, take(hp + ".wq"));
    Var k = t.matmul(x_normed, take(hp + ".wk"));
    Var v = t.matmul(x_normed, take(hp + ".wv"));
    Var qr = t.rope_rows(q, layout.time, rope_base, break_rope);
    Var kr = t.rope_rows(k, layout.time, rope_base, false);
    Var e = t.scale(t.matmul_nt(qr, kr), scale);
    e = t.add_scalar_mask(e, take(hp + ".u1"), same);
    e = t.add_scalar_mask(e, take(hp + ".u2"), diff);
    Var a = t.softmax_rows(e);
    Var mix = t.matmul(a, v);
    Var proj = t.matmul(mix, take(hp + ".wo"));
    out = (h == 0) ? proj : t.add(out, proj);
  }
  return out;
}

inline Var glu_ffn(Tape& t, params::ParamStore& s, const std::string& prefix, Var x_normed,
                   BlockVars* reg) {
  const auto take = [&](const std::string& name) {
    Var v = leafp(t, s, name);
    if (reg) reg->leaves.emplace_back(name, v);
    return v;
  };
  Var gate = t.silu(t.matmul(x_normed, take(prefix + ".ffn.gate.w")));
  Var up = t.matmul(x_normed, take(prefix + ".ffn.up.w"));
  return t.matmul(t.mul(gate, up), take(prefix + ".ffn.down.w"));
}

// One pre-norm residual block: x + Attn(norm(x)), then x + FFN(norm(x)).
inline Var moirai_block(Tape& t, params::ParamStore& s, const std::string& prefix, Var x,
                        const TokenLayout& layout, Var same, Var diff, std::int64_t heads,
                        std::int64_t head_dim, double rope_base, bool break_rope,
                        const Dropout& drop, BlockVars* reg) {
  const auto take = [&](const std::string& name) {
    Var v = leafp(t, s, name);
    if (reg) reg->leaves.emplace_back(name, v);
    return v;
  };
  Var n1 = t.rmsnorm_rows(x, take(prefix + ".norm1.g"));
  Var attn = any_variate_attention(t, s, prefix, n1, layout, same, diff, heads, head_dim,
                                   rope_base, break_rope, reg);
  Var h = t.add(x, drop.apply(t, attn));
  Var n2 = t.rmsnorm_rows(h, take(prefix + ".norm2.g"));
  Var ffn = glu_ffn(t, s, prefix, n2, reg);
  return t.add(h, drop.apply(t, ffn));
}

// ---- register tokens ----

inline void declare_register_params(params::ParamStore& s, std::int64_t d_model) {
  s.add("reg.temporal", {1, d_model}, params::ParamClass::embedding);
  s.add("reg.channel", {1, d_model}, params::ParamClass::embedding);
  s.add("reg.corner", {1, d_model}, params::ParamClass::embedding);
}

struct Augmented {
  Var x;  // [(C+1)(N+1) x d]
  TokenLayout layout;
  std::vector<std::int64_t> data_rows;  // positions of the original C x N block
};

// Input rows ordered (c, n) with n fastest. The extra channel row C carries
// the temporal register at every patch time, the extra time column N carries
// the channel register on every data channel, and (C, N) is the corner token.
inline Augmented add_registers(Tape& t, params::ParamStore& s, Var x, std::int64_t C,
                               std::int64_t N, BlockVars* reg) {
  const std::int64_t d = x.dim(1);
  const std::int64_t rows = (C + 1) * (N + 1);
  const auto take = [&](const std::string& name) {
    Var v = leafp(t, s, name);
    if (reg) reg->leaves.emplace_back(name, v);
    return v;
  };

  Augmented out;
  out.layout.variate.resize(static_cast<std::size_t>(rows));
  out.layout.time.resize(static_cast<std::size_t>(rows));
  for (std::int64_t c = 0; c <= C; ++c)
    for (std::int64_t n = 0; n <= N; ++n) {
      out.layout.variate[static_cast<std::size_t>(c * (N + 1) + n)] = c;
      out.layout.time[static_cast<std::size_t>(c * (N + 1) + n)] = n;
    }

  std::vector<std::int64_t> data_idx;
  data_idx.reserve(static_cast<std::size_t>(C * N));
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t n = 0; n < N; ++n) data_idx.push_back(c * (N + 1) + n);
  out.data_rows = data_idx;

  std::vector<std::int64_t> temporal_idx, channel_idx;
  for (std::int64_t n = 0; n < N; ++n) temporal_idx.push_back(C * (N + 1) + n);
  for (std::int64_t c = 0; c < C; ++c) channel_idx.push_back(c * (N + 1) + N);

  Var grid = t.scatter_add_rows(rows, x, data_idx);
  grid = t.add(grid, t.scatter_add_rows(rows, t.repeat_rows(take("reg.temporal"), N),
                                        temporal_idx));
  grid = t.add(grid, t.scatter_add_rows(rows, t.repeat_rows(take("reg.channel"), C),
                                        channel_idx));
  grid = t.add(grid, t.scatter_add_rows(rows, take("reg.corner"), {C * (N + 1) + N}));
  out.x = grid;
  return out;
}

inline Var strip_registers(Tape& t, const Augmented& aug) {
  return t.gather_rows(aug.x, aug.data_rows);
}

// ---- the stack ----

inline void declare_encoder_params(params::ParamStore& s, const config::ModelConfig& cfg) {
  for (std::int64_t l = 0; l < cfg.n_layers; ++l)
    declare_block_params(s, "enc.l" + std::to_string(l), cfg.d_model, cfg.n_heads(),
                         cfg.head_dim());
}

// Runs the block stack on an already augmented token matrix. No final norm:
// with all-zero weights the stack is exactly the identity. Per-block outputs
// land in taps when provided.
inline Var encoder_forward(Tape& t, params::ParamStore& s, const config::ModelConfig& cfg,
                           Var x, const TokenLayout& layout, bool break_rope,
                           const Dropout& drop, std::vector<Var>* taps = nullptr,
                           BlockVars* reg = nullptr) {
  auto [same_m, diff_m] = variate_masks(layout);
  Var same = t.constant(std::move(same_m));
  Var diff = t.constant(std::move(diff_m));
  for (std::int64_t l = 0; l < cfg.n_layers; ++l) {
    x = moirai_block(t, s, "enc.l" + std::to_string(l), x, layout, same, diff, cfg.n_heads(),
                     cfg.head_dim(), cfg.rope_base, break_rope, drop, reg);
    if (taps) taps->push_back(x);
  }
  return x;
}

}  // namespace ephyslab::moirai
