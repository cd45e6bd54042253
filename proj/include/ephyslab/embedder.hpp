#pragma once

// Token embedding for 30-second multi-channel segments. A segment is cut
// into fixed-length patches per channel; each patch row becomes one token.
// The token vector sums four lanes: a small 1-D CNN over the patch samples,
// a linear map of the patch's log-magnitude spectrum, a per-channel block
// (sinusoidal electrode-position features plus learned modality embeddings,
// broadcast across time), and a local spatio-temporal context encoding that
// runs a single attention block over short sliding time windows.
// Masked patches are zeroed before any lane sees them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ephyslab/autodiff.hpp"
#include "ephyslab/config.hpp"
#include "ephyslab/container.hpp"
#include "ephyslab/moirai.hpp"
#include "ephyslab/ndcore.hpp"
#include "ephyslab/params.hpp"

namespace ephyslab::embedder {

using autodiff::Tape;
using autodiff::Var;
using ingest::ChannelMeta;
using ingest::CleanSegment;
using ingest::ModalityType;
using ingest::Subtype;
using ndcore::RealArray;

// ---- patch grid ----

struct PatchGrid {
  RealArray patches;  // {C, N, P}
  std::vector<ChannelMeta> channels;
  std::int64_t C = 0, N = 0, P = 0;
};

inline PatchGrid patchify(const RealArray& data, std::vector<ChannelMeta> channels,
                          std::int64_t patch_size) {
  if (data.rank() != 2)
    throw DataError("patchify: expected a [channels x samples] matrix, got rank " +
                            std::to_string(data.rank()));
  const std::int64_t C = data.dim(0);
  const std::int64_t T = data.dim(1);
  if (patch_size <= 0 || T % patch_size != 0)
    throw DataError("patchify: segment length " + std::to_string(T) +
                            " is not divisible by patch size " + std::to_string(patch_size));
  if (static_cast<std::int64_t>(channels.size()) != C)
    throw DataError("patchify: " + std::to_string(channels.size()) +
                            " channel descriptors for " + std::to_string(C) + " data rows");
  PatchGrid g;
  g.C = C;
  g.N = T / patch_size;
  g.P = patch_size;
  g.channels = std::move(channels);
  g.patches = data;
  g.patches.shape = {g.C, g.N, g.P};  // same row-major storage, split time axis
  return g;
}

inline PatchGrid patchify(const CleanSegment& seg, std::int64_t patch_size) {
  return patchify(seg.data, seg.channels, patch_size);
}

// ---- mask ----

struct MaskSet {
  std::int64_t C = 0, N = 0;
  std::vector<std::int64_t> flat;  // sorted c * N + n

  std::int64_t count() const { return static_cast<std::int64_t>(flat.size()); }
};

inline MaskSet sample_mask(std::int64_t C, std::int64_t N, double ratio, ndcore::SeededRng& rng) {
  if (ratio < 0.0 || ratio > 1.0)
    throw ConfigError("mask ratio must lie in [0, 1], got " + std::to_string(ratio));
  MaskSet m;
  m.C = C;
  m.N = N;
  const std::int64_t k = std::llround(ratio * static_cast<double>(C * N));
  m.flat = rng.sample_without_replacement(C * N, k);
  std::sort(m.flat.begin(), m.flat.end());
  return m;
}

// Patch rows [C*N x P] ordered (c, n) with n fastest; masked rows zeroed.
inline RealArray input_rows(const PatchGrid& g, const MaskSet& mask) {
  RealArray rows = g.patches;
  rows.shape = {g.C * g.N, g.P};
  for (std::int64_t f : mask.flat)
    for (std::int64_t p = 0; p < g.P; ++p) rows.at(f, p) = 0.0;
  return rows;
}

// Log-magnitude spectrum per (already masked) patch row. A zeroed patch has
// an all-zero spectrum row, so masked rows carry no spectral information.
inline RealArray spectral_rows(const PatchGrid& g, const MaskSet& mask,
                               const config::ModelConfig& cfg) {
  const std::int64_t bins = cfg.spectral_bins();
  RealArray out({g.C * g.N, bins});
  std::vector<bool> masked(static_cast<std::size_t>(g.C * g.N), false);
  for (std::int64_t f : mask.flat) masked[static_cast<std::size_t>(f)] = true;
  RealArray patch({g.P});
  for (std::int64_t c = 0; c < g.C; ++c)
    for (std::int64_t n = 0; n < g.N; ++n) {
      const std::int64_t row = c * g.N + n;
      if (masked[static_cast<std::size_t>(row)]) continue;  // stays zero
      for (std::int64_t p = 0; p < g.P; ++p) patch.data[static_cast<std::size_t>(p)] =
          g.patches.at(c, n, p);
      RealArray spec = ndcore::rfft_log_mag(patch, cfg.sample_rate_hz, cfg.spectral_cutoff_hz);
      const std::int64_t have = std::min<std::int64_t>(bins, spec.size());
      for (std::int64_t b = 0; b < have; ++b) out.at(row, b) = spec.data[static_cast<std::size_t>(b)];
    }
  return out;
}

// ---- parameter declarations ----

inline void declare_embedder_params(params::ParamStore& s, const config::ModelConfig& cfg) {
  using params::ParamClass;
  const std::int64_t c1 = cfg.cnn_channels();
  s.add("cnn.conv1.w", {c1, 1, cfg.cnn_kernel(0)}, ParamClass::input, cfg.cnn_kernel(0));
  s.add("cnn.conv1.b", {c1}, ParamClass::bias);
  s.add("cnn.conv2.w", {c1, c1, cfg.cnn_kernel(1)}, ParamClass::hidden, c1 * cfg.cnn_kernel(1));
  s.add("cnn.conv2.b", {c1}, ParamClass::bias);
  s.add("cnn.conv3.w", {c1, c1, cfg.cnn_kernel(2)}, ParamClass::hidden, c1 * cfg.cnn_kernel(2));
  s.add("cnn.conv3.b", {c1}, ParamClass::bias);
  const std::int64_t flat_in = c1 * cfg.cnn_length(3);
  s.add("cnn.flatten.w", {flat_in, cfg.d_model}, ParamClass::hidden, flat_in);
  s.add("cnn.flatten.b", {cfg.d_model}, ParamClass::bias);

  s.add("spectral.w", {cfg.spectral_bins(), cfg.d_model}, ParamClass::input, cfg.spectral_bins());
  s.add("spectral.b", {cfg.d_model}, ParamClass::bias);

  s.add("modality.type", {2, cfg.modality_dim()}, ParamClass::embedding);
  s.add("modality.subtype", {4, cfg.modality_dim()}, ParamClass::embedding);

  s.add("stcpe.down.w", {cfg.d_model, cfg.stcpe_dim()}, ParamClass::hidden, cfg.d_model);
  s.add("stcpe.up.w", {cfg.stcpe_dim(), cfg.d_model}, ParamClass::hidden, cfg.stcpe_dim());
  moirai::declare_block_params(s, "stcpe.block", cfg.stcpe_dim(), cfg.stcpe_heads(),
                               cfg.stcpe_head_dim());
}

// ---- lanes ----

inline Var take_leaf(Tape& t, params::ParamStore& s, const std::string& name,
                     moirai::BlockVars* reg) {
  Var v = t.leaf(s.at(name).value, true);
  if (reg) reg->leaves.emplace_back(name, v);
  return v;
}

// rows: [R x P] raw patch values (masked rows already zero)
inline Var patch_cnn(Tape& t, params::ParamStore& s, const config::ModelConfig& cfg, Var rows,
                     moirai::BlockVars* reg) {
  const std::int64_t R = rows.dim(0);
  Var x = t.reshape(rows, {R, 1, cfg.patch_size});
  for (int l = 0; l < 3; ++l) {
    const std::string p = "cnn.conv" + std::to_string(l + 1);
    x = t.conv1d(x, take_leaf(t, s, p + ".w", reg), take_leaf(t, s, p + ".b", reg),
                 cfg.cnn_stride(l), cfg.cnn_padding(l));
    if (l < 2) x = t.silu(x);
  }
  x = t.reshape(x, {R, cfg.cnn_channels() * cfg.cnn_length(3)});
  return t.add_row_broadcast(t.matmul(x, take_leaf(t, s, "cnn.flatten.w", reg)),
                             take_leaf(t, s, "cnn.flatten.b", reg));
}

// spec: [R x bins] constant features
inline Var spectral_embed(Tape& t, params::ParamStore& s, const config::ModelConfig& cfg,
                          Var spec, const moirai::Dropout& drop, moirai::BlockVars* reg) {
  (void)cfg;
  Var y = t.add_row_broadcast(t.matmul(spec, take_leaf(t, s, "spectral.w", reg)),
                              take_leaf(t, s, "spectral.b", reg));
  return drop.apply(t, y);
}

// Sinusoidal features of the electrode coordinates: per axis, d/4 values
// alternating sin/cos over geometrically spaced frequencies. Channels
// without coordinates get an all-zero block. Values lie in [-1, 1].
inline RealArray channel_pos_features(const std::vector<ChannelMeta>& channels,
                                      const config::ModelConfig& cfg) {
  const std::int64_t C = static_cast<std::int64_t>(channels.size());
  const std::int64_t axis_dim = cfg.modality_dim();  // d/4 per axis
  RealArray out({C, cfg.pos_embed_dim()});
  for (std::int64_t c = 0; c < C; ++c) {
    if (!channels[static_cast<std::size_t>(c)].coords_cm) continue;
    const auto& xyz = *channels[static_cast<std::size_t>(c)].coords_cm;
    const double coord[3] = {xyz.x, xyz.y, xyz.z};
    for (int axis = 0; axis < 3; ++axis) {
      const double scaled = coord[axis] * cfg.pe_scale;
      for (std::int64_t i = 0; 2 * i + 1 < axis_dim; ++i) {
        const double freq = std::pow(cfg.pe_temperature,
                                     2.0 * static_cast<double>(i) / static_cast<double>(axis_dim));
        out.at(c, axis * axis_dim + 2 * i) = std::sin(scaled / freq);
        out.at(c, axis * axis_dim + 2 * i + 1) = std::cos(scaled / freq);
      }
    }
  }
  return out;
}

inline std::int64_t modality_type_id(const ChannelMeta& m) {
  return m.modality_type == ModalityType::EEG ? 0 : 1;
}

inline std::int64_t modality_subtype_id(const ChannelMeta& m) {
  switch (m.subtype) {
    case Subtype::scalp: return 0;
    case Subtype::grid: return 1;
    case Subtype::strip: return 2;
    default: return 3;
  }
}

// [C x d/4]: learned row per recording type plus learned row per sensor kind
inline Var modality_embed(Tape& t, params::ParamStore& s,
                          const std::vector<ChannelMeta>& channels, moirai::BlockVars* reg) {
  std::vector<std::int64_t> type_ids, sub_ids;
  type_ids.reserve(channels.size());
  sub_ids.reserve(channels.size());
  for (const auto& m : channels) {
    type_ids.push_back(modality_type_id(m));
    sub_ids.push_back(modality_subtype_id(m));
  }
  Var type_rows = t.gather_rows(take_leaf(t, s, "modality.type", reg), type_ids);
  Var sub_rows = t.gather_rows(take_leaf(t, s, "modality.subtype", reg), sub_ids);
  return t.add(type_rows, sub_rows);
}

// Local spatio-temporal context: project tokens to a narrow lane, run one
// attention block over each sliding window of nearby patch times (all
// channels included, absolute time indices kept for the rotary map), sum
// window outputs back onto their source positions, project back up.
inline Var stcpe(Tape& t, params::ParamStore& s, const config::ModelConfig& cfg, Var y_cnn,
                 std::int64_t C, std::int64_t N, const moirai::Dropout& drop,
                 moirai::BlockVars* reg) {
  const std::int64_t R = C * N;
  const std::int64_t m = (cfg.stcpe_window - 1) / 2;
  Var z = t.matmul(y_cnn, take_leaf(t, s, "stcpe.down.w", reg));

  std::map<std::int64_t, std::pair<Var, Var>> masks_by_len;  // window length -> (same, diff)
  Var agg{};
  bool first = true;
  for (std::int64_t center = 0; center < N; ++center) {
    const std::int64_t lo = std::max<std::int64_t>(0, center - m);
    const std::int64_t hi = std::min<std::int64_t>(N - 1, center + m);
    const std::int64_t wlen = hi - lo + 1;

    moirai::TokenLayout layout;
    std::vector<std::int64_t> idx;
    idx.reserve(static_cast<std::size_t>(C * wlen));
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t tt = lo; tt <= hi; ++tt) {
        idx.push_back(c * N + tt);
        layout.variate.push_back(c);
        layout.time.push_back(tt);
      }

    auto it = masks_by_len.find(wlen);
    if (it == masks_by_len.end()) {
      auto [same_m, diff_m] = moirai::variate_masks(layout);
      it = masks_by_len
               .emplace(wlen, std::make_pair(t.constant(std::move(same_m)),
                                             t.constant(std::move(diff_m))))
               .first;
    }

    Var slab = t.gather_rows(z, idx);
    Var out = moirai::moirai_block(t, s, "stcpe.block", slab, layout, it->second.first,
                                   it->second.second, cfg.stcpe_heads(), cfg.stcpe_head_dim(),
                                   cfg.rope_base, false, drop, reg);
    Var scattered = t.scatter_add_rows(R, out, idx);
    agg = first ? scattered : t.add(agg, scattered);
    first = false;
  }
  return t.matmul(agg, take_leaf(t, s, "stcpe.up.w", reg));
}

// ---- assembled token matrix ----

struct EmbedResult {
  Var tokens;  // [C*N x d]
  Var y_cnn;   // [C*N x d] CNN lane alone
};

inline EmbedResult embed_tokens(Tape& t, params::ParamStore& s, const config::ModelConfig& cfg,
                                const RealArray& rows, const RealArray& spec,
                                const std::vector<ChannelMeta>& channels, std::int64_t N,
                                const moirai::Dropout& drop, moirai::BlockVars* reg) {
  const std::int64_t C = static_cast<std::int64_t>(channels.size());
  EmbedResult r;
  r.y_cnn = patch_cnn(t, s, cfg, t.constant(rows), reg);
  Var spec_lane = spectral_embed(t, s, cfg, t.constant(spec), drop, reg);
  Var chan_block = t.concat_cols(t.constant(channel_pos_features(channels, cfg)),
                                 modality_embed(t, s, channels, reg));
  Var chan_rep = t.repeat_rows(chan_block, N);
  Var context = stcpe(t, s, cfg, r.y_cnn, C, N, drop, reg);
  r.tokens = t.add(t.add(t.add(r.y_cnn, spec_lane), chan_rep), context);
  return r;
}

}  // namespace ephyslab::embedder
