#pragma once

// Full reconstruction model: embed a masked patch grid, append register
// tokens, run the encoder stack, strip registers, and apply per-domain
// linear heads to the masked positions. The training loss sums, over masked
// patches, a weighted combination of per-domain mean squared errors against
// targets computed from the unmasked signal: the raw patch samples, the
// patch's log-magnitude spectrum, and (for 1-second patches) log-magnitude
// short-time spectrograms at two resolutions.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "ephyslab/autodiff.hpp"
#include "ephyslab/config.hpp"
#include "ephyslab/embedder.hpp"
#include "ephyslab/moirai.hpp"
#include "ephyslab/ndcore.hpp"
#include "ephyslab/params.hpp"

namespace ephyslab::model {

using autodiff::Tape;
using autodiff::Var;
using ingest::ChannelMeta;
using embedder::MaskSet;
using embedder::PatchGrid;
using ndcore::RealArray;

inline void declare_head_params(params::ParamStore& s, const config::ModelConfig& cfg) {
  using params::ParamClass;
  const std::int64_t d = cfg.d_model;
  s.add("head.raw.w", {d, cfg.patch_size}, ParamClass::output, d);
  s.add("head.raw.b", {cfg.patch_size}, ParamClass::bias);
  s.add("head.fft.w", {d, cfg.fft_target_bins()}, ParamClass::output, d);
  s.add("head.fft.b", {cfg.fft_target_bins()}, ParamClass::bias);
  const auto specs = cfg.stft_specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::string p = "head.stft" + std::to_string(i);
    s.add(p + ".w", {d, cfg.stft_target_size(specs[i])}, ParamClass::output, d);
    s.add(p + ".b", {cfg.stft_target_size(specs[i])}, ParamClass::bias);
  }
}

inline void declare_model_params(params::ParamStore& s, const config::ModelConfig& cfg) {
  embedder::declare_embedder_params(s, cfg);
  if (cfg.use_registers) moirai::declare_register_params(s, cfg.d_model);
  moirai::declare_encoder_params(s, cfg);
  declare_head_params(s, cfg);
}

// ---- batch: masked inputs plus reconstruction targets ----

struct Batch {
  std::int64_t C = 0, N = 0, P = 0;
  std::vector<ChannelMeta> channels;
  MaskSet mask;
  RealArray input_rows;                // {C*N, P} masked rows zeroed
  RealArray spectral_rows;             // {C*N, bins} masked rows zero
  RealArray target_raw;                // {M, P}
  RealArray target_fft;                // {M, fft bins}
  std::vector<RealArray> target_stft;  // per resolution {M, bins*frames}
};

inline Batch make_batch(const PatchGrid& g, const MaskSet& mask,
                        const config::ModelConfig& cfg) {
  if (g.P != cfg.patch_size)
    throw ConfigError("batch: grid patch size " + std::to_string(g.P) +
                      " does not match model patch size " + std::to_string(cfg.patch_size));
  if (mask.C != g.C || mask.N != g.N)
    throw ConfigError("batch: mask grid " + std::to_string(mask.C) + "x" +
                      std::to_string(mask.N) + " does not match patch grid " +
                      std::to_string(g.C) + "x" + std::to_string(g.N));
  Batch b;
  b.C = g.C;
  b.N = g.N;
  b.P = g.P;
  b.channels = g.channels;
  b.mask = mask;
  b.input_rows = embedder::input_rows(g, mask);
  b.spectral_rows = embedder::spectral_rows(g, mask, cfg);

  const std::int64_t M = mask.count();
  b.target_raw = RealArray({M, g.P});
  b.target_fft = RealArray({M, cfg.fft_target_bins()});
  const auto specs = cfg.stft_specs();
  for (const auto& sp : specs) b.target_stft.emplace_back(RealArray({M, cfg.stft_target_size(sp)}));

  RealArray patch({g.P});
  for (std::int64_t i = 0; i < M; ++i) {
    const std::int64_t f = b.mask.flat[static_cast<std::size_t>(i)];
    const std::int64_t c = f / g.N;
    const std::int64_t n = f % g.N;
    for (std::int64_t p = 0; p < g.P; ++p) {
      patch.data[static_cast<std::size_t>(p)] = g.patches.at(c, n, p);
      b.target_raw.at(i, p) = g.patches.at(c, n, p);
    }
    RealArray spec = ndcore::rfft_log_mag(patch, cfg.sample_rate_hz, cfg.spectral_cutoff_hz);
    for (std::int64_t k = 0; k < cfg.fft_target_bins(); ++k)
      b.target_fft.at(i, k) = spec.data[static_cast<std::size_t>(k)];
    for (std::size_t r = 0; r < specs.size(); ++r) {
      RealArray st = ndcore::stft_log_mag(patch, specs[r].window, specs[r].hop,
                                          cfg.sample_rate_hz, cfg.spectral_cutoff_hz);
      for (std::size_t q = 0; q < st.data.size(); ++q)
        b.target_stft[r].data[static_cast<std::size_t>(i) * st.data.size() + q] = st.data[q];
    }
  }
  return b;
}

// ---- forward ----

struct ForwardOptions {
  bool train = false;                    // enables dropout when a rng is given
  ndcore::SeededRng* dropout_rng = nullptr;
  bool break_rope = false;               // mis-rotates attention queries (diagnostics)
  bool want_taps = false;                // collect per-block outputs
  bool warn_empty_mask = true;           // stderr note when no patch is masked
};

struct ForwardOutput {
  Var loss;                    // weighted total, summed over masked patches
  double loss_raw = 0.0;       // unweighted per-domain values
  double loss_fft = 0.0;
  double loss_stft = 0.0;
  Var tokens;                  // [C*N x d] encoder output, registers stripped
  std::vector<Var> taps;       // per-block outputs when requested
  moirai::BlockVars leaves;    // parameter leaves used, for gradient readback
};

inline ForwardOutput model_forward(Tape& t, params::ParamStore& s,
                                   const config::ModelConfig& cfg, const Batch& b,
                                   const ForwardOptions& opt = {}) {
  ForwardOutput out;
  if (b.mask.count() == 0 && opt.warn_empty_mask)
    std::fprintf(stderr, "warning: empty mask set; reconstruction loss is zero\n");
  moirai::Dropout drop;
  if (opt.train && opt.dropout_rng != nullptr && cfg.dropout > 0.0) {
    drop.p = cfg.dropout;
    drop.rng = opt.dropout_rng;
  }
  moirai::BlockVars* reg = &out.leaves;

  auto emb = embedder::embed_tokens(t, s, cfg, b.input_rows, b.spectral_rows, b.channels, b.N,
                                    drop, reg);
  Var h{};
  if (cfg.use_registers) {
    auto aug = moirai::add_registers(t, s, emb.tokens, b.C, b.N, reg);
    aug.x = moirai::encoder_forward(t, s, cfg, aug.x, aug.layout, opt.break_rope, drop,
                                    opt.want_taps ? &out.taps : nullptr, reg);
    h = moirai::strip_registers(t, aug);
  } else {
    moirai::TokenLayout layout;
    for (std::int64_t c = 0; c < b.C; ++c)
      for (std::int64_t n = 0; n < b.N; ++n) {
        layout.variate.push_back(c);
        layout.time.push_back(n);
      }
    h = moirai::encoder_forward(t, s, cfg, emb.tokens, layout, opt.break_rope, drop,
                                opt.want_taps ? &out.taps : nullptr, reg);
  }
  out.tokens = h;

  const auto take = [&](const std::string& name) {
    Var v = t.leaf(s.at(name).value, true);
    reg->leaves.emplace_back(name, v);
    return v;
  };
  Var hm = t.gather_rows(h, b.mask.flat);
  Var pred_raw = t.add_row_broadcast(t.matmul(hm, take("head.raw.w")), take("head.raw.b"));
  Var pred_fft = t.add_row_broadcast(t.matmul(hm, take("head.fft.w")), take("head.fft.b"));

  Var l_raw = t.mse_rows(pred_raw, t.constant(b.target_raw));
  Var l_fft = t.mse_rows(pred_fft, t.constant(b.target_fft));
  out.loss_raw = l_raw.val().data[0];
  out.loss_fft = l_fft.val().data[0];
  Var total = t.add(t.scale(l_raw, cfg.lambda_raw), t.scale(l_fft, cfg.lambda_fft));
  for (std::size_t r = 0; r < b.target_stft.size(); ++r) {
    const std::string p = "head.stft" + std::to_string(r);
    Var pred = t.add_row_broadcast(t.matmul(hm, take(p + ".w")), take(p + ".b"));
    Var l = t.mse_rows(pred, t.constant(b.target_stft[r]));
    out.loss_stft += l.val().data[0];
    total = t.add(total, t.scale(l, cfg.lambda_stft));
  }
  out.loss = total;
  return out;
}

// Copies tape gradients back into the store. A parameter reused at several
// tape positions (the shared window block, registers) contributes once per
// use, so gradients are accumulated over all leaves carrying its name.
inline void accumulate_grads(params::ParamStore& s, const moirai::BlockVars& leaves) {
  s.zero_grad();
  for (const auto& [name, v] : leaves.leaves) {
    auto& e = s.at(name);
    const RealArray& g = v.grad();
    for (std::size_t i = 0; i < g.data.size(); ++i) e.grad.data[i] += g.data[i];
  }
}

}  // namespace ephyslab::model
