#pragma once

// Pretraining machinery: channel/time subsampling of input segments,
// finite-difference gradient verification, width-transfer activation
// checks, the deterministic training loop with loss traces, and a convex
// linear probe for frozen-embedding evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "ephyslab/config.hpp"
#include "ephyslab/embedder.hpp"
#include "ephyslab/model.hpp"
#include "ephyslab/ndcore.hpp"
#include "ephyslab/optim.hpp"
#include "ephyslab/params.hpp"

namespace ephyslab::pretrain {

using embedder::MaskSet;
using embedder::PatchGrid;
using ndcore::RealArray;
using ndcore::SeededRng;

// ---- input resampling ----

// Draws a channel subset (at most 32, size Beta(3,1)-distributed) and a
// contiguous run of at most 30 patches with uniform start. Channel order is
// preserved; patch indices stay contiguous in time.
inline PatchGrid resample_input(const PatchGrid& g, SeededRng& rng) {
  const std::int64_t c_max = std::min<std::int64_t>(g.C, 32);
  const std::int64_t c_sub = ndcore::beta31_subset_size(c_max, rng);
  std::vector<std::int64_t> chans = rng.sample_without_replacement(g.C, c_sub);
  std::sort(chans.begin(), chans.end());
  const std::int64_t n_max = std::min<std::int64_t>(g.N, 30);
  const std::int64_t n_sub = ndcore::beta31_subset_size(n_max, rng);
  const std::int64_t start = rng.uniform_int(g.N - n_sub + 1);

  PatchGrid out;
  out.C = c_sub;
  out.N = n_sub;
  out.P = g.P;
  out.patches = RealArray({c_sub, n_sub, g.P});
  for (std::int64_t ci = 0; ci < c_sub; ++ci) {
    const std::int64_t c = chans[static_cast<std::size_t>(ci)];
    out.channels.push_back(g.channels[static_cast<std::size_t>(c)]);
    for (std::int64_t ni = 0; ni < n_sub; ++ni)
      for (std::int64_t p = 0; p < g.P; ++p)
        out.patches.at(ci, ni, p) = g.patches.at(c, start + ni, p);
  }
  return out;
}

// ---- gradient verification ----

inline double loss_value(params::ParamStore& s, const config::ModelConfig& cfg,
                         const model::Batch& b) {
  autodiff::Tape t;
  return model::model_forward(t, s, cfg, b).loss.val().data[0];
}

struct GradCheckReport {
  bool ok = false;
  double max_rel_err = 0.0;
  double grad_norm = 0.0;
  std::string worst_param;
  std::string error;  // non-empty on non-finite gradients
  std::int64_t checked = 0;
};

// Central finite differences against the reverse-mode gradient on a random
// subsample covering every parameter tensor (at least one coordinate each,
// at least min_checked overall).
inline GradCheckReport grad_check(params::ParamStore& s, const config::ModelConfig& cfg,
                                  const model::Batch& b, double eps, SeededRng& rng,
                                  std::int64_t min_checked = 200) {
  GradCheckReport rep;
  {
    autodiff::Tape t;
    auto out = model::model_forward(t, s, cfg, b);
    t.backward(out.loss);
    model::accumulate_grads(s, out.leaves);
  }
  double norm_sq = 0.0;
  for (const auto& e : s.entries()) {
    for (double g : e.grad.data) {
      if (!std::isfinite(g)) {
        rep.error = "non-finite gradient in parameter " + e.name;
        return rep;
      }
      norm_sq += g * g;
    }
  }
  rep.grad_norm = std::sqrt(norm_sq);

  std::vector<std::pair<std::int64_t, std::int64_t>> picks;  // (entry, flat index)
  const auto& entries = s.entries();
  for (std::int64_t ei = 0; ei < static_cast<std::int64_t>(entries.size()); ++ei) {
    const std::int64_t n = static_cast<std::int64_t>(entries[static_cast<std::size_t>(ei)].value.data.size());
    picks.emplace_back(ei, rng.uniform_int(n));
  }
  while (static_cast<std::int64_t>(picks.size()) < min_checked) {
    const std::int64_t ei = rng.uniform_int(static_cast<std::int64_t>(entries.size()));
    const std::int64_t n = static_cast<std::int64_t>(entries[static_cast<std::size_t>(ei)].value.data.size());
    picks.emplace_back(ei, rng.uniform_int(n));
  }

  for (const auto& [ei, fi] : picks) {
    auto& e = s.entries()[static_cast<std::size_t>(ei)];
    const double saved = e.value.data[static_cast<std::size_t>(fi)];
    e.value.data[static_cast<std::size_t>(fi)] = saved + eps;
    const double lp = loss_value(s, cfg, b);
    e.value.data[static_cast<std::size_t>(fi)] = saved - eps;
    const double lm = loss_value(s, cfg, b);
    e.value.data[static_cast<std::size_t>(fi)] = saved;
    const double fd = (lp - lm) / (2.0 * eps);
    const double an = e.grad.data[static_cast<std::size_t>(fi)];
    const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-6});
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_param = e.name;
    }
  }
  rep.checked = static_cast<std::int64_t>(picks.size());
  rep.ok = true;
  return rep;
}

// ---- width-transfer activation check ----

struct CoordCheckResult {
  std::vector<std::int64_t> widths;
  // per width: [steps x layers] mean absolute activation of each block output
  std::vector<RealArray> norms;
};

// Trains each width for `steps` updates on the same synthetic batch stream
// and records per-block mean-|activation| right after each update's forward.
inline CoordCheckResult coord_check(const std::vector<std::int64_t>& widths, std::int64_t steps,
                                    std::int64_t n_layers, const PatchGrid& grid,
                                    double peak_lr, std::uint64_t seed) {
  CoordCheckResult res;
  res.widths = widths;
  for (std::int64_t w : widths) {
    config::ModelConfig cfg = config::ModelConfig::for_patch(grid.P, w, n_layers);
    params::ParamStore store(params::MuPConfig{}, w);
    model::declare_model_params(store, cfg);
    SeededRng init_rng(seed);
    store.init(init_rng);
    optim::OptimConfig oc;
    oc.peak_lr = peak_lr;
    oc.total_steps = steps;
    oc.warmup_frac = 0.0;

    RealArray norms({steps, n_layers});
    SeededRng mask_rng(seed + 1);
    for (std::int64_t k = 0; k < steps; ++k) {
      MaskSet mask = embedder::sample_mask(grid.C, grid.N, cfg.mask_ratio, mask_rng);
      model::Batch batch = model::make_batch(grid, mask, cfg);
      autodiff::Tape t;
      model::ForwardOptions opt;
      opt.want_taps = true;
      auto out = model::model_forward(t, store, cfg, batch, opt);
      for (std::int64_t l = 0; l < n_layers; ++l) {
        const RealArray& a = out.taps[static_cast<std::size_t>(l)].val();
        double acc = 0.0;
        for (double v : a.data) acc += std::fabs(v);
        norms.at(k, l) = acc / static_cast<double>(a.data.size());
      }
      t.backward(out.loss);
      model::accumulate_grads(store, out.leaves);
      optim::adam_step(store, oc, k);
    }
    res.norms.push_back(std::move(norms));
  }
  return res;
}

// Largest cross-width ratio of mean-|activation| over all (step, layer) cells.
inline double coord_check_worst_ratio(const CoordCheckResult& r) {
  double worst = 1.0;
  if (r.norms.empty()) return worst;
  const std::int64_t steps = r.norms[0].dim(0);
  const std::int64_t layers = r.norms[0].dim(1);
  for (std::int64_t k = 0; k < steps; ++k)
    for (std::int64_t l = 0; l < layers; ++l) {
      double lo = 1e300, hi = 0.0;
      for (const auto& m : r.norms) {
        lo = std::min(lo, m.at(k, l));
        hi = std::max(hi, m.at(k, l));
      }
      if (lo > 0.0) worst = std::max(worst, hi / lo);
    }
  return worst;
}

// ---- training loop ----

struct TraceRow {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  bool diverged = false;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct TrainConfig {
  optim::OptimConfig optim;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  bool resample = true;  // channel/time subsampling per step
  bool dropout = true;
};

inline double eval_loss(params::ParamStore& s, const config::ModelConfig& cfg,
                        const std::vector<PatchGrid>& grids, std::uint64_t seed) {
  if (grids.empty()) return 0.0;
  double acc = 0.0;
  SeededRng rng(seed);  // fresh stream: identical masks on every evaluation
  for (const auto& g : grids) {
    MaskSet mask = embedder::sample_mask(g.C, g.N, cfg.mask_ratio, rng);
    model::Batch b = model::make_batch(g, mask, cfg);
    acc += loss_value(s, cfg, b);
  }
  return acc / static_cast<double>(grids.size());
}

// One segment visit per step; an epoch is one pass over the training list.
// The held-out loss is recomputed at every epoch boundary with fixed masks.
inline TrainResult train_loop(params::ParamStore& store, const config::ModelConfig& cfg,
                              const std::vector<PatchGrid>& train,
                              const std::vector<PatchGrid>& test, const TrainConfig& tc) {
  if (train.empty()) throw DataError("train_loop: empty training set");
  TrainResult res;
  SeededRng rng(tc.seed);
  SeededRng drop_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::int64_t epoch_len = static_cast<std::int64_t>(train.size());
  double test_loss = eval_loss(store, cfg, test, tc.seed + 2);

  for (std::int64_t k = 0; k < tc.steps; ++k) {
    const std::int64_t epoch = k / epoch_len;
    const PatchGrid& g = train[static_cast<std::size_t>(rng.uniform_int(epoch_len))];
    PatchGrid sub = tc.resample ? resample_input(g, rng) : g;
    MaskSet mask = embedder::sample_mask(sub.C, sub.N, cfg.mask_ratio, rng);
    model::Batch b = model::make_batch(sub, mask, cfg);

    autodiff::Tape t;
    model::ForwardOptions opt;
    opt.train = tc.dropout;
    opt.dropout_rng = tc.dropout ? &drop_rng : nullptr;
    auto out = model::model_forward(t, store, cfg, b, opt);
    const double loss = out.loss.val().data[0];
    if (k == 0) res.initial_loss = loss;

    t.backward(out.loss);
    model::accumulate_grads(store, out.leaves);
    optim::adam_step(store, tc.optim, k);

    if ((k + 1) % epoch_len == 0 || k + 1 == tc.steps)
      test_loss = eval_loss(store, cfg, test, tc.seed + 2);
    res.trace.push_back({epoch, k, loss, test_loss, optim::cosine_lr(tc.optim, k)});
    res.final_loss = loss;

    if (std::isfinite(loss) && loss > 1e3 * res.initial_loss && res.initial_loss > 0.0) {
      res.diverged = true;
      std::fprintf(stderr, "training diverged at step %lld (loss %.6g vs initial %.6g)\n",
                   static_cast<long long>(k), loss, res.initial_loss);
      break;
    }
    if (!std::isfinite(loss)) {
      res.diverged = true;
      std::fprintf(stderr, "training produced a non-finite loss at step %lld\n",
                   static_cast<long long>(k));
      break;
    }
  }
  return res;
}

inline std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "epoch,step,train_loss,test_loss,lr\n";
  char buf[160];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%.9g,%.9g,%.9g\n",
                  static_cast<long long>(r.epoch), static_cast<long long>(r.step), r.train_loss,
                  r.test_loss, r.lr);
    out += buf;
  }
  return out;
}

// ---- linear probe ----

// Multinomial logistic regression trained by plain gradient descent with a
// Lipschitz-safe step size (convex, deterministic). Every fifth sample is
// held out; returns held-out accuracy.
inline double linear_probe(const RealArray& embeddings, const std::vector<std::int64_t>& labels) {
  const std::int64_t S = embeddings.dim(0);
  const std::int64_t d = embeddings.dim(1);
  if (S != static_cast<std::int64_t>(labels.size()))
    throw DataError("linear_probe: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(S) + " embeddings");
  std::int64_t k_classes = 0;
  for (std::int64_t l : labels) {
    if (l < 0) throw DataError("linear_probe: negative label");
    k_classes = std::max(k_classes, l + 1);
  }
  std::vector<bool> seen(static_cast<std::size_t>(k_classes), false);
  for (std::int64_t l : labels) seen[static_cast<std::size_t>(l)] = true;
  std::int64_t distinct = 0;
  for (bool b : seen) distinct += b ? 1 : 0;
  if (distinct < 2) throw DataError("linear_probe: labels contain a single class");

  std::vector<std::int64_t> train_idx, test_idx;
  for (std::int64_t i = 0; i < S; ++i)
    (i % 5 == 0 ? test_idx : train_idx).push_back(i);

  // standardize features on the training split
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0), sd(static_cast<std::size_t>(d), 0.0);
  for (std::int64_t i : train_idx)
    for (std::int64_t j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += embeddings.at(i, j);
  for (auto& m : mean) m /= static_cast<double>(train_idx.size());
  for (std::int64_t i : train_idx)
    for (std::int64_t j = 0; j < d; ++j) {
      const double v = embeddings.at(i, j) - mean[static_cast<std::size_t>(j)];
      sd[static_cast<std::size_t>(j)] += v * v;
    }
  for (auto& v : sd) v = std::sqrt(v / static_cast<double>(train_idx.size())) + 1e-12;

  const auto feat = [&](std::int64_t i, std::int64_t j) {
    return (embeddings.at(i, j) - mean[static_cast<std::size_t>(j)]) / sd[static_cast<std::size_t>(j)];
  };

  // weights [k x (d+1)], last column is the bias
  RealArray w({k_classes, d + 1});
  double row_sq = 0.0;
  for (std::int64_t i : train_idx) {
    double acc = 1.0;
    for (std::int64_t j = 0; j < d; ++j) acc += feat(i, j) * feat(i, j);
    row_sq = std::max(row_sq, acc);
  }
  const double l2 = 1e-4;
  const double lr = 1.0 / (0.25 * row_sq + l2);
  const std::int64_t iters = 2000;
  const double inv_n = 1.0 / static_cast<double>(train_idx.size());

  std::vector<double> logits(static_cast<std::size_t>(k_classes));
  RealArray grad({k_classes, d + 1});
  for (std::int64_t it = 0; it < iters; ++it) {
    for (auto& v : grad.data) v = 0.0;
    for (std::int64_t i : train_idx) {
      double mx = -1e300;
      for (std::int64_t kc = 0; kc < k_classes; ++kc) {
        double z = w.at(kc, d);
        for (std::int64_t j = 0; j < d; ++j) z += w.at(kc, j) * feat(i, j);
        logits[static_cast<std::size_t>(kc)] = z;
        mx = std::max(mx, z);
      }
      double den = 0.0;
      for (auto& z : logits) den += std::exp(z - mx);
      for (std::int64_t kc = 0; kc < k_classes; ++kc) {
        const double p = std::exp(logits[static_cast<std::size_t>(kc)] - mx) / den;
        const double err = p - (labels[static_cast<std::size_t>(i)] == kc ? 1.0 : 0.0);
        for (std::int64_t j = 0; j < d; ++j) grad.at(kc, j) += err * feat(i, j) * inv_n;
        grad.at(kc, d) += err * inv_n;
      }
    }
    for (std::int64_t kc = 0; kc < k_classes; ++kc)
      for (std::int64_t j = 0; j <= d; ++j) {
        const double reg = (j < d) ? l2 * w.at(kc, j) : 0.0;
        w.at(kc, j) -= lr * (grad.at(kc, j) + reg);
      }
  }

  std::int64_t hits = 0;
  for (std::int64_t i : test_idx) {
    std::int64_t best = 0;
    double best_z = -1e300;
    for (std::int64_t kc = 0; kc < k_classes; ++kc) {
      double z = w.at(kc, d);
      for (std::int64_t j = 0; j < d; ++j) z += w.at(kc, j) * feat(i, j);
      if (z > best_z) {
        best_z = z;
        best = kc;
      }
    }
    if (best == labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_idx.size());
}

// Mean over all tokens of the final encoder output for one unmasked grid.
inline RealArray pooled_embedding(params::ParamStore& s, const config::ModelConfig& cfg,
                                  const PatchGrid& g) {
  MaskSet empty;
  empty.C = g.C;
  empty.N = g.N;
  model::Batch b = model::make_batch(g, empty, cfg);
  autodiff::Tape t;
  model::ForwardOptions opt;
  opt.warn_empty_mask = false;
  auto out = model::model_forward(t, s, cfg, b, opt);
  const RealArray& tok = out.tokens.val();
  RealArray pooled({cfg.d_model});
  for (std::int64_t r = 0; r < tok.dim(0); ++r)
    for (std::int64_t j = 0; j < cfg.d_model; ++j) pooled.data[static_cast<std::size_t>(j)] += tok.at(r, j);
  for (auto& v : pooled.data) v /= static_cast<double>(tok.dim(0));
  return pooled;
}

}  // namespace ephyslab::pretrain
