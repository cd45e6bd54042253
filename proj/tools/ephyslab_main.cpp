// Command-line workbench: preprocess raw containers, run desk-scale masked
// pretraining, execute the property-verification suite, fit data-constrained
// scaling laws, and emit contour/frontier/report files.
//
// Conventions: one machine-readable JSON document on stdout per run, human
// logs on stderr, files written atomically. Exit 0 on success, 1 when a
// computation fails (divergence, failed verification property), 2 on bad
// input (missing/malformed files, bad flags or config keys).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ephyslab/config.hpp"
#include "ephyslab/container.hpp"
#include "ephyslab/embedder.hpp"
#include "ephyslab/ingest.hpp"
#include "ephyslab/model.hpp"
#include "ephyslab/moirai.hpp"
#include "ephyslab/ndcore.hpp"
#include "ephyslab/params.hpp"
#include "ephyslab/pretrain.hpp"
#include "ephyslab/scalinglab.hpp"
#include "ephyslab/synthetic.hpp"

using ephyslab::ConfigError;
using ephyslab::DataError;
using ephyslab::autodiff::Tape;
using ephyslab::autodiff::Var;
using ephyslab::config::ModelConfig;
using ephyslab::embedder::PatchGrid;
using ephyslab::ndcore::max_abs_diff;
using ephyslab::ndcore::RealArray;
using ephyslab::ndcore::SeededRng;
using ephyslab::params::MuPConfig;
using ephyslab::params::ParamStore;
using nlohmann::ordered_json;

namespace fs = std::filesystem;
namespace emb = ephyslab::embedder;
namespace ing = ephyslab::ingest;
namespace moirai = ephyslab::moirai;
namespace model = ephyslab::model;
namespace pre = ephyslab::pretrain;
namespace lab = ephyslab::scalinglab;
namespace synth = ephyslab::synthetic;

namespace {

// ---- shared plumbing ----

void emit(const ordered_json& j) {
  const std::string s = j.dump(2) + "\n";
  std::fwrite(s.data(), 1, s.size(), stdout);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing or unreadable " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing or unreadable " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed " + path.string() + ": " + e.what());
  }
}

// Optional run-config document: a single JSON object whose keys are the long
// flag names with dashes replaced by underscores. A value from the file is
// applied only when the matching flag was not given on the command line, so
// explicit flags always win. Keys that match no flag are rejected.
class FileConfig {
 public:
  void load(const fs::path& path) {
    doc_ = parse_json_file(path);
    if (!doc_.is_object()) throw ConfigError(path.string() + ": run config must be a JSON object");
    for (const auto& item : doc_.items()) pending_.insert(item.key());
    loaded_ = true;
  }

  template <typename T>
  void apply(const CLI::App& cmd, const std::string& flag, const std::string& key, T& slot) {
    if (!loaded_ || !doc_.contains(key)) return;
    pending_.erase(key);
    if (cmd.count(flag) > 0) return;
    try {
      slot = doc_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }

  void finish() const {
    if (!pending_.empty()) throw ConfigError("unknown config key '" + *pending_.begin() + "'");
  }

 private:
  nlohmann::json doc_;
  std::set<std::string> pending_;
  bool loaded_ = false;
};

// Seed precedence: --seed flag, then config file, then EPHYSLAB_SEED, then 0.
std::uint64_t env_seed() {
  const char* s = std::getenv("EPHYSLAB_SEED");
  if (!s || !*s) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (end == s || *end != '\0') throw ConfigError("EPHYSLAB_SEED must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

RealArray random_matrix(std::int64_t r, std::int64_t c, SeededRng& rng) {
  RealArray x({r, c});
  for (auto& v : x.data) v = rng.normal();
  return x;
}

PatchGrid noise_grid(std::int64_t C, std::int64_t N, std::int64_t P, std::uint64_t seed) {
  SeededRng rng(seed);
  RealArray x({C, N * P});
  for (auto& v : x.data) v = 0.3 * rng.normal();
  return emb::patchify(x, synth::scalp_channels(C), P);
}

// ---- preprocess ----

struct PreprocessArgs {
  std::string config;
  std::string input;
  std::string output;
  double highpass = 0.3;
  double notch = 60.0;
};

int cmd_preprocess(const PreprocessArgs& a) {
  require_path(a.input, "--input");
  require_path(a.output, "--output");
  ing::RawRecording rec = ing::read_container(a.input);
  std::fprintf(stderr, "read %lld channels x %lld samples at %.9g Hz from %s\n",
               static_cast<long long>(rec.data.dim(0)), static_cast<long long>(rec.data.dim(1)),
               rec.sample_rate_hz, a.input.c_str());

  ing::PreprocessResult res = ing::preprocess(rec, a.highpass, a.notch);
  fs::create_directories(a.output);

  std::set<std::string> dropped_channels;
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < res.segments.size(); ++i) {
    const auto& seg = res.segments[i];
    for (const auto& name : seg.provenance.dropped_channels) dropped_channels.insert(name);
    char label[32];
    std::snprintf(label, sizeof(label), "segment_%03zu", i);
    const fs::path dir = fs::path(a.output) / label;
    ing::write_segment(dir, seg);
    outputs.push_back(dir.string());
  }
  for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::fprintf(stderr, "kept %zu segments, dropped %lld\n", res.segments.size(),
               static_cast<long long>(res.segments_dropped));

  ordered_json out;
  out["command"] = "preprocess";
  out["input"] = a.input;
  out["output"] = a.output;
  out["highpass_hz"] = a.highpass;
  out["notch_hz"] = a.notch;
  out["segments_kept"] = res.segments.size();
  out["segments_dropped"] = res.segments_dropped;
  out["channels_dropped"] = std::vector<std::string>(dropped_channels.begin(), dropped_channels.end());
  out["outputs"] = outputs;
  out["warnings"] = res.warnings;
  emit(out);
  return 0;
}

// ---- pretrain ----

struct PretrainArgs {
  std::string config;
  std::string input;
  std::string output;
  bool synthetic = false;
  std::int64_t steps = 200;
  std::int64_t d_model = 32;
  std::int64_t layers = 2;
  std::int64_t patch = 50;
  std::int64_t segments = 64;
  std::int64_t channels = 4;
  std::int64_t window_patches = 30;
  double peak_lr = 3e-3;
  double warmup_frac = 0.05;
  std::uint64_t seed = 0;
};

// Crops to a whole number of patches (and, when window_patches > 0, to that
// many leading patches: the training loop never attends beyond a 30-patch
// run, so longer grids only slow down held-out evaluation).
PatchGrid segment_grid(const RealArray& data, const std::vector<ing::ChannelMeta>& channels,
                       std::int64_t patch, std::int64_t window_patches) {
  const std::int64_t c = data.dim(0);
  std::int64_t t = data.dim(1) - data.dim(1) % patch;
  if (window_patches > 0) t = std::min(t, window_patches * patch);
  if (t <= 0) throw DataError("segment shorter than one patch");
  RealArray x({c, t});
  for (std::int64_t ci = 0; ci < c; ++ci)
    for (std::int64_t i = 0; i < t; ++i) x.at(ci, i) = data.at(ci, i);
  return emb::patchify(x, channels, patch);
}

std::vector<ing::CleanSegment> load_segments(const std::string& dir) {
  std::vector<fs::path> paths;
  if (!fs::is_directory(dir)) throw DataError("missing or unreadable " + dir);
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw DataError(dir + ": no segment containers found");

  std::vector<ing::CleanSegment> segs;
  for (const auto& p : paths) {
    ing::RawRecording rec = ing::read_container(p);
    if (rec.sample_rate_hz != 500.0)
      throw DataError(p.string() + ": expected 500 Hz preprocessed segments, got " +
                      std::to_string(rec.sample_rate_hz));
    ing::CleanSegment seg;
    seg.data = std::move(rec.data);
    seg.channels = std::move(rec.channels);
    segs.push_back(std::move(seg));
  }
  return segs;
}

int cmd_pretrain(const PretrainArgs& a) {
  require_path(a.output, "--output");
  if (!a.synthetic && a.input.empty())
    throw ConfigError("either --synthetic or --input is required");
  if (a.steps < 0) throw ConfigError("--steps must be >= 0");
  if (a.segments < 1) throw ConfigError("--segments must be >= 1");
  if (a.channels < 1) throw ConfigError("--channels must be >= 1");

  ModelConfig cfg = ModelConfig::for_patch(a.patch, a.d_model, a.layers);
  cfg.validate();

  std::vector<ing::CleanSegment> segs;
  if (a.synthetic) {
    SeededRng data_rng(a.seed + 1);
    segs = synth::make_dataset(a.segments, a.channels, data_rng);
  } else {
    segs = load_segments(a.input);
  }

  std::vector<PatchGrid> train, test;
  const std::size_t n_test = segs.size() >= 8 ? segs.size() / 8 : (segs.size() >= 2 ? 1 : 0);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    PatchGrid g = segment_grid(segs[i].data, segs[i].channels, a.patch, a.window_patches);
    (i + n_test < segs.size() ? train : test).push_back(std::move(g));
  }
  std::fprintf(stderr, "training on %zu segments, holding out %zu\n", train.size(), test.size());

  ParamStore store(MuPConfig{}, cfg.d_model);
  model::declare_model_params(store, cfg);
  SeededRng init_rng(a.seed);
  store.init(init_rng);
  std::int64_t param_count = 0;
  for (const auto& e : store.entries()) param_count += static_cast<std::int64_t>(e.value.data.size());

  pre::TrainConfig tc;
  tc.optim.peak_lr = a.peak_lr;
  tc.optim.warmup_frac = a.warmup_frac;
  tc.optim.total_steps = std::max<std::int64_t>(1, a.steps);
  tc.steps = a.steps;
  tc.seed = a.seed + 2;
  pre::TrainResult res = pre::train_loop(store, cfg, train, test, tc);

  fs::create_directories(a.output);
  const fs::path trace_path = fs::path(a.output) / "trace.csv";
  ing::write_file_atomic(trace_path, pre::trace_csv(res.trace));
  const fs::path ckpt_dir = fs::path(a.output) / "checkpoint";
  store.save(ckpt_dir, static_cast<std::int64_t>(res.trace.size()));

  ordered_json out;
  out["command"] = "pretrain";
  out["seed"] = a.seed;
  out["d_model"] = a.d_model;
  out["layers"] = a.layers;
  out["patch"] = a.patch;
  out["param_count"] = param_count;
  out["train_segments"] = train.size();
  out["test_segments"] = test.size();
  out["steps_requested"] = a.steps;
  out["steps_run"] = res.trace.size();
  out["initial_loss"] = res.initial_loss;
  out["final_loss"] = res.final_loss;
  out["diverged"] = res.diverged;
  out["trace"] = trace_path.string();
  out["checkpoint"] = ckpt_dir.string();
  emit(out);
  if (res.diverged) {
    std::fprintf(stderr, "aborting: training diverged\n");
    return 1;
  }
  return 0;
}

// ---- verify ----

struct VerifyArgs {
  std::string config;
  std::string output;
  std::uint64_t seed = 0;
  std::int64_t min_checked = 200;
  bool break_rope = false;
};

struct PropertyResult {
  std::string name;
  bool pass = false;
  ordered_json detail;
};

// Finite differences vs reverse-mode gradients on the full tiny model. The
// patch-encoder conv biases are offset from their zero init so the probe runs
// at a generic point of the window normalization instead of the
// maximum-curvature scale it sits at when masked inputs are exactly zero.
PropertyResult check_gradients(std::int64_t patch, std::uint64_t seed, std::int64_t min_checked) {
  PropertyResult r;
  r.name = "grad_check_p" + std::to_string(patch);
  ModelConfig cfg = ModelConfig::for_patch(patch, 32, 2);
  ParamStore s(MuPConfig{}, cfg.d_model);
  model::declare_model_params(s, cfg);
  SeededRng init_rng(seed);
  s.init(init_rng);
  for (const char* n : {"cnn.conv1.b", "cnn.conv2.b", "cnn.conv3.b", "cnn.flatten.b"})
    for (auto& v : s.at(n).value.data) v += 0.25;

  PatchGrid g = noise_grid(3, 4, patch, seed + 1);
  SeededRng mask_rng(seed + 2);
  emb::MaskSet mask = emb::sample_mask(g.C, g.N, cfg.mask_ratio, mask_rng);
  model::Batch b = model::make_batch(g, mask, cfg);
  SeededRng pick_rng(seed + 3);
  pre::GradCheckReport rep = pre::grad_check(s, cfg, b, 1e-3, pick_rng, min_checked);

  r.pass = rep.ok && rep.error.empty() && rep.max_rel_err <= 1e-3;
  r.detail["eps"] = 1e-3;
  r.detail["tolerance"] = 1e-3;
  r.detail["max_rel_err"] = rep.max_rel_err;
  r.detail["checked"] = rep.checked;
  r.detail["grad_norm"] = rep.grad_norm;
  r.detail["worst_param"] = rep.worst_param;
  if (!rep.error.empty()) r.detail["error"] = rep.error;
  return r;
}

// Per-layer mean-|activation| must agree across widths within a factor 2
// after a few optimizer steps; this is what width-transferable learning
// rates look like in practice.
PropertyResult check_coordinates(std::uint64_t seed) {
  PropertyResult r;
  r.name = "coordinate_check";
  PatchGrid g = noise_grid(2, 4, 50, seed + 10);
  pre::CoordCheckResult res = pre::coord_check({32, 64}, 2, 2, g, 1e-2, seed + 11);
  const double ratio = pre::coord_check_worst_ratio(res);
  r.pass = ratio <= 2.0;
  r.detail["widths"] = res.widths;
  r.detail["steps"] = 2;
  r.detail["worst_ratio"] = ratio;
  r.detail["tolerance"] = 2.0;
  return r;
}

// Relabeling the input channels must relabel encoder outputs the same way.
PropertyResult check_permutation(std::uint64_t seed) {
  PropertyResult r;
  r.name = "channel_permutation";
  const std::int64_t d = 64, C = 3, N = 4;
  ModelConfig cfg = ModelConfig::for_patch(500, d, 2);
  ParamStore s(MuPConfig{}, d);
  moirai::declare_register_params(s, d);
  moirai::declare_encoder_params(s, cfg);
  SeededRng init_rng(seed + 20);
  s.init(init_rng);
  SeededRng x_rng(seed + 21);
  RealArray x = random_matrix(C * N, d, x_rng);

  const auto run = [&](const RealArray& tokens) {
    Tape t;
    auto aug = moirai::add_registers(t, s, t.constant(tokens), C, N, nullptr);
    aug.x = moirai::encoder_forward(t, s, cfg, aug.x, aug.layout, false, moirai::Dropout{});
    Var out = moirai::strip_registers(t, aug);
    return out.val();
  };
  RealArray base = run(x);

  SeededRng perm_rng(seed + 22);
  std::vector<std::int64_t> perm = perm_rng.sample_without_replacement(C, C);
  bool identity = true;
  for (std::int64_t c = 0; c < C; ++c) identity = identity && perm[static_cast<std::size_t>(c)] == c;
  if (identity) std::rotate(perm.begin(), perm.begin() + 1, perm.end());

  RealArray px({C * N, d});
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t j = 0; j < d; ++j)
        px.at(c * N + n, j) = x.at(perm[static_cast<std::size_t>(c)] * N + n, j);
  RealArray permuted = run(px);

  double worst = 0.0;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t j = 0; j < d; ++j)
        worst = std::max(worst, std::fabs(permuted.at(c * N + n, j) -
                                          base.at(perm[static_cast<std::size_t>(c)] * N + n, j)));
  r.pass = worst <= 1e-8;
  r.detail["max_abs_dev"] = worst;
  r.detail["tolerance"] = 1e-8;
  r.detail["permutation"] = perm;
  return r;
}

Var run_attention(Tape& t, ParamStore& s, const moirai::TokenLayout& layout, Var x,
                  bool break_rope) {
  auto [same_m, diff_m] = moirai::variate_masks(layout);
  Var same = t.constant(std::move(same_m));
  Var diff = t.constant(std::move(diff_m));
  return moirai::any_variate_attention(t, s, "blk", x, layout, same, diff, 1, 32, 10000.0,
                                       break_rope, nullptr);
}

moirai::TokenLayout grid_layout(std::int64_t C, std::int64_t N) {
  moirai::TokenLayout l;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t n = 0; n < N; ++n) {
      l.variate.push_back(c);
      l.time.push_back(n);
    }
  return l;
}

// Shifting every timestamp by the same offset must leave attention outputs
// unchanged (only relative positions matter). --break-rope mis-rotates the
// query side on purpose; the property then fails, demonstrating the detector.
PropertyResult check_time_translation(std::uint64_t seed, bool break_rope) {
  PropertyResult r;
  r.name = "rope_time_translation";
  const std::int64_t d = 32;
  ParamStore s(MuPConfig{}, d);
  moirai::declare_block_params(s, "blk", d, 1, d);
  SeededRng init_rng(seed + 30);
  s.init(init_rng);

  moirai::TokenLayout layout = grid_layout(2, 4);
  SeededRng x_rng(seed + 31);
  RealArray x = random_matrix(8, d, x_rng);
  Tape t1;
  Var a = run_attention(t1, s, layout, t1.constant(x), break_rope);

  moirai::TokenLayout shifted = layout;
  for (auto& tt : shifted.time) tt += 11;
  Tape t2;
  Var b = run_attention(t2, s, shifted, t2.constant(x), break_rope);

  const double diff = max_abs_diff(a.val(), b.val());
  r.pass = diff <= 1e-10;
  r.detail["max_abs_diff"] = diff;
  r.detail["tolerance"] = 1e-10;
  r.detail["time_shift"] = 11;
  r.detail["break_rope"] = break_rope;
  return r;
}

// Adding the same constant to both variate-indicator scalars shifts every
// attention energy equally, so the row softmax — and the output — must not move.
PropertyResult check_indicator_shift(std::uint64_t seed) {
  PropertyResult r;
  r.name = "softmax_shift_invariance";
  const std::int64_t d = 32;
  ParamStore s(MuPConfig{}, d);
  moirai::declare_block_params(s, "blk", d, 1, d);
  SeededRng init_rng(seed + 40);
  s.init(init_rng);
  s.at("blk.attn.h0.u1").value.data[0] = 0.3;
  s.at("blk.attn.h0.u2").value.data[0] = -0.6;

  moirai::TokenLayout layout = grid_layout(2, 3);
  SeededRng x_rng(seed + 41);
  RealArray x = random_matrix(6, d, x_rng);
  Tape t1;
  Var a = run_attention(t1, s, layout, t1.constant(x), false);
  s.at("blk.attn.h0.u1").value.data[0] += 1.7;
  s.at("blk.attn.h0.u2").value.data[0] += 1.7;
  Tape t2;
  Var b = run_attention(t2, s, layout, t2.constant(x), false);

  const double diff = max_abs_diff(a.val(), b.val());
  r.pass = diff <= 1e-10;
  r.detail["max_abs_diff"] = diff;
  r.detail["tolerance"] = 1e-10;
  r.detail["shift"] = 1.7;
  return r;
}

int cmd_verify(const VerifyArgs& a) {
  std::vector<PropertyResult> props;
  props.push_back(check_gradients(500, a.seed, a.min_checked));
  props.push_back(check_gradients(50, a.seed, a.min_checked));
  props.push_back(check_coordinates(a.seed));
  props.push_back(check_permutation(a.seed));
  props.push_back(check_time_translation(a.seed, a.break_rope));
  props.push_back(check_indicator_shift(a.seed));

  bool all_pass = true;
  std::vector<std::string> failed;
  ordered_json plist = ordered_json::array();
  for (const auto& p : props) {
    ordered_json pj;
    pj["name"] = p.name;
    pj["pass"] = p.pass;
    pj["detail"] = p.detail;
    plist.push_back(pj);
    all_pass = all_pass && p.pass;
    if (!p.pass) failed.push_back(p.name);
    std::fprintf(stderr, "%-26s %s\n", p.name.c_str(), p.pass ? "pass" : "FAIL");
  }

  ordered_json out;
  out["command"] = "verify";
  out["seed"] = a.seed;
  out["break_rope"] = a.break_rope;
  out["properties"] = plist;
  out["failed"] = failed;
  out["all_pass"] = all_pass;
  if (!a.output.empty()) ing::write_file_atomic(a.output, out.dump(2) + "\n");
  emit(out);
  if (!all_pass) {
    for (const auto& name : failed) std::fprintf(stderr, "property failed: %s\n", name.c_str());
    return 1;
  }
  return 0;
}

// ---- fit ----

struct FitArgs {
  std::string config;
  std::string observations;
  std::string output;
};

int cmd_fit(const FitArgs& a) {
  require_path(a.observations, "--observations");
  std::ifstream in(a.observations);
  if (!in) throw DataError("missing or unreadable " + a.observations);
  std::vector<lab::ScalingObservation> obs = lab::observations_from_csv(in);
  std::fprintf(stderr, "fitting %zu observations from %s\n", obs.size(), a.observations.c_str());

  lab::FitReport rep = lab::fit_law_report(obs);
  ordered_json j = lab::fit_report_json(rep);
  std::fprintf(stderr, "alpha %.6g  beta %.6g  r2_log %.6g\n", rep.law.alpha, rep.law.beta,
               rep.law.r2_log);
  if (!a.output.empty()) ing::write_file_atomic(a.output, j.dump(2) + "\n");
  emit(j);
  return 0;
}

// ---- frontier ----

struct FrontierArgs {
  std::string config;
  std::string law;
  std::string output = ".";
  std::vector<double> params_axis = {13.03e6, 51.36e6, 115.00e6, 203.95e6, 812.85e6, 1.83e9};
  std::vector<double> epoch_axis = {1, 2, 4, 8, 16, 32, 64};
  double unique_tokens = 343699200.0;
  double budget_min = 1e17;
  double budget_max = 3e20;
  std::int64_t budgets_per_decade = 4;
  double flops_per_param_token = 6.0;
};

lab::FittedLaw law_from_file(const fs::path& path) {
  const nlohmann::json j = parse_json_file(path);
  lab::FittedLaw law;
  const auto get = [&](const char* key) {
    if (!j.contains(key))
      throw DataError("law file " + path.string() + " is missing key '" + key + "'");
    if (!j.at(key).is_number())
      throw DataError("law file " + path.string() + ": key '" + key + "' must be a number");
    return j.at(key).get<double>();
  };
  law.a = get("a");
  law.b = get("b");
  law.e = get("e");
  law.alpha = get("alpha");
  law.beta = get("beta");
  law.r_d_star = get("r_d_star");
  law.r_n_star = get("r_n_star");
  law.validate();
  return law;
}

int cmd_frontier(const FrontierArgs& a) {
  require_path(a.law, "--law");
  if (a.budgets_per_decade < 1) throw ConfigError("--budgets-per-decade must be >= 1");
  if (!(a.budget_min > 0.0) || !(a.budget_max >= a.budget_min))
    throw ConfigError("budgets must satisfy 0 < min <= max");
  lab::FittedLaw law = law_from_file(a.law);

  lab::ComputeGrid grid =
      lab::isoloss_grid(law, a.unique_tokens, a.params_axis, a.epoch_axis, a.flops_per_param_token);

  std::vector<double> budgets;
  const double step = std::pow(10.0, 1.0 / static_cast<double>(a.budgets_per_decade));
  for (double b = a.budget_min; b <= a.budget_max * (1.0 + 1e-12); b *= step) budgets.push_back(b);
  std::vector<lab::FrontierPoint> frontier = lab::compute_frontier(grid, budgets);

  fs::create_directories(a.output);
  const fs::path contour_path = fs::path(a.output) / "contour.csv";
  const fs::path frontier_path = fs::path(a.output) / "frontier.csv";
  ing::write_file_atomic(contour_path, lab::contour_csv(grid));
  ing::write_file_atomic(frontier_path, lab::frontier_csv(frontier));
  std::fprintf(stderr, "wrote %zu contour cells and %zu frontier rows\n", grid.cells.size(),
               frontier.size());

  ordered_json out;
  out["command"] = "frontier";
  out["law"] = {{"a", law.a},         {"b", law.b},          {"e", law.e},
                {"alpha", law.alpha}, {"beta", law.beta},    {"r_d_star", law.r_d_star},
                {"r_n_star", law.r_n_star}};
  out["unique_tokens"] = a.unique_tokens;
  out["cells"] = grid.cells.size();
  out["budgets"] = budgets.size();
  out["contour"] = contour_path.string();
  out["frontier"] = frontier_path.string();
  emit(out);
  return 0;
}

// ---- report ----

struct ReportArgs {
  std::string config;
  std::string models;
  std::string output;
  double reference_channel_hours = 352035.0;
};

int cmd_report(const ReportArgs& a) {
  require_path(a.models, "--models");
  if (!(a.reference_channel_hours > 0.0))
    throw ConfigError("--reference-channel-hours must be > 0");
  const nlohmann::json doc = parse_json_file(a.models);
  if (!doc.is_array()) throw DataError(a.models + ": model list must be a JSON array");

  ordered_json rows = ordered_json::array();
  std::string csv = "name,channel_hours,epochs,scaled_epochs\n";
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& m = doc[i];
    if (!m.is_object() || !m.contains("name") || !m.contains("channel_hours") ||
        !m.contains("epochs"))
      throw DataError(a.models + ": entry " + std::to_string(i) +
                      " needs keys name, channel_hours, epochs");
    const std::string name = m.at("name").get<std::string>();
    const double ch = m.at("channel_hours").get<double>();
    const double ep = m.at("epochs").get<double>();
    const double scaled = lab::scaled_epochs(ch, ep, a.reference_channel_hours);
    ordered_json row;
    row["name"] = name;
    row["channel_hours"] = ch;
    row["epochs"] = ep;
    row["scaled_epochs"] = scaled;
    rows.push_back(row);
    csv += name + "," + lab::detail::g9(ch) + "," + lab::detail::g9(ep) + "," +
           lab::detail::g9(scaled) + "\n";
  }
  if (!a.output.empty()) ing::write_file_atomic(a.output, csv);

  ordered_json out;
  out["command"] = "report";
  out["reference_channel_hours"] = a.reference_channel_hours;
  out["rows"] = rows;
  if (!a.output.empty()) out["csv"] = a.output;
  emit(out);
  return 0;
}

}  // namespace

// ---- entry point ----

int main(int argc, char** argv) {
  CLI::App app{"electrophysiology pretraining and scaling-law workbench"};
  app.require_subcommand(1);

  PreprocessArgs pa;
  CLI::App* pp = app.add_subcommand("preprocess",
                                    "filter, resample, window, and quality-screen a raw container");
  pp->add_option("--config", pa.config, "JSON run config; flags override file values");
  pp->add_option("--input", pa.input, "raw container directory");
  pp->add_option("--output", pa.output, "directory for cleaned segment containers");
  pp->add_option("--highpass", pa.highpass, "high-pass cutoff in Hz");
  pp->add_option("--notch", pa.notch, "mains notch frequency in Hz");

  PretrainArgs ta;
  CLI::App* tp = app.add_subcommand("pretrain", "run masked-reconstruction pretraining");
  tp->add_option("--config", ta.config, "JSON run config; flags override file values");
  tp->add_option("--input", ta.input, "directory of preprocessed segment containers");
  tp->add_flag("--synthetic", ta.synthetic, "train on generated synthetic segments");
  tp->add_option("--output", ta.output, "directory for trace.csv and checkpoint/");
  tp->add_option("--steps", ta.steps, "optimizer steps (0 writes the init checkpoint)");
  tp->add_option("--d-model", ta.d_model, "model width (multiple of 32)");
  tp->add_option("--layers", ta.layers, "encoder depth");
  tp->add_option("--patch", ta.patch, "patch length in samples (500 or 50)");
  tp->add_option("--segments", ta.segments, "synthetic segment count");
  tp->add_option("--channels", ta.channels, "synthetic channel count");
  tp->add_option("--window-patches", ta.window_patches,
                 "crop each segment to this many leading patches (0 = full)");
  tp->add_option("--peak-lr", ta.peak_lr, "peak learning rate");
  tp->add_option("--warmup-frac", ta.warmup_frac, "warmup fraction of total steps");
  tp->add_option("--seed", ta.seed, "run seed (default: EPHYSLAB_SEED or 0)");

  VerifyArgs va;
  CLI::App* vp = app.add_subcommand("verify", "run the model property-verification suite");
  vp->add_option("--config", va.config, "JSON run config; flags override file values");
  vp->add_option("--output", va.output, "also write the JSON report to this file");
  vp->add_option("--seed", va.seed, "run seed (default: EPHYSLAB_SEED or 0)");
  vp->add_option("--min-checked", va.min_checked, "minimum finite-difference probes per model");
  vp->add_flag("--break-rope", va.break_rope,
               "mis-rotate attention queries; the time-translation property must then fail");

  FitArgs fa;
  CLI::App* fp = app.add_subcommand("fit", "fit a data-constrained scaling law to observations");
  fp->add_option("--config", fa.config, "JSON run config; flags override file values");
  fp->add_option("--observations", fa.observations, "CSV of params,unique_tokens,epochs,loss");
  fp->add_option("--output", fa.output, "also write the JSON fit report to this file");

  FrontierArgs ra;
  CLI::App* rp = app.add_subcommand("frontier", "emit loss-contour and compute-frontier tables");
  rp->add_option("--config", ra.config, "JSON run config; flags override file values");
  rp->add_option("--law", ra.law, "JSON file with keys a,b,e,alpha,beta,r_d_star,r_n_star");
  rp->add_option("--output", ra.output, "directory for contour.csv and frontier.csv");
  rp->add_option("--params-axis", ra.params_axis, "model sizes for the grid")->delimiter(',');
  rp->add_option("--epoch-axis", ra.epoch_axis, "epoch counts for the grid")->delimiter(',');
  rp->add_option("--unique-tokens", ra.unique_tokens, "unique training tokens available");
  rp->add_option("--budget-min", ra.budget_min, "smallest FLOPs budget");
  rp->add_option("--budget-max", ra.budget_max, "largest FLOPs budget");
  rp->add_option("--budgets-per-decade", ra.budgets_per_decade, "log-spaced budgets per decade");
  rp->add_option("--flops-per-param-token", ra.flops_per_param_token,
                 "FLOPs per parameter per token");

  ReportArgs ga;
  CLI::App* gp = app.add_subcommand("report", "tabulate data-scale-adjusted epochs for models");
  gp->add_option("--config", ga.config, "JSON run config; flags override file values");
  gp->add_option("--models", ga.models, "JSON array of {name, channel_hours, epochs}");
  gp->add_option("--output", ga.output, "also write the table as CSV to this file");
  gp->add_option("--reference-channel-hours", ga.reference_channel_hours,
                 "corpus size the epochs are rescaled to");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    const std::uint64_t seed0 = env_seed();
    if (app.got_subcommand(pp)) {
      FileConfig fc;
      if (!pa.config.empty()) fc.load(pa.config);
      fc.apply(*pp, "--input", "input", pa.input);
      fc.apply(*pp, "--output", "output", pa.output);
      fc.apply(*pp, "--highpass", "highpass", pa.highpass);
      fc.apply(*pp, "--notch", "notch", pa.notch);
      fc.finish();
      return cmd_preprocess(pa);
    }
    if (app.got_subcommand(tp)) {
      if (tp->count("--seed") == 0) ta.seed = seed0;
      FileConfig fc;
      if (!ta.config.empty()) fc.load(ta.config);
      fc.apply(*tp, "--input", "input", ta.input);
      fc.apply(*tp, "--synthetic", "synthetic", ta.synthetic);
      fc.apply(*tp, "--output", "output", ta.output);
      fc.apply(*tp, "--steps", "steps", ta.steps);
      fc.apply(*tp, "--d-model", "d_model", ta.d_model);
      fc.apply(*tp, "--layers", "layers", ta.layers);
      fc.apply(*tp, "--patch", "patch", ta.patch);
      fc.apply(*tp, "--segments", "segments", ta.segments);
      fc.apply(*tp, "--channels", "channels", ta.channels);
      fc.apply(*tp, "--window-patches", "window_patches", ta.window_patches);
      fc.apply(*tp, "--peak-lr", "peak_lr", ta.peak_lr);
      fc.apply(*tp, "--warmup-frac", "warmup_frac", ta.warmup_frac);
      fc.apply(*tp, "--seed", "seed", ta.seed);
      fc.finish();
      return cmd_pretrain(ta);
    }
    if (app.got_subcommand(vp)) {
      if (vp->count("--seed") == 0) va.seed = seed0;
      FileConfig fc;
      if (!va.config.empty()) fc.load(va.config);
      fc.apply(*vp, "--output", "output", va.output);
      fc.apply(*vp, "--seed", "seed", va.seed);
      fc.apply(*vp, "--min-checked", "min_checked", va.min_checked);
      fc.apply(*vp, "--break-rope", "break_rope", va.break_rope);
      fc.finish();
      return cmd_verify(va);
    }
    if (app.got_subcommand(fp)) {
      FileConfig fc;
      if (!fa.config.empty()) fc.load(fa.config);
      fc.apply(*fp, "--observations", "observations", fa.observations);
      fc.apply(*fp, "--output", "output", fa.output);
      fc.finish();
      return cmd_fit(fa);
    }
    if (app.got_subcommand(rp)) {
      FileConfig fc;
      if (!ra.config.empty()) fc.load(ra.config);
      fc.apply(*rp, "--law", "law", ra.law);
      fc.apply(*rp, "--output", "output", ra.output);
      fc.apply(*rp, "--params-axis", "params_axis", ra.params_axis);
      fc.apply(*rp, "--epoch-axis", "epoch_axis", ra.epoch_axis);
      fc.apply(*rp, "--unique-tokens", "unique_tokens", ra.unique_tokens);
      fc.apply(*rp, "--budget-min", "budget_min", ra.budget_min);
      fc.apply(*rp, "--budget-max", "budget_max", ra.budget_max);
      fc.apply(*rp, "--budgets-per-decade", "budgets_per_decade", ra.budgets_per_decade);
      fc.apply(*rp, "--flops-per-param-token", "flops_per_param_token", ra.flops_per_param_token);
      fc.finish();
      return cmd_frontier(ra);
    }
    if (app.got_subcommand(gp)) {
      FileConfig fc;
      if (!ga.config.empty()) fc.load(ga.config);
      fc.apply(*gp, "--models", "models", ga.models);
      fc.apply(*gp, "--output", "output", ga.output);
      fc.apply(*gp, "--reference-channel-hours", "reference_channel_hours",
               ga.reference_channel_hours);
      fc.finish();
      return cmd_report(ga);
    }
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
