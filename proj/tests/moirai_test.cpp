#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ephyslab/config.hpp"
#include "ephyslab/moirai.hpp"
#include "ephyslab/ndcore.hpp"
#include "ephyslab/params.hpp"

using ephyslab::autodiff::Tape;
using ephyslab::autodiff::Var;
using ephyslab::config::ModelConfig;
using ephyslab::ndcore::RealArray;
using ephyslab::ndcore::SeededRng;
using ephyslab::params::MuPConfig;
using ephyslab::params::ParamClass;
using ephyslab::params::ParamStore;

namespace moirai = ephyslab::moirai;

namespace {

moirai::TokenLayout grid_layout(std::int64_t C, std::int64_t N) {
  moirai::TokenLayout l;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t n = 0; n < N; ++n) {
      l.variate.push_back(c);
      l.time.push_back(n);
    }
  return l;
}

RealArray random_matrix(std::int64_t r, std::int64_t c, SeededRng& rng, double scale = 1.0) {
  RealArray x({r, c});
  for (auto& v : x.data) v = scale * rng.normal();
  return x;
}

using ephyslab::ndcore::max_abs_diff;

Var run_attention(Tape& t, ParamStore& s, const moirai::TokenLayout& layout, Var x,
                  std::int64_t heads, std::int64_t head_dim, bool break_rope = false) {
  auto [same_m, diff_m] = moirai::variate_masks(layout);
  Var same = t.constant(std::move(same_m));
  Var diff = t.constant(std::move(diff_m));
  return moirai::any_variate_attention(t, s, "blk", x, layout, same, diff, heads, head_dim,
                                       10000.0, break_rope, nullptr);
}

}  // namespace

TEST(AttentionTest, ChannelIndicatorScalarSetsMixingWeights) {
  // two tokens on different channels at time zero, zero query/key weights:
  // energies reduce to the indicator scalars. With the self term ln 3 the
  // row softmax is 3/4 self, 1/4 cross.
  const std::int64_t d = 32;
  ParamStore s(MuPConfig{}, 32);
  moirai::declare_block_params(s, "blk", d, 1, d);
  auto& wv = s.at("blk.attn.h0.wv").value;
  auto& wo = s.at("blk.attn.h0.wo").value;
  for (std::int64_t i = 0; i < d; ++i) {
    wv.at(i, i) = 1.0;
    wo.at(i, i) = 1.0;
  }
  s.at("blk.attn.h0.u1").value.data[0] = std::log(3.0);

  RealArray x({2, d});
  x.at(0, 0) = 1.0;
  x.at(1, 1) = 1.0;
  moirai::TokenLayout layout;
  layout.variate = {0, 1};
  layout.time = {0, 0};
  Tape t;
  Var out = run_attention(t, s, layout, t.constant(x), 1, d);
  EXPECT_NEAR(out.val().at(0, 0), 0.75, 1e-12);
  EXPECT_NEAR(out.val().at(0, 1), 0.25, 1e-12);
  EXPECT_NEAR(out.val().at(1, 0), 0.25, 1e-12);
  EXPECT_NEAR(out.val().at(1, 1), 0.75, 1e-12);
}

TEST(AttentionTest, SharedShiftOfBothIndicatorsIsInvariant) {
  const std::int64_t d = 32;
  ParamStore s(MuPConfig{}, 32);
  moirai::declare_block_params(s, "blk", d, 1, d);
  SeededRng rng(21);
  s.init(rng);
  s.at("blk.attn.h0.u1").value.data[0] = 0.3;
  s.at("blk.attn.h0.u2").value.data[0] = -0.6;

  auto layout = grid_layout(2, 3);
  SeededRng xr(22);
  RealArray x = random_matrix(6, d, xr);
  Tape t1;
  Var a = run_attention(t1, s, layout, t1.constant(x), 1, d);
  s.at("blk.attn.h0.u1").value.data[0] += 1.7;
  s.at("blk.attn.h0.u2").value.data[0] += 1.7;
  Tape t2;
  Var b = run_attention(t2, s, layout, t2.constant(x), 1, d);
  EXPECT_LE(max_abs_diff(a.val(), b.val()), 1e-10);
}

TEST(AttentionTest, TimeTranslationIsInvariantAndMisRotationBreaksIt) {
  const std::int64_t d = 32;
  ParamStore s(MuPConfig{}, 32);
  moirai::declare_block_params(s, "blk", d, 1, d);
  SeededRng rng(23);
  s.init(rng);

  auto layout = grid_layout(2, 4);
  SeededRng xr(24);
  RealArray x = random_matrix(8, d, xr);
  Tape t1;
  Var a = run_attention(t1, s, layout, t1.constant(x), 1, d);

  auto shifted = layout;
  for (auto& tt : shifted.time) tt += 11;
  Tape t2;
  Var b = run_attention(t2, s, shifted, t2.constant(x), 1, d);
  EXPECT_LE(max_abs_diff(a.val(), b.val()), 1e-10);

  // query-side mis-rotation destroys the relative-offset property
  Tape t3;
  Var c = run_attention(t3, s, layout, t3.constant(x), 1, d, true);
  Tape t4;
  Var e = run_attention(t4, s, shifted, t4.constant(x), 1, d, true);
  EXPECT_GT(max_abs_diff(c.val(), e.val()), 1e-4);
}

TEST(BlockTest, ZeroWeightsGiveExactIdentity) {
  const std::int64_t d = 64;
  ModelConfig cfg = ModelConfig::for_patch(500, d, 3);
  ParamStore s(MuPConfig{}, d);
  moirai::declare_encoder_params(s, cfg);  // values stay zero, norm gains one
  SeededRng xr(25);
  RealArray x = random_matrix(10, d, xr);
  auto layout = grid_layout(2, 5);
  Tape t;
  Var out = moirai::encoder_forward(t, s, cfg, t.constant(x), layout, false, moirai::Dropout{});
  EXPECT_EQ(out.val().data, x.data);
}

TEST(BlockTest, FeedForwardMatchesHandComputedGatedUnit) {
  const std::int64_t d = 32;
  ParamStore s(MuPConfig{}, 32);
  moirai::declare_block_params(s, "blk", d, 1, d);
  SeededRng rng(26);
  s.init(rng);
  SeededRng xr(27);
  RealArray x = random_matrix(1, d, xr);
  Tape t;
  Var y = moirai::glu_ffn(t, s, "blk", t.constant(x), nullptr);
  ASSERT_EQ(y.dim(1), d);

  const auto& wg = s.at("blk.ffn.gate.w").value;
  const auto& wu = s.at("blk.ffn.up.w").value;
  const auto& wd = s.at("blk.ffn.down.w").value;
  std::vector<double> hidden(static_cast<std::size_t>(2 * d));
  for (std::int64_t h = 0; h < 2 * d; ++h) {
    double g = 0.0, u = 0.0;
    for (std::int64_t i = 0; i < d; ++i) {
      g += x.at(0, i) * wg.at(i, h);
      u += x.at(0, i) * wu.at(i, h);
    }
    const double sg = g / (1.0 + std::exp(-g));
    hidden[static_cast<std::size_t>(h)] = sg * u;
  }
  for (std::int64_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (std::int64_t h = 0; h < 2 * d; ++h)
      acc += hidden[static_cast<std::size_t>(h)] * wd.at(h, j);
    EXPECT_NEAR(y.val().at(0, j), acc, 1e-12);
  }
}

TEST(RegisterTest, AugmentationPlacesRowsAndRoundTrips) {
  const std::int64_t d = 64, C = 3, N = 4;
  ParamStore s(MuPConfig{}, d);
  moirai::declare_register_params(s, d);
  SeededRng rng(28);
  s.init(rng);
  SeededRng xr(29);
  RealArray x = random_matrix(C * N, d, xr);
  Tape t;
  auto aug = moirai::add_registers(t, s, t.constant(x), C, N, nullptr);
  ASSERT_EQ(aug.x.dim(0), (C + 1) * (N + 1));

  const auto& tr = s.at("reg.temporal").value;
  const auto& cr = s.at("reg.channel").value;
  const auto& co = s.at("reg.corner").value;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t j = 0; j < d; ++j)
        EXPECT_DOUBLE_EQ(aug.x.val().at(c * (N + 1) + n, j), x.at(c * N + n, j));
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t j = 0; j < d; ++j)
      EXPECT_DOUBLE_EQ(aug.x.val().at(C * (N + 1) + n, j), tr.at(0, j));
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t j = 0; j < d; ++j)
      EXPECT_DOUBLE_EQ(aug.x.val().at(c * (N + 1) + N, j), cr.at(0, j));
  for (std::int64_t j = 0; j < d; ++j)
    EXPECT_DOUBLE_EQ(aug.x.val().at((C + 1) * (N + 1) - 1, j), co.at(0, j));

  // layout: the register row is channel C, the register column is time N
  EXPECT_EQ(aug.layout.variate[static_cast<std::size_t>(C * (N + 1))], C);
  EXPECT_EQ(aug.layout.time[static_cast<std::size_t>(N)], N);

  Var back = moirai::strip_registers(t, aug);
  EXPECT_EQ(back.val().data, x.data);
}

TEST(EncoderTest, ChannelPermutationPermutesOutputs) {
  const std::int64_t d = 64, C = 3, N = 4;
  ModelConfig cfg = ModelConfig::for_patch(500, d, 2);
  ParamStore s(MuPConfig{}, d);
  moirai::declare_register_params(s, d);
  moirai::declare_encoder_params(s, cfg);
  SeededRng rng(30);
  s.init(rng);
  SeededRng xr(31);
  RealArray x = random_matrix(C * N, d, xr);

  const auto run = [&](const RealArray& tokens) {
    Tape t;
    auto aug = moirai::add_registers(t, s, t.constant(tokens), C, N, nullptr);
    aug.x = moirai::encoder_forward(t, s, cfg, aug.x, aug.layout, false, moirai::Dropout{});
    Var out = moirai::strip_registers(t, aug);
    return out.val();
  };
  RealArray base = run(x);

  const std::vector<std::int64_t> perm = {1, 2, 0};
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
        worst = std::max(worst,
                         std::fabs(permuted.at(c * N + n, j) -
                                   base.at(perm[static_cast<std::size_t>(c)] * N + n, j)));
  EXPECT_LE(worst, 1e-8);
}

TEST(EncoderTest, TapsExposeEveryBlock) {
  const std::int64_t d = 32;
  ModelConfig cfg = ModelConfig::for_patch(500, d, 4);
  ParamStore s(MuPConfig{}, d);
  moirai::declare_encoder_params(s, cfg);
  SeededRng rng(32);
  s.init(rng);
  SeededRng xr(33);
  RealArray x = random_matrix(6, d, xr);
  auto layout = grid_layout(2, 3);
  Tape t;
  std::vector<Var> taps;
  Var out = moirai::encoder_forward(t, s, cfg, t.constant(x), layout, false, moirai::Dropout{},
                                    &taps);
  ASSERT_EQ(taps.size(), 4u);
  EXPECT_EQ(taps.back().val().data, out.val().data);
  for (const auto& tap : taps) EXPECT_TRUE(tap.val().all_finite());
}

TEST(DropoutTest, TrainModeScalesByKeepProbabilityAndEvalIsIdentity) {
  SeededRng rng(34);
  moirai::Dropout drop{0.5, &rng};
  RealArray x({1, 10000});
  for (auto& v : x.data) v = 1.0;
  Tape t;
  Var y = drop.apply(t, t.constant(x));
  double sum = 0.0;
  std::int64_t zeros = 0;
  for (double v : y.val().data) {
    sum += v;
    if (v == 0.0) ++zeros;
    else EXPECT_DOUBLE_EQ(v, 2.0);  // 1 / keep probability
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 10000.0, 0.5, 0.03);
  EXPECT_NEAR(sum / 10000.0, 1.0, 0.06);

  moirai::Dropout off{};
  Tape t2;
  Var z = off.apply(t2, t2.constant(x));
  EXPECT_EQ(z.val().data, x.data);
}
