#include "ephyslab/ingest.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

using namespace ephyslab;
using namespace ephyslab::ingest;
using ndcore::RealArray;

namespace {

RawRecording make_rec(std::int64_t c, double fs, double seconds,
                      const std::function<double(std::int64_t, double)>& f,
                      ModalityType modality = ModalityType::EEG) {
  RawRecording rec;
  rec.sample_rate_hz = fs;
  const std::int64_t t = static_cast<std::int64_t>(std::llround(seconds * fs));
  rec.data = RealArray({c, t});
  for (std::int64_t i = 0; i < c; ++i) {
    ChannelMeta m;
    m.name = "ch" + std::to_string(i);
    m.modality_type = modality;
    m.subtype = modality == ModalityType::EEG ? Subtype::scalp : Subtype::depth;
    rec.channels.push_back(m);
    for (std::int64_t j = 0; j < t; ++j)
      rec.data.at(i, j) = f(i, static_cast<double>(j) / fs);
  }
  return rec;
}

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

std::filesystem::path temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("ephyslab_test_" + tag);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

// ---- normalize_clip ----

TEST(NormalizeClip, EegConstantHalfScale) {
  auto rec = make_rec(1, 500.0, 1.0, [](std::int64_t, double) { return 50.0; });
  auto r = normalize_clip(rec);
  for (double v : r.data.data) EXPECT_DOUBLE_EQ(v, 0.5);
  EXPECT_DOUBLE_EQ(r.clip_fractions.at(0), 0.0);
}

TEST(NormalizeClip, IeegConstantDoubleScaleClipsEverything) {
  auto rec = make_rec(1, 500.0, 1.0, [](std::int64_t, double) { return 400.0; },
                      ModalityType::iEEG);
  auto r = normalize_clip(rec);
  for (double v : r.data.data) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_DOUBLE_EQ(r.clip_fractions.at(0), 1.0);
}

TEST(NormalizeClip, PartialClippingCountedExactly) {
  RawRecording rec;
  rec.sample_rate_hz = 500.0;
  rec.channels.push_back({"c0", ModalityType::EEG, Subtype::scalp, std::nullopt});
  const std::int64_t t = 1000;
  rec.data = RealArray({1, t});
  for (std::int64_t j = 0; j < t; ++j) rec.data.at(0, j) = (j < 50) ? 150.0 : 10.0;
  auto r = normalize_clip(rec);
  EXPECT_DOUBLE_EQ(r.clip_fractions.at(0), 0.05);
  EXPECT_DOUBLE_EQ(r.data.at(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.data.at(0, 999), 0.1);
}

TEST(NormalizeClip, ExactlyFullScaleDoesNotCountAsClipped) {
  auto rec = make_rec(1, 500.0, 1.0, [](std::int64_t, double) { return 100.0; });
  auto r = normalize_clip(rec);
  EXPECT_DOUBLE_EQ(r.clip_fractions.at(0), 0.0);
}

// ---- qaqc_decide ----

TEST(QaqcDecide, AllCleanKeepsEverything) {
  RealArray f({8});
  auto d = qaqc_decide(f);
  EXPECT_TRUE(d.dropped_channels.empty());
  EXPECT_FALSE(d.drop_segment);
}

TEST(QaqcDecide, SingleBadChannelDroppedSegmentKept) {
  RealArray f({32});
  f.at(3) = 0.05;
  auto d = qaqc_decide(f);
  EXPECT_EQ(d.dropped_channels, (std::set<std::int64_t>{3}));
  EXPECT_FALSE(d.drop_segment);
}

TEST(QaqcDecide, MajorityBadDropsSegment) {
  RealArray f({32});
  for (std::int64_t i = 0; i < 17; ++i) f.at(i) = 0.05;
  auto d = qaqc_decide(f);
  EXPECT_EQ(d.dropped_channels.size(), 17u);
  EXPECT_TRUE(d.drop_segment);
}

TEST(QaqcDecide, ThresholdsAreStrict) {
  RealArray f({32});
  f.at(0) = kChannelClipThreshold;  // not above -> kept
  auto d = qaqc_decide(f);
  EXPECT_TRUE(d.dropped_channels.empty());

  RealArray g({32});
  for (std::int64_t i = 0; i < 16; ++i) g.at(i) = 1.0;  // exactly half -> segment kept
  auto e = qaqc_decide(g);
  EXPECT_EQ(e.dropped_channels.size(), 16u);
  EXPECT_FALSE(e.drop_segment);
}

TEST(QaqcDecide, MonotoneInClipFractions) {
  ndcore::SeededRng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    RealArray f({16});
    for (auto& v : f.data) v = rng.uniform01() * 0.08;
    auto base = qaqc_decide(f);
    RealArray g = f;
    const auto bump = rng.uniform_int(16);
    g.at(bump) = std::min(1.0, g.at(bump) + rng.uniform01());
    auto raised = qaqc_decide(g);
    for (auto idx : base.dropped_channels) EXPECT_TRUE(raised.dropped_channels.count(idx));
  }
}

// ---- preprocess ----

TEST(Preprocess, NinetySecondsMakesThreeSegments) {
  auto rec = make_rec(2, 1000.0, 90.0, [](std::int64_t ch, double t) {
    return 30.0 * std::sin(2.0 * M_PI * 7.0 * t + static_cast<double>(ch));
  });
  auto out = preprocess(rec, 0.3);
  ASSERT_EQ(out.segments.size(), 3u);
  for (const auto& seg : out.segments) {
    EXPECT_EQ(seg.data.shape, (std::vector<std::int64_t>{2, 15000}));
    EXPECT_EQ(seg.channels.size(), 2u);
    for (double v : seg.data.data) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(out.segments_dropped, 0);
}

TEST(Preprocess, NotchKillsSixtyHz) {
  auto rec = make_rec(1, 500.0, 60.0, [](std::int64_t, double t) {
    return 60.0 * std::sin(2.0 * M_PI * 60.0 * t);
  });
  const double input_rms = 60.0 / kEegScaleUv / std::sqrt(2.0);
  auto out = preprocess(rec, 0.3);
  ASSERT_EQ(out.segments.size(), 2u);
  std::vector<double> all;
  for (const auto& seg : out.segments)
    all.insert(all.end(), seg.data.data.begin(), seg.data.data.end());
  EXPECT_LT(rms(all), 0.05 * input_rms);
  // away from the zero-phase edge transients the tone is gone entirely
  std::vector<double> mid(out.segments[0].data.data.begin() + 2500,
                          out.segments[0].data.data.begin() + 12500);
  EXPECT_LT(rms(mid), 0.001 * input_rms);
}

TEST(Preprocess, HighPassRemovesDcOffset) {
  auto rec = make_rec(1, 500.0, 90.0, [](std::int64_t, double) { return 20.0; });
  auto out = preprocess(rec, 0.3);
  ASSERT_EQ(out.segments.size(), 3u);
  const double offset_norm = 20.0 / kEegScaleUv;
  for (const auto& seg : out.segments) {
    for (std::int64_t j = 5000; j < 10000; ++j)
      EXPECT_LT(std::abs(seg.data.at(0, j)), 0.01 * offset_norm);
  }
}

TEST(Preprocess, ShortRecordingYieldsWarningOnly) {
  auto rec = make_rec(1, 500.0, 20.0, [](std::int64_t, double) { return 1.0; });
  auto out = preprocess(rec, 0.3);
  EXPECT_TRUE(out.segments.empty());
  ASSERT_EQ(out.warnings.size(), 1u);
}

TEST(Preprocess, SegmentCountIsFloorOfDuration) {
  auto rec = make_rec(1, 500.0, 75.0, [](std::int64_t, double t) {
    return 10.0 * std::sin(2.0 * M_PI * 3.0 * t);
  });
  auto out = preprocess(rec, 0.3);
  EXPECT_EQ(out.segments.size(), 2u);
}

TEST(Preprocess, RailedChannelDroppedSegmentSurvives) {
  auto rec = make_rec(32, 500.0, 30.0, [](std::int64_t ch, double t) {
    if (ch == 0) return 500.0 * std::sin(2.0 * M_PI * 5.0 * t);
    return 10.0 * std::sin(2.0 * M_PI * 9.0 * t + static_cast<double>(ch));
  });
  auto out = preprocess(rec, 0.3);
  ASSERT_EQ(out.segments.size(), 1u);
  const auto& seg = out.segments[0];
  EXPECT_EQ(seg.channels.size(), 31u);
  ASSERT_EQ(seg.provenance.dropped_channels.size(), 1u);
  EXPECT_EQ(seg.provenance.dropped_channels[0], "ch0");
  for (const auto& ch : seg.channels) EXPECT_NE(ch.name, "ch0");
}

TEST(Preprocess, MajorityRailedDropsWholeSegment) {
  auto rec = make_rec(32, 500.0, 30.0, [](std::int64_t ch, double t) {
    if (ch < 17) return 500.0 * std::sin(2.0 * M_PI * 5.0 * t);
    return 10.0 * std::sin(2.0 * M_PI * 9.0 * t);
  });
  auto out = preprocess(rec, 0.3);
  EXPECT_TRUE(out.segments.empty());
  EXPECT_EQ(out.segments_dropped, 1);
}

TEST(Preprocess, IdempotentOnCleanDataAwayFromEdges) {
  auto rec = make_rec(1, 500.0, 90.0, [](std::int64_t, double t) {
    return 20.0 * std::sin(2.0 * M_PI * 5.0 * t) + 8.0 * std::sin(2.0 * M_PI * 12.0 * t) +
           5.0 * std::sin(2.0 * M_PI * 37.0 * t);
  });
  auto first = preprocess(rec, 0.3);
  ASSERT_EQ(first.segments.size(), 3u);

  RawRecording again;
  again.sample_rate_hz = 500.0;
  again.channels = rec.channels;
  const std::int64_t t = 3 * kSegmentSamples;
  again.data = RealArray({1, t});
  for (std::int64_t s = 0; s < 3; ++s)
    for (std::int64_t j = 0; j < kSegmentSamples; ++j)
      again.data.at(0, s * kSegmentSamples + j) =
          first.segments[static_cast<std::size_t>(s)].data.at(0, j) * kEegScaleUv;
  auto second = preprocess(again, 0.3);
  ASSERT_EQ(second.segments.size(), 3u);
  for (std::int64_t s = 0; s < 3; ++s)
    for (std::int64_t j = 4000; j < 11000; ++j)
      EXPECT_NEAR(second.segments[static_cast<std::size_t>(s)].data.at(0, j),
                  first.segments[static_cast<std::size_t>(s)].data.at(0, j), 1e-3);
}

// ---- resampler ----

TEST(Resampler, HalvingRateTracksAnalyticSignal) {
  const auto r = dsp::Resampler::design(1000.0, 500.0);
  EXPECT_EQ(r.up, 1);
  EXPECT_EQ(r.down, 2);
  const std::int64_t n = 10000;
  std::vector<double> x(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    x[static_cast<std::size_t>(i)] = std::sin(2.0 * M_PI * 10.0 * static_cast<double>(i) / 1000.0);
  const auto y = r.apply(x);
  ASSERT_EQ(static_cast<std::int64_t>(y.size()), 5000);
  for (std::int64_t j = 500; j < 4500; ++j) {
    const double expect = std::sin(2.0 * M_PI * 10.0 * static_cast<double>(j) / 500.0);
    EXPECT_NEAR(y[static_cast<std::size_t>(j)], expect, 1e-3);
  }
}

TEST(Resampler, DoublingRateTracksAnalyticSignal) {
  const auto r = dsp::Resampler::design(250.0, 500.0);
  EXPECT_EQ(r.up, 2);
  EXPECT_EQ(r.down, 1);
  const std::int64_t n = 2500;
  std::vector<double> x(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    x[static_cast<std::size_t>(i)] = std::sin(2.0 * M_PI * 8.0 * static_cast<double>(i) / 250.0);
  const auto y = r.apply(x);
  ASSERT_EQ(static_cast<std::int64_t>(y.size()), 5000);
  for (std::int64_t j = 500; j < 4500; ++j) {
    const double expect = std::sin(2.0 * M_PI * 8.0 * static_cast<double>(j) / 500.0);
    EXPECT_NEAR(y[static_cast<std::size_t>(j)], expect, 1e-3);
  }
}

TEST(Resampler, SameRateIsIdentity) {
  const auto r = dsp::Resampler::design(500.0, 500.0);
  EXPECT_TRUE(r.identity());
  std::vector<double> x{1.0, -2.0, 3.0};
  EXPECT_EQ(r.apply(x), x);
}

// ---- container ----

TEST(Container, RoundTripPreservesMetaAndData) {
  const auto dir = temp_dir("roundtrip");
  RawRecording rec;
  rec.sample_rate_hz = 1000.0;
  rec.channels.push_back({"F3", ModalityType::EEG, Subtype::scalp, std::nullopt});
  rec.channels.push_back({"d1", ModalityType::iEEG, Subtype::depth, Coords{1.5, -2.0, 3.25}});
  rec.data = RealArray({2, 5}, {0.5, -1.25, 3.0, 4.5, -0.125, 10.0, 20.0, 30.0, 40.0, 50.0});
  write_container(dir, rec.data, rec.sample_rate_hz, rec.channels, "uV");

  auto back = read_container(dir);
  EXPECT_DOUBLE_EQ(back.sample_rate_hz, 1000.0);
  ASSERT_EQ(back.channels.size(), 2u);
  EXPECT_EQ(back.channels[0].name, "F3");
  EXPECT_FALSE(back.channels[0].coords_cm.has_value());
  ASSERT_TRUE(back.channels[1].coords_cm.has_value());
  EXPECT_DOUBLE_EQ(back.channels[1].coords_cm->y, -2.0);
  EXPECT_EQ(back.channels[1].modality_type, ModalityType::iEEG);
  ASSERT_EQ(back.data.shape, rec.data.shape);
  for (std::size_t i = 0; i < rec.data.data.size(); ++i)
    EXPECT_NEAR(back.data.data[i], rec.data.data[i], 1e-5);
  std::filesystem::remove_all(dir);
}

TEST(Container, MissingMetaNamesTheFile) {
  const auto dir = temp_dir("missing");
  std::filesystem::create_directories(dir);
  try {
    read_container(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("meta.json"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST(Container, MalformedMetaRejected) {
  const auto dir = temp_dir("malformed");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "meta.json") << "{ not json";
  EXPECT_THROW(read_container(dir), DataError);
  std::filesystem::remove_all(dir);
}

TEST(Container, WrongDataSizeRejected) {
  const auto dir = temp_dir("badsize");
  RealArray d({1, 4}, {1, 2, 3, 4});
  write_container(dir, d, 500.0, {{"c0", ModalityType::EEG, Subtype::scalp, std::nullopt}}, "uV");
  std::ofstream(dir / "data.f32le", std::ios::binary | std::ios::trunc) << "xyz";
  EXPECT_THROW(read_container(dir), DataError);
  std::filesystem::remove_all(dir);
}

TEST(Container, SegmentWriteIncludesProvenance) {
  const auto dir = temp_dir("segment");
  CleanSegment seg;
  seg.data = RealArray({1, 15000});
  seg.channels.push_back({"c0", ModalityType::EEG, Subtype::scalp, std::nullopt});
  seg.provenance.clip_fractions = {0.01};
  seg.provenance.dropped_channels = {"c7"};
  seg.provenance.segment_dropped = false;
  seg.provenance.highpass_hz = 0.3;
  seg.provenance.notch_hz = 60.0;
  seg.provenance.source_rate_hz = 1000.0;
  write_segment(dir, seg);

  std::ifstream in(dir / "provenance.json");
  ASSERT_TRUE(in.good());
  nlohmann::json j;
  in >> j;
  EXPECT_EQ(j.at("dropped_channels").at(0).get<std::string>(), "c7");
  EXPECT_DOUBLE_EQ(j.at("clip_fractions").at(0).get<double>(), 0.01);
  EXPECT_DOUBLE_EQ(j.at("highpass_hz").get<double>(), 0.3);

  auto back = read_container(dir);
  EXPECT_DOUBLE_EQ(back.sample_rate_hz, 500.0);
  std::filesystem::remove_all(dir);
}
