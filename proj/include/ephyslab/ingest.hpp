#pragma once

// QAQC and minimal preprocessing: amplitude normalization with clipping,
// channel/segment drop rules, filtering, resampling to 500 Hz, and
// segmentation into 30 s windows.

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ephyslab/container.hpp"
#include "ephyslab/dsp.hpp"
#include "ephyslab/ndcore.hpp"

namespace ephyslab {
namespace ingest {

constexpr double kSegmentSeconds = 30.0;
constexpr double kTargetRateHz = 500.0;
constexpr std::int64_t kSegmentSamples = 15000;
constexpr double kEegScaleUv = 100.0;
constexpr double kIeegScaleUv = 200.0;
constexpr double kChannelClipThreshold = 0.0333;
constexpr double kSegmentDropFraction = 0.5;

inline double modality_scale_uv(ModalityType m) {
  return m == ModalityType::EEG ? kEegScaleUv : kIeegScaleUv;
}

// ---- normalize_clip ----

struct NormalizeResult {
  ndcore::RealArray data;            // [C x T] clipped to [-1, 1]
  ndcore::RealArray clip_fractions;  // [C]
};

inline NormalizeResult normalize_clip(const RawRecording& rec) {
  const std::int64_t c = rec.data.dim(0), t = rec.data.dim(1);
  if (static_cast<std::size_t>(c) != rec.channels.size())
    throw ConfigError("normalize_clip: channel metadata count mismatch");
  NormalizeResult r{ndcore::RealArray({c, t}), ndcore::RealArray({c})};
  for (std::int64_t i = 0; i < c; ++i) {
    const double scale = modality_scale_uv(rec.channels[static_cast<std::size_t>(i)].modality_type);
    std::int64_t clipped = 0;
    for (std::int64_t j = 0; j < t; ++j) {
      double v = rec.data.at(i, j) / scale;
      if (std::abs(v) > 1.0) {
        ++clipped;
        v = v > 0.0 ? 1.0 : -1.0;
      }
      r.data.at(i, j) = v;
    }
    r.clip_fractions.at(i) = static_cast<double>(clipped) / static_cast<double>(t);
  }
  return r;
}

// ---- qaqc_decide ----

struct QaqcDecision {
  std::set<std::int64_t> dropped_channels;
  bool drop_segment = false;
};

inline QaqcDecision qaqc_decide(const ndcore::RealArray& clip_fractions) {
  QaqcDecision d;
  const std::int64_t c = clip_fractions.dim(0);
  for (std::int64_t i = 0; i < c; ++i) {
    const double f = clip_fractions.at(i);
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("qaqc_decide: fraction outside [0, 1]");
    if (f > kChannelClipThreshold) d.dropped_channels.insert(i);
  }
  d.drop_segment =
      static_cast<double>(d.dropped_channels.size()) > kSegmentDropFraction * static_cast<double>(c);
  return d;
}

// ---- preprocess ----

struct PreprocessResult {
  std::vector<CleanSegment> segments;
  std::int64_t segments_dropped = 0;
  std::vector<std::string> warnings;
};

inline PreprocessResult preprocess(const RawRecording& rec, double highpass_hz,
                                   double notch_hz = 60.0) {
  if (rec.sample_rate_hz <= 0.0) throw ConfigError("preprocess: sample rate must be positive");
  if (!(highpass_hz > 0.0 && highpass_hz < rec.sample_rate_hz / 2.0))
    throw ConfigError("preprocess: high-pass cut must lie inside (0, fs/2)");
  for (const auto& ch : rec.channels)
    if (!ch.consistent()) throw ConfigError("preprocess: channel " + ch.name + " modality/subtype mismatch");

  PreprocessResult result;
  const std::int64_t c = rec.data.dim(0), t = rec.data.dim(1);
  const double duration_s = static_cast<double>(t) / rec.sample_rate_hz;
  if (duration_s < kSegmentSeconds) {
    result.warnings.push_back("recording shorter than one 30 s window; nothing produced");
    return result;
  }

  const auto hp = dsp::butterworth_highpass4(rec.sample_rate_hz, highpass_hz);
  const bool notch_ok = notch_hz > 0.0 && notch_hz < rec.sample_rate_hz / 2.0;
  std::vector<dsp::Biquad> notch;
  if (notch_ok) notch.push_back(dsp::notch_biquad(rec.sample_rate_hz, notch_hz, 30.0));
  const auto resampler = dsp::Resampler::design(rec.sample_rate_hz, kTargetRateHz);

  std::vector<std::vector<double>> resampled(static_cast<std::size_t>(c));
  for (std::int64_t i = 0; i < c; ++i) {
    std::vector<double> x(rec.data.data.begin() + i * t, rec.data.data.begin() + (i + 1) * t);
    x = dsp::filtfilt(hp, std::move(x), dsp::PadMode::mirror);
    if (notch_ok) x = dsp::filtfilt(notch, std::move(x), dsp::PadMode::odd);
    resampled[static_cast<std::size_t>(i)] = resampler.apply(x);
  }

  const std::int64_t t500 = static_cast<std::int64_t>(resampled[0].size());
  const std::int64_t n_segments = t500 / kSegmentSamples;
  for (std::int64_t seg = 0; seg < n_segments; ++seg) {
    RawRecording window;
    window.sample_rate_hz = kTargetRateHz;
    window.channels = rec.channels;
    window.data = ndcore::RealArray({c, kSegmentSamples});
    for (std::int64_t i = 0; i < c; ++i)
      for (std::int64_t j = 0; j < kSegmentSamples; ++j)
        window.data.at(i, j) = resampled[static_cast<std::size_t>(i)]
                                        [static_cast<std::size_t>(seg * kSegmentSamples + j)];

    auto norm = normalize_clip(window);
    auto decision = qaqc_decide(norm.clip_fractions);

    SegmentProvenance prov;
    prov.clip_fractions.assign(norm.clip_fractions.data.begin(), norm.clip_fractions.data.end());
    for (auto idx : decision.dropped_channels)
      prov.dropped_channels.push_back(rec.channels[static_cast<std::size_t>(idx)].name);
    prov.segment_dropped = decision.drop_segment;
    prov.highpass_hz = highpass_hz;
    prov.notch_hz = notch_ok ? notch_hz : 0.0;
    prov.source_rate_hz = rec.sample_rate_hz;

    if (decision.drop_segment) {
      ++result.segments_dropped;
      continue;
    }

    CleanSegment out;
    out.provenance = prov;
    const std::int64_t kept = c - static_cast<std::int64_t>(decision.dropped_channels.size());
    out.data = ndcore::RealArray({kept, kSegmentSamples});
    std::int64_t row = 0;
    for (std::int64_t i = 0; i < c; ++i) {
      if (decision.dropped_channels.count(i)) continue;
      out.channels.push_back(rec.channels[static_cast<std::size_t>(i)]);
      for (std::int64_t j = 0; j < kSegmentSamples; ++j) out.data.at(row, j) = norm.data.at(i, j);
      ++row;
    }
    result.segments.push_back(std::move(out));
  }
  return result;
}

}  // namespace ingest
}  // namespace ephyslab
