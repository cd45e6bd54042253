#pragma once

// Deterministic synthetic signals for smoke training and probes: multi-
// channel recordings mixing slow drifts, band rhythms, white noise and the
// occasional spike, plus labeled Gaussian blobs for classifier checks.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ephyslab/container.hpp"
#include "ephyslab/ndcore.hpp"

namespace ephyslab::synthetic {

using ingest::ChannelMeta;
using ingest::CleanSegment;
using ingest::Coords;
using ingest::ModalityType;
using ingest::RawRecording;
using ingest::Subtype;
using ndcore::RealArray;
using ndcore::SeededRng;

inline std::vector<ChannelMeta> scalp_channels(std::int64_t count) {
  std::vector<ChannelMeta> out;
  for (std::int64_t c = 0; c < count; ++c) {
    ChannelMeta m;
    m.name = "ch" + std::to_string(c);
    m.modality_type = ModalityType::EEG;
    m.subtype = Subtype::scalp;
    m.coords_cm = Coords{2.0 * static_cast<double>(c % 8), 3.0 * static_cast<double>(c / 8), 1.0};
    out.push_back(m);
  }
  return out;
}

// One channel of structured signal on [0, n) samples at rate fs, unit scale.
inline void fill_channel(double* dst, std::int64_t n, double fs, SeededRng& rng) {
  const double f_slow = 0.5 + 2.5 * rng.uniform01();
  const double f_alpha = 8.0 + 4.0 * rng.uniform01();
  const double f_beta = 15.0 + 10.0 * rng.uniform01();
  const double p1 = 2.0 * M_PI * rng.uniform01();
  const double p2 = 2.0 * M_PI * rng.uniform01();
  const double p3 = 2.0 * M_PI * rng.uniform01();
  const double a_slow = 0.4 + 0.4 * rng.uniform01();
  const double a_alpha = 0.3 + 0.5 * rng.uniform01();
  const double a_beta = 0.1 + 0.2 * rng.uniform01();
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    dst[i] = a_slow * std::sin(2.0 * M_PI * f_slow * t + p1) +
             a_alpha * std::sin(2.0 * M_PI * f_alpha * t + p2) +
             a_beta * std::sin(2.0 * M_PI * f_beta * t + p3) + 0.12 * rng.normal();
  }
  const std::int64_t spikes = rng.uniform_int(3);
  for (std::int64_t k = 0; k < spikes; ++k) {
    const std::int64_t center = rng.uniform_int(n);
    const double amp = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * (1.0 + rng.uniform01());
    const double width = 0.02 * fs;
    const std::int64_t lo = std::max<std::int64_t>(0, center - 4 * static_cast<std::int64_t>(width));
    const std::int64_t hi = std::min<std::int64_t>(n - 1, center + 4 * static_cast<std::int64_t>(width));
    for (std::int64_t i = lo; i <= hi; ++i) {
      const double z = (static_cast<double>(i - center)) / width;
      dst[i] += amp * std::exp(-0.5 * z * z);
    }
  }
}

// Microvolt-scale raw recording suitable for the preprocessing path.
inline RawRecording make_recording(std::int64_t channels, double seconds, double fs,
                                   SeededRng& rng) {
  const std::int64_t n = static_cast<std::int64_t>(std::llround(seconds * fs));
  RawRecording rec;
  rec.sample_rate_hz = fs;
  rec.channels = scalp_channels(channels);
  rec.data = RealArray({channels, n});
  for (std::int64_t c = 0; c < channels; ++c) {
    fill_channel(&rec.data.at(c, 0), n, fs, rng);
    const double scale = 25.0 + 20.0 * rng.uniform01();  // microvolts
    for (std::int64_t i = 0; i < n; ++i) rec.data.at(c, i) *= scale;
  }
  return rec;
}

// Normalized 30-second segment at 500 Hz, values in [-1, 1].
inline CleanSegment make_segment(std::int64_t channels, SeededRng& rng) {
  const double fs = 500.0;
  const std::int64_t n = 15000;
  CleanSegment seg;
  seg.channels = scalp_channels(channels);
  seg.data = RealArray({channels, n});
  double peak = 0.0;
  for (std::int64_t c = 0; c < channels; ++c) {
    fill_channel(&seg.data.at(c, 0), n, fs, rng);
    for (std::int64_t i = 0; i < n; ++i) peak = std::max(peak, std::fabs(seg.data.at(c, i)));
  }
  const double inv = peak > 0.0 ? 1.0 / (1.05 * peak) : 1.0;
  for (auto& v : seg.data.data) v *= inv;
  return seg;
}

inline std::vector<CleanSegment> make_dataset(std::int64_t count, std::int64_t channels,
                                              SeededRng& rng) {
  std::vector<CleanSegment> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(make_segment(channels, rng));
  return out;
}

// Two Gaussian clusters with centers +/- separation/2 along a random axis.
inline RealArray gaussian_blobs(std::int64_t samples, std::int64_t dim, double separation,
                                SeededRng& rng, std::vector<std::int64_t>& labels) {
  RealArray x({samples, dim});
  labels.assign(static_cast<std::size_t>(samples), 0);
  RealArray axis({dim});
  double norm = 0.0;
  for (auto& v : axis.data) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (auto& v : axis.data) v /= norm;
  for (std::int64_t i = 0; i < samples; ++i) {
    const std::int64_t label = rng.uniform01() < 0.5 ? 0 : 1;
    labels[static_cast<std::size_t>(i)] = label;
    const double shift = (label == 0 ? -0.5 : 0.5) * separation;
    for (std::int64_t j = 0; j < dim; ++j)
      x.at(i, j) = shift * axis.data[static_cast<std::size_t>(j)] + rng.normal();
  }
  return x;
}

}  // namespace ephyslab::synthetic
