#pragma once

// IIR filters (biquad cascades, zero-phase application) and rational
// polyphase resampling used by the ingest pipeline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ephyslab/ndcore.hpp"

namespace ephyslab {
namespace dsp {

// ---- biquads ----

struct Biquad {
  // normalized so a0 == 1
  double b0, b1, b2, a1, a2;
};

// RBJ cookbook high-pass section
inline Biquad highpass_biquad(double fs, double f0, double q) {
  const double w0 = 2.0 * M_PI * f0 / fs;
  const double c = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0,
          -2.0 * c / a0, (1.0 - alpha) / a0};
}

// RBJ cookbook notch section
inline Biquad notch_biquad(double fs, double f0, double q) {
  const double w0 = 2.0 * M_PI * f0 / fs;
  const double c = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {1.0 / a0, -2.0 * c / a0, 1.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
}

// 4th-order Butterworth high-pass as two cascaded sections with the
// standard pole-pair quality factors 1/(2 cos(pi/8)) and 1/(2 cos(3 pi/8)).
inline std::vector<Biquad> butterworth_highpass4(double fs, double f0) {
  const double q1 = 1.0 / (2.0 * std::cos(M_PI / 8.0));
  const double q2 = 1.0 / (2.0 * std::cos(3.0 * M_PI / 8.0));
  return {highpass_biquad(fs, f0, q1), highpass_biquad(fs, f0, q2)};
}

inline void biquad_forward(const Biquad& f, std::vector<double>& x) {
  double z1 = 0.0, z2 = 0.0;
  for (auto& v : x) {
    const double in = v;
    const double out = f.b0 * in + z1;
    z1 = f.b1 * in - f.a1 * out + z2;
    z2 = f.b2 * in - f.a2 * out;
    v = out;
  }
}

// Edge continuation for zero-phase filtering. The junction artifact a filter
// rings on depends on its stopband: a low-cut filter rings on level steps, so
// it wants the mirror extension (value-continuous); a narrow notch rings on
// curvature jumps, so it wants the odd extension (slope-continuous, but it
// pivots the level around the edge sample, harmless to a DC-passing notch).
enum class PadMode { mirror, odd };

inline std::vector<double> filtfilt(const std::vector<Biquad>& sections, std::vector<double> x,
                                    PadMode mode = PadMode::mirror) {
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  if (n < 2) return x;
  const std::int64_t pad = std::min<std::int64_t>(n - 1, 2000);
  std::vector<double> ext;
  ext.reserve(static_cast<std::size_t>(n + 2 * pad));
  for (std::int64_t i = pad; i >= 1; --i) {
    const double v = x[static_cast<std::size_t>(i)];
    ext.push_back(mode == PadMode::mirror ? v : 2.0 * x[0] - v);
  }
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::int64_t i = 1; i <= pad; ++i) {
    const double v = x[static_cast<std::size_t>(n - 1 - i)];
    ext.push_back(mode == PadMode::mirror ? v : 2.0 * x[static_cast<std::size_t>(n - 1)] - v);
  }
  for (const auto& f : sections) biquad_forward(f, ext);
  std::reverse(ext.begin(), ext.end());
  for (const auto& f : sections) biquad_forward(f, ext);
  std::reverse(ext.begin(), ext.end());
  return std::vector<double>(ext.begin() + pad, ext.begin() + pad + n);
}

// ---- polyphase resampling ----

namespace detail {

inline double bessel_i0(double x) {
  // power series; converges fast for the kaiser betas used here
  double sum = 1.0, term = 1.0;
  const double hx = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (hx / k) * (hx / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

}  // namespace detail

struct Resampler {
  std::int64_t up = 1;
  std::int64_t down = 1;
  std::vector<double> h;  // symmetric FIR, centered at half
  std::int64_t half = 0;

  static Resampler design(double fs_in, double fs_out, std::int64_t taps_per_arm = 16,
                          double kaiser_beta = 8.6) {
    const std::int64_t a = static_cast<std::int64_t>(std::llround(fs_in));
    const std::int64_t b = static_cast<std::int64_t>(std::llround(fs_out));
    if (a <= 0 || b <= 0) throw ConfigError("resampler: bad sample rates");
    const std::int64_t g = std::gcd(a, b);
    Resampler r;
    r.up = b / g;
    r.down = a / g;
    if (r.up == 1 && r.down == 1) return r;
    const std::int64_t m = std::max(r.up, r.down);
    r.half = taps_per_arm * m;
    // cutoff slightly inside the tighter Nyquist, in upsampled-rate units
    const double fc = 0.5 / static_cast<double>(m) * 0.92;
    r.h.resize(static_cast<std::size_t>(2 * r.half + 1));
    const double i0b = detail::bessel_i0(kaiser_beta);
    for (std::int64_t i = -r.half; i <= r.half; ++i) {
      const double t = static_cast<double>(i);
      const double sinc =
          (i == 0) ? 2.0 * fc : std::sin(2.0 * M_PI * fc * t) / (M_PI * t);
      const double u = t / static_cast<double>(r.half);
      const double w = detail::bessel_i0(kaiser_beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0b;
      r.h[static_cast<std::size_t>(i + r.half)] = sinc * w;
    }
    return r;
  }

  bool identity() const { return up == 1 && down == 1; }

  std::int64_t output_length(std::int64_t n) const {
    return (n * up + down - 1) / down;
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    if (identity()) return x;
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    const std::int64_t n_out = output_length(n);
    std::vector<double> y(static_cast<std::size_t>(n_out), 0.0);
    for (std::int64_t j = 0; j < n_out; ++j) {
      const std::int64_t center = j * down;  // position on the upsampled grid
      std::int64_t t_lo = std::max<std::int64_t>(detail::ceil_div(center - half, up), 0);
      std::int64_t t_hi = std::min<std::int64_t>(detail::floor_div(center + half, up), n - 1);
      double acc = 0.0;
      for (std::int64_t t = t_lo; t <= t_hi; ++t) {
        const std::int64_t k = center - t * up;
        if (k < -half || k > half) continue;
        acc += h[static_cast<std::size_t>(k + half)] * x[static_cast<std::size_t>(t)];
      }
      y[static_cast<std::size_t>(j)] = acc * static_cast<double>(up);
    }
    return y;
  }
};

}  // namespace dsp
}  // namespace ephyslab
