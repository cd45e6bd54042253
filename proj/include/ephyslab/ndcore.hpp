#pragma once

// Dense f64 arrays, a deterministic RNG, real-FFT / STFT log magnitudes and
// the Beta(3,1) subset sampler. Everything downstream builds on this header.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ephyslab {

struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

namespace ndcore {

// ---- RealArray ----

struct RealArray {
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  RealArray() = default;
  explicit RealArray(std::vector<std::int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(count(shape)), 0.0);
  }
  RealArray(std::vector<std::int64_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    assert(count(shape) == static_cast<std::int64_t>(data.size()));
  }

  static std::int64_t count(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }
  static RealArray zeros(std::vector<std::int64_t> s) { return RealArray(std::move(s)); }
  static RealArray full(std::vector<std::int64_t> s, double v) {
    RealArray a(std::move(s));
    for (auto& x : a.data) x = v;
    return a;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t dim(int i) const {
    assert(i >= 0 && i < rank());
    return shape[static_cast<std::size_t>(i)];
  }

  double& at(std::int64_t i) {
    assert(rank() == 1 && i >= 0 && i < dim(0));
    return data[static_cast<std::size_t>(i)];
  }
  double at(std::int64_t i) const { return const_cast<RealArray*>(this)->at(i); }
  double& at(std::int64_t i, std::int64_t j) {
    assert(rank() == 2 && i >= 0 && i < dim(0) && j >= 0 && j < dim(1));
    return data[static_cast<std::size_t>(i * dim(1) + j)];
  }
  double at(std::int64_t i, std::int64_t j) const {
    return const_cast<RealArray*>(this)->at(i, j);
  }
  double& at(std::int64_t i, std::int64_t j, std::int64_t k) {
    assert(rank() == 3 && i >= 0 && i < dim(0) && j >= 0 && j < dim(1) && k >= 0 && k < dim(2));
    return data[static_cast<std::size_t>((i * dim(1) + j) * dim(2) + k)];
  }
  double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return const_cast<RealArray*>(this)->at(i, j, k);
  }

  bool all_finite() const {
    for (double x : data)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

inline RealArray matmul(const RealArray& a, const RealArray& b) {
  assert(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0));
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  RealArray c({m, n});
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a.data.data() + i * k;
    double* ci = c.data.data() + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b.data.data() + p * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

inline RealArray add(const RealArray& a, const RealArray& b) {
  assert(a.shape == b.shape);
  RealArray c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

inline RealArray sub(const RealArray& a, const RealArray& b) {
  assert(a.shape == b.shape);
  RealArray c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

inline RealArray mul(const RealArray& a, const RealArray& b) {
  assert(a.shape == b.shape);
  RealArray c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

inline RealArray scale(const RealArray& a, double s) {
  RealArray c = a;
  for (auto& x : c.data) x *= s;
  return c;
}

inline double max_abs_diff(const RealArray& a, const RealArray& b) {
  assert(a.shape == b.shape);
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

// ---- SeededRng ----

// xoshiro256** seeded through splitmix64. Hand-rolled so draws are identical
// on every platform; the algorithm id goes into provenance records.
struct SeededRng {
  std::uint64_t s[4];
  std::uint64_t seed_value;
  bool have_spare = false;
  double spare = 0.0;

  static constexpr const char* algorithm = "xoshiro256ss";

  explicit SeededRng(std::uint64_t seed) : seed_value(seed) {
    std::uint64_t x = seed;
    for (auto& si : s) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      si = z ^ (z >> 31);
    }
  }

  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }

  // uniform on [0, 1) with 53 mantissa bits
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n)
  std::int64_t uniform_int(std::int64_t n) {
    assert(n > 0);
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return static_cast<std::int64_t>(v % un);
  }

  double normal() {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare = r * std::sin(a);
    have_spare = true;
    return r * std::cos(a);
  }

  // Fisher-Yates prefix: k distinct indices from [0, n)
  std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k) {
    assert(k >= 0 && k <= n);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (std::int64_t i = 0; i < k; ++i) {
      const std::int64_t j = i + uniform_int(n - i);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
  }
};

// ---- Beta(3,1) subset sampler ----

// Inverse CDF: x = U^(1/3). Mapped to a count with ceil and a floor of 1.
inline std::int64_t beta31_subset_size(std::int64_t max_count, SeededRng& rng) {
  assert(max_count >= 1);
  const double x = std::cbrt(rng.uniform01());
  const std::int64_t n = static_cast<std::int64_t>(std::ceil(x * static_cast<double>(max_count)));
  return std::max<std::int64_t>(1, n);
}

// ---- real DFT ----

namespace detail {

// cos/sin tables for a direct real DFT of length n, bins 0..n/2
struct DftTable {
  std::int64_t n = 0;
  std::int64_t bins = 0;
  std::vector<double> c;  // [t * bins + k]
  std::vector<double> s;
};

inline const DftTable& dft_table(std::int64_t n) {
  static std::map<std::int64_t, DftTable> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  DftTable t;
  t.n = n;
  t.bins = n / 2 + 1;
  t.c.resize(static_cast<std::size_t>(n * t.bins));
  t.s.resize(static_cast<std::size_t>(n * t.bins));
  for (std::int64_t tt = 0; tt < n; ++tt) {
    for (std::int64_t k = 0; k < t.bins; ++k) {
      const double a = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(tt) /
                       static_cast<double>(n);
      t.c[static_cast<std::size_t>(tt * t.bins + k)] = std::cos(a);
      t.s[static_cast<std::size_t>(tt * t.bins + k)] = std::sin(a);
    }
  }
  auto [pos, ok] = cache.emplace(n, std::move(t));
  (void)ok;
  return pos->second;
}

}  // namespace detail

// magnitudes of bins 0..n/2 of the real DFT
inline std::vector<double> rfft_mag(const double* x, std::int64_t n) {
  const auto& tab = detail::dft_table(n);
  std::vector<double> mag(static_cast<std::size_t>(tab.bins));
  for (std::int64_t k = 0; k < tab.bins; ++k) {
    double re = 0.0, im = 0.0;
    for (std::int64_t t = 0; t < n; ++t) {
      const std::size_t idx = static_cast<std::size_t>(t * tab.bins + k);
      re += x[t] * tab.c[idx];
      im += x[t] * tab.s[idx];
    }
    mag[static_cast<std::size_t>(k)] = std::hypot(re, im);
  }
  return mag;
}

inline std::int64_t rfft_bins(std::int64_t n, double sample_rate_hz, double cutoff_hz) {
  return static_cast<std::int64_t>(std::floor(cutoff_hz * static_cast<double>(n) / sample_rate_hz)) + 1;
}

// Parseval pair: time-domain energy and (1/n)-weighted spectral energy from
// the one-sided magnitudes. Interior bins count twice, DC once, Nyquist once.
inline double energy_time(const double* x, std::int64_t n) {
  double e = 0.0;
  for (std::int64_t t = 0; t < n; ++t) e += x[t] * x[t];
  return e;
}

inline double energy_freq(const std::vector<double>& mag, std::int64_t n) {
  double e = 0.0;
  const std::int64_t bins = static_cast<std::int64_t>(mag.size());
  for (std::int64_t k = 0; k < bins; ++k) {
    const bool edge = (k == 0) || (n % 2 == 0 && k == n / 2);
    e += (edge ? 1.0 : 2.0) * mag[static_cast<std::size_t>(k)] * mag[static_cast<std::size_t>(k)];
  }
  return e / static_cast<double>(n);
}

inline RealArray rfft_log_mag(const RealArray& patch, double sample_rate_hz, double cutoff_hz) {
  assert(patch.rank() == 1);
  const std::int64_t n = patch.dim(0);
  if (n < 2) throw ConfigError("rfft_log_mag: patch length must be >= 2");
  if (!(cutoff_hz > 0.0 && cutoff_hz <= sample_rate_hz / 2.0))
    throw ConfigError("rfft_log_mag: cutoff must lie in (0, fs/2]");
  if (!patch.all_finite()) throw DataError("rfft_log_mag: non-finite input");
  const std::int64_t keep = std::min(rfft_bins(n, sample_rate_hz, cutoff_hz), n / 2 + 1);
  const auto mag = rfft_mag(patch.data.data(), n);
  RealArray out({keep});
  for (std::int64_t k = 0; k < keep; ++k)
    out.at(k) = std::log1p(mag[static_cast<std::size_t>(k)]);
  return out;
}

// ---- STFT ----

inline std::vector<double> hann_window(std::int64_t len) {
  std::vector<double> w(static_cast<std::size_t>(len));
  for (std::int64_t i = 0; i < len; ++i)
    w[static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(len)));
  return w;
}

inline std::int64_t stft_frames(std::int64_t n, std::int64_t window_len, std::int64_t hop) {
  return (n - window_len) / hop + 1;
}

// shape {bins, frames}; bins limited to <= cutoff_hz
inline RealArray stft_log_mag(const RealArray& patch, std::int64_t window_len, std::int64_t hop,
                              double sample_rate_hz, double cutoff_hz) {
  assert(patch.rank() == 1);
  const std::int64_t n = patch.dim(0);
  if (window_len > n) throw ConfigError("stft_log_mag: window longer than patch");
  if (hop != window_len / 2) throw ConfigError("stft_log_mag: hop must equal window_len/2");
  if (!patch.all_finite()) throw DataError("stft_log_mag: non-finite input");
  const std::int64_t frames = stft_frames(n, window_len, hop);
  const std::int64_t keep =
      std::min(rfft_bins(window_len, sample_rate_hz, cutoff_hz), window_len / 2 + 1);
  const auto w = hann_window(window_len);
  RealArray out({keep, frames});
  std::vector<double> buf(static_cast<std::size_t>(window_len));
  for (std::int64_t f = 0; f < frames; ++f) {
    const double* src = patch.data.data() + f * hop;
    for (std::int64_t i = 0; i < window_len; ++i)
      buf[static_cast<std::size_t>(i)] = src[i] * w[static_cast<std::size_t>(i)];
    const auto mag = rfft_mag(buf.data(), window_len);
    for (std::int64_t k = 0; k < keep; ++k)
      out.at(k, f) = std::log1p(mag[static_cast<std::size_t>(k)]);
  }
  return out;
}

}  // namespace ndcore
}  // namespace ephyslab
