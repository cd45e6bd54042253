#pragma once

// Model hyperparameters. One struct carries every knob; validate() enforces
// the divisibility rules the derived sizes rely on.

#include <cstdint>
#include <string>

#include "ephyslab/ndcore.hpp"

namespace ephyslab::config {

// The hyperparameter table lists the spectral embedding input as d_model/2+1
// bins, while the stated 200 Hz cutoff gives a patch-length-dependent count
// (201 bins for 1 s patches). Both readings are selectable; cutoff_limited is
// the default. Reconstruction targets always use the cutoff convention.
enum class SpectralBinsMode { cutoff_limited, half_plus_one };

inline std::string to_string(SpectralBinsMode m) {
  return m == SpectralBinsMode::cutoff_limited ? "cutoff_limited" : "half_plus_one";
}
inline SpectralBinsMode spectral_bins_from_string(const std::string& s) {
  if (s == "cutoff_limited") return SpectralBinsMode::cutoff_limited;
  if (s == "half_plus_one") return SpectralBinsMode::half_plus_one;
  throw ConfigError("unknown spectral bins mode: " + s);
}

struct StftSpec {
  std::int64_t window = 0;
  std::int64_t hop = 0;
};

struct ModelConfig {
  std::int64_t patch_size = 500;  // samples per patch at 500 Hz: 500 or 50
  std::int64_t d_model = 64;
  std::int64_t n_layers = 12;
  double mask_ratio = 0.5;
  std::int64_t stcpe_window = 7;
  double lambda_raw = 1.0;
  double lambda_fft = 0.1;
  double lambda_stft = 1.0;
  double pe_temperature = 2000.0;
  double pe_scale = 1.0 / 256.0;
  double dropout = 0.1;
  double sample_rate_hz = 500.0;
  double spectral_cutoff_hz = 200.0;
  SpectralBinsMode spectral_bins_mode = SpectralBinsMode::cutoff_limited;
  double rope_base = 10000.0;
  bool use_registers = true;

  static ModelConfig for_patch(std::int64_t patch, std::int64_t d, std::int64_t layers = 12) {
    ModelConfig c;
    c.patch_size = patch;
    c.d_model = d;
    c.n_layers = layers;
    if (patch == 50) {
      c.lambda_fft = 1.0;
      c.lambda_stft = 0.0;  // patches too short for a framed transform
    }
    c.validate();
    return c;
  }

  // derived sizes
  std::int64_t n_heads() const { return d_model / 32; }
  std::int64_t head_dim() const { return 32; }
  std::int64_t ffn_dim() const { return 4 * d_model; }      // split as 2d gate + 2d up
  std::int64_t stcpe_dim() const { return d_model / 8; }
  std::int64_t stcpe_heads() const { return std::max<std::int64_t>(1, d_model / 256); }
  std::int64_t stcpe_head_dim() const { return stcpe_dim() / stcpe_heads(); }
  std::int64_t cnn_channels() const { return patch_size == 500 ? d_model / 8 : d_model / 16; }
  std::int64_t cnn_kernel(int layer) const { return layer == 0 ? 63 : 3; }
  std::int64_t cnn_stride(int layer) const {
    if (layer == 0) return patch_size == 500 ? 64 : 4;
    return 3;
  }
  std::int64_t cnn_padding(int layer) const { return layer == 0 ? 31 : 1; }
  // sample count after the first `layers` conv stages (0 = raw patch length)
  std::int64_t cnn_length(int layers) const {
    std::int64_t len = patch_size;
    for (int l = 0; l < layers; ++l)
      len = (len + 2 * cnn_padding(l) - cnn_kernel(l)) / cnn_stride(l) + 1;
    return len;
  }
  std::int64_t pos_embed_dim() const { return 3 * d_model / 4; }
  std::int64_t modality_dim() const { return d_model / 4; }

  std::int64_t spectral_bins() const {
    const std::int64_t avail = patch_size / 2 + 1;
    if (spectral_bins_mode == SpectralBinsMode::half_plus_one)
      return std::min(d_model / 2 + 1, avail);
    return std::min(ndcore::rfft_bins(patch_size, sample_rate_hz, spectral_cutoff_hz), avail);
  }
  std::int64_t fft_target_bins() const {
    return std::min(ndcore::rfft_bins(patch_size, sample_rate_hz, spectral_cutoff_hz),
                    patch_size / 2 + 1);
  }
  std::vector<StftSpec> stft_specs() const {
    if (patch_size != 500 || lambda_stft == 0.0) return {};
    return {{200, 100}, {100, 50}};
  }
  std::int64_t stft_target_size(const StftSpec& s) const {
    const std::int64_t bins =
        std::min(ndcore::rfft_bins(s.window, sample_rate_hz, spectral_cutoff_hz), s.window / 2 + 1);
    return bins * ndcore::stft_frames(patch_size, s.window, s.hop);
  }

  void validate() const {
    if (patch_size != 500 && patch_size != 50)
      throw ConfigError("patch_size must be 500 or 50");
    if (d_model < 32 || d_model % 32 != 0)
      throw ConfigError("d_model must be a positive multiple of 32");
    if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
    if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0))
      throw ConfigError("mask_ratio must lie in [0, 1]");
    if (stcpe_window < 1 || stcpe_window % 2 == 0)
      throw ConfigError("stcpe_window must be odd and >= 1");
    if (lambda_raw < 0.0 || lambda_fft < 0.0 || lambda_stft < 0.0)
      throw ConfigError("loss weights must be nonnegative");
    if (patch_size == 50 && lambda_stft != 0.0)
      throw ConfigError("framed-transform loss requires patch_size 500");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (stcpe_head_dim() % 2 != 0)
      throw ConfigError("stcpe head width must be even for rotary pairs");
    if (!(spectral_cutoff_hz > 0.0 && spectral_cutoff_hz <= sample_rate_hz / 2.0))
      throw ConfigError("spectral cutoff must lie in (0, fs/2]");
  }
};

}  // namespace ephyslab::config
