#pragma once

// On-disk container: a directory holding meta.json plus data.f32le
// (channel-major little-endian float32). Cleaned segments carry an extra
// provenance.json.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ephyslab/ndcore.hpp"

namespace ephyslab {
namespace ingest {

enum class ModalityType { EEG, iEEG };
enum class Subtype { scalp, grid, strip, depth };

inline const char* to_string(ModalityType m) { return m == ModalityType::EEG ? "EEG" : "iEEG"; }
inline const char* to_string(Subtype s) {
  switch (s) {
    case Subtype::scalp: return "scalp";
    case Subtype::grid: return "grid";
    case Subtype::strip: return "strip";
    case Subtype::depth: return "depth";
  }
  return "scalp";
}

inline ModalityType modality_from_string(const std::string& s) {
  if (s == "EEG") return ModalityType::EEG;
  if (s == "iEEG") return ModalityType::iEEG;
  throw DataError("unknown modality_type: " + s);
}
inline Subtype subtype_from_string(const std::string& s) {
  if (s == "scalp") return Subtype::scalp;
  if (s == "grid") return Subtype::grid;
  if (s == "strip") return Subtype::strip;
  if (s == "depth") return Subtype::depth;
  throw DataError("unknown subtype: " + s);
}

struct Coords {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct ChannelMeta {
  std::string name;
  ModalityType modality_type = ModalityType::EEG;
  Subtype subtype = Subtype::scalp;
  std::optional<Coords> coords_cm;

  bool consistent() const {
    if (modality_type == ModalityType::EEG) return subtype == Subtype::scalp;
    return subtype != Subtype::scalp;
  }
};

struct RawRecording {
  ndcore::RealArray data;  // [C x T] microvolts
  double sample_rate_hz = 0.0;
  std::vector<ChannelMeta> channels;
};

struct SegmentProvenance {
  std::vector<double> clip_fractions;        // per input channel of the segment
  std::vector<std::string> dropped_channels;
  bool segment_dropped = false;
  double highpass_hz = 0.0;
  double notch_hz = 0.0;
  double source_rate_hz = 0.0;
};

struct CleanSegment {
  ndcore::RealArray data;  // [C' x 15000], dimensionless in [-1, 1]
  std::vector<ChannelMeta> channels;
  SegmentProvenance provenance;
};

// ---- json helpers ----

inline nlohmann::ordered_json channel_to_json(const ChannelMeta& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["modality_type"] = to_string(c.modality_type);
  j["subtype"] = to_string(c.subtype);
  if (c.coords_cm)
    j["coords_cm"] = {c.coords_cm->x, c.coords_cm->y, c.coords_cm->z};
  else
    j["coords_cm"] = nullptr;
  return j;
}

inline ChannelMeta channel_from_json(const nlohmann::json& j) {
  ChannelMeta c;
  c.name = j.at("name").get<std::string>();
  c.modality_type = modality_from_string(j.at("modality_type").get<std::string>());
  c.subtype = subtype_from_string(j.at("subtype").get<std::string>());
  if (j.contains("coords_cm") && !j.at("coords_cm").is_null()) {
    const auto& a = j.at("coords_cm");
    if (!a.is_array() || a.size() != 3) throw DataError("coords_cm must be a 3-element array");
    c.coords_cm = Coords{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  }
  if (!c.consistent()) throw DataError("channel " + c.name + ": modality/subtype mismatch");
  return c;
}

// ---- atomic file writes ----

inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for write: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---- container read/write ----

inline void write_container(const std::filesystem::path& dir, const ndcore::RealArray& data,
                            double sample_rate_hz, const std::vector<ChannelMeta>& channels,
                            const std::string& units) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json meta;
  meta["sample_rate_hz"] = sample_rate_hz;
  meta["units"] = units;
  meta["channels"] = nlohmann::ordered_json::array();
  for (const auto& c : channels) meta["channels"].push_back(channel_to_json(c));
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");

  std::string bytes;
  bytes.resize(data.data.size() * 4);
  for (std::size_t i = 0; i < data.data.size(); ++i) {
    const float f = static_cast<float>(data.data[i]);
    std::memcpy(bytes.data() + i * 4, &f, 4);
  }
  write_file_atomic(dir / "data.f32le", bytes);
}

inline RawRecording read_container(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  std::ifstream in(meta_path);
  if (!in) throw DataError("missing or unreadable " + meta_path.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed " + meta_path.string() + ": " + e.what());
  }

  RawRecording rec;
  try {
    rec.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
    for (const auto& cj : meta.at("channels")) rec.channels.push_back(channel_from_json(cj));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed " + meta_path.string() + ": " + e.what());
  }
  if (rec.sample_rate_hz <= 0.0) throw DataError(meta_path.string() + ": sample_rate_hz must be > 0");

  const auto data_path = dir / "data.f32le";
  std::ifstream din(data_path, std::ios::binary | std::ios::ate);
  if (!din) throw DataError("missing or unreadable " + data_path.string());
  const std::int64_t nbytes = static_cast<std::int64_t>(din.tellg());
  din.seekg(0);
  const std::int64_t c = static_cast<std::int64_t>(rec.channels.size());
  if (c == 0) throw DataError(meta_path.string() + ": no channels");
  if (nbytes % 4 != 0 || (nbytes / 4) % c != 0)
    throw DataError(data_path.string() + ": size is not channels x timepoints x 4 bytes");
  const std::int64_t t = nbytes / 4 / c;
  std::string bytes(static_cast<std::size_t>(nbytes), '\0');
  din.read(bytes.data(), nbytes);
  if (!din) throw DataError("read failed: " + data_path.string());
  rec.data = ndcore::RealArray({c, t});
  for (std::int64_t i = 0; i < c * t; ++i) {
    float f;
    std::memcpy(&f, bytes.data() + i * 4, 4);
    rec.data.data[static_cast<std::size_t>(i)] = static_cast<double>(f);
  }
  return rec;
}

inline void write_segment(const std::filesystem::path& dir, const CleanSegment& seg) {
  write_container(dir, seg.data, 500.0, seg.channels, "normalized");
  nlohmann::ordered_json prov;
  prov["clip_fractions"] = seg.provenance.clip_fractions;
  prov["dropped_channels"] = seg.provenance.dropped_channels;
  prov["segment_dropped"] = seg.provenance.segment_dropped;
  prov["highpass_hz"] = seg.provenance.highpass_hz;
  prov["notch_hz"] = seg.provenance.notch_hz;
  prov["source_rate_hz"] = seg.provenance.source_rate_hz;
  write_file_atomic(dir / "provenance.json", prov.dump(2) + "\n");
}

}  // namespace ingest
}  // namespace ephyslab
