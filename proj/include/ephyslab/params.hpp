#pragma once

// Named parameter store. Each entry carries a role class that fixes its
// initialization and learning-rate multiplier under width scaling: hidden
// matrices shrink init variance with fan-in and their adaptive-optimizer step
// with the width multiplier m, output-side projections additionally shrink
// init by m, while inputs, biases, norm gains, scalars and embedding tables
// keep width-independent steps. Checkpoints are a flat little-endian f64 blob
// plus a manifest documenting every group.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ephyslab/container.hpp"
#include "ephyslab/ndcore.hpp"

namespace ephyslab::params {

enum class ParamClass { input, hidden, output, bias, norm, scalar, embedding };

inline std::string to_string(ParamClass c) {
  switch (c) {
    case ParamClass::input: return "input";
    case ParamClass::hidden: return "hidden";
    case ParamClass::output: return "output";
    case ParamClass::bias: return "bias";
    case ParamClass::norm: return "norm";
    case ParamClass::scalar: return "scalar";
    case ParamClass::embedding: return "embedding";
  }
  throw ConfigError("unknown parameter class");
}

inline ParamClass param_class_from_string(const std::string& s) {
  if (s == "input") return ParamClass::input;
  if (s == "hidden") return ParamClass::hidden;
  if (s == "output") return ParamClass::output;
  if (s == "bias") return ParamClass::bias;
  if (s == "norm") return ParamClass::norm;
  if (s == "scalar") return ParamClass::scalar;
  if (s == "embedding") return ParamClass::embedding;
  throw ConfigError("unknown parameter class: " + s);
}

struct MuPConfig {
  std::int64_t base_width = 32;
  double embedding_std = 0.1;

  double width_multiplier(std::int64_t d_model) const {
    return static_cast<double>(d_model) / static_cast<double>(base_width);
  }
};

struct ParamEntry {
  std::string name;
  ParamClass cls = ParamClass::hidden;
  std::int64_t fan_in = 0;
  double init_std = 0.0;
  double lr_mult = 1.0;
  ndcore::RealArray value;
  ndcore::RealArray grad;
  ndcore::RealArray m1;  // adaptive-moment state
  ndcore::RealArray m2;
};

class ParamStore {
 public:
  ParamStore(MuPConfig mup, std::int64_t d_model) : mup_(mup), d_model_(d_model) {}

  // Declares a parameter; fan_in drives weight-class init variance.
  void add(const std::string& name, std::vector<std::int64_t> shape, ParamClass cls,
           std::int64_t fan_in = 0) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    ParamEntry e;
    e.name = name;
    e.cls = cls;
    e.fan_in = fan_in;
    e.value = ndcore::RealArray(shape);
    e.grad = ndcore::RealArray(shape);
    e.m1 = ndcore::RealArray(shape);
    e.m2 = ndcore::RealArray(std::move(shape));
    const double m = mup_.width_multiplier(d_model_);
    switch (cls) {
      case ParamClass::input:
        e.init_std = 1.0 / std::sqrt(static_cast<double>(fan_in));
        e.lr_mult = 1.0;
        break;
      case ParamClass::hidden:
        e.init_std = 1.0 / std::sqrt(static_cast<double>(fan_in));
        e.lr_mult = 1.0 / m;
        break;
      case ParamClass::output:
        e.init_std = 1.0 / std::sqrt(static_cast<double>(fan_in) * m);
        e.lr_mult = 1.0 / m;
        break;
      case ParamClass::bias:
      case ParamClass::scalar:
        e.init_std = 0.0;
        e.lr_mult = 1.0;
        break;
      case ParamClass::norm:
        e.init_std = 0.0;
        e.lr_mult = 1.0;
        for (auto& v : e.value.data) v = 1.0;
        break;
      case ParamClass::embedding:
        e.init_std = mup_.embedding_std;
        e.lr_mult = 1.0;
        break;
    }
    if ((cls == ParamClass::input || cls == ParamClass::hidden || cls == ParamClass::output) &&
        fan_in <= 0)
      throw ConfigError("weight parameter " + name + " needs a positive fan_in");
    index_[name] = entries_.size();
    entries_.push_back(std::move(e));
  }

  // Draws weights in declaration order; biases/scalars stay zero, gains one.
  void init(ndcore::SeededRng& rng) {
    for (auto& e : entries_) {
      if (e.init_std == 0.0) continue;
      for (auto& v : e.value.data) v = e.init_std * rng.normal();
    }
  }

  ParamEntry& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return entries_[it->second];
  }
  const ParamEntry& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  const MuPConfig& mup() const { return mup_; }
  std::int64_t d_model() const { return d_model_; }

  std::int64_t total_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_)
      for (auto& g : e.grad.data) g = 0.0;
  }

  // ---- checkpoint io ----

  void save(const std::filesystem::path& dir, std::int64_t step) const {
    std::filesystem::create_directories(dir);
    std::string blob;
    blob.reserve(static_cast<std::size_t>(total_count()) * 8);
    nlohmann::ordered_json man;
    man["format"] = "ephyslab-checkpoint-v1";
    man["step"] = step;
    man["mup"] = {{"base_width", mup_.base_width},
                  {"d_model", d_model_},
                  {"width_multiplier", mup_.width_multiplier(d_model_)},
                  {"embedding_std", mup_.embedding_std}};
    man["params"] = nlohmann::ordered_json::array();
    std::int64_t offset = 0;
    for (const auto& e : entries_) {
      nlohmann::ordered_json p;
      p["name"] = e.name;
      p["class"] = to_string(e.cls);
      p["shape"] = e.value.shape;
      p["offset"] = offset;
      p["count"] = e.value.size();
      p["fan_in"] = e.fan_in;
      p["init_std"] = e.init_std;
      p["lr_mult"] = e.lr_mult;
      man["params"].push_back(std::move(p));
      offset += e.value.size();
      const char* bytes = reinterpret_cast<const char*>(e.value.data.data());
      blob.append(bytes, e.value.data.size() * 8);
    }
    ingest::write_file_atomic(dir / "params.f64le", blob);
    ingest::write_file_atomic(dir / "manifest.json", man.dump(2) + "\n");
  }

  // Loads values into an identically declared store; returns the step counter.
  std::int64_t load(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw DataError("cannot open " + (dir / "manifest.json").string());
    nlohmann::json man;
    try {
      mf >> man;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed " + (dir / "manifest.json").string() + ": " + e.what());
    }
    if (man.value("format", "") != "ephyslab-checkpoint-v1")
      throw DataError("unrecognized checkpoint format in " + (dir / "manifest.json").string());
    std::ifstream bf(dir / "params.f64le", std::ios::binary);
    if (!bf) throw DataError("cannot open " + (dir / "params.f64le").string());
    std::string blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());
    const auto& plist = man.at("params");
    if (plist.size() != entries_.size())
      throw DataError("checkpoint has a different parameter list");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& p = plist[i];
      auto& e = entries_[i];
      if (p.at("name").get<std::string>() != e.name ||
          p.at("shape").get<std::vector<std::int64_t>>() != e.value.shape)
        throw DataError("checkpoint entry mismatch at " + e.name);
      const std::size_t offset = p.at("offset").get<std::size_t>() * 8;
      const std::size_t bytes = e.value.data.size() * 8;
      if (offset + bytes > blob.size())
        throw DataError("checkpoint blob shorter than the manifest claims");
      std::memcpy(e.value.data.data(), blob.data() + offset, bytes);
    }
    return man.at("step").get<std::int64_t>();
  }

 private:
  MuPConfig mup_;
  std::int64_t d_model_;
  std::vector<ParamEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace ephyslab::params
