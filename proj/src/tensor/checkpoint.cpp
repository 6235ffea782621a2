#include "omnisal/tensor/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "omnisal/common/error.hpp"

namespace omnisal::ag {

using nlohmann::json;

Tensor& ParamStore::create(const std::string& name, Shape shape, bool requires_grad) {
  if (params_.count(name)) throw DataError("ParamStore: duplicate parameter '" + name + "'");
  auto [it, ok] = params_.emplace(name, Tensor::zeros(std::move(shape), requires_grad));
  (void)ok;
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw DataError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw DataError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, v] : params_) out.push_back(k);
  return out;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [k, v] : params_) out.push_back(v);
  return out;
}

std::vector<Tensor> ParamStore::tensors(const std::vector<std::string>& names) const {
  std::vector<Tensor> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(at(n));
  return out;
}

std::size_t ParamStore::total_parameters() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params_) n += v.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [k, v] : params_) v.zero_grad();
}

namespace {

json make_manifest(const std::map<std::string, Tensor>& params, bool as_f32) {
  json tensors = json::array();
  std::uint64_t offset = 0;
  const std::size_t elem = as_f32 ? 4 : 8;
  for (const auto& [name, t] : params) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    entry["count"] = t.size();
    tensors.push_back(entry);
    offset += t.size() * elem;
  }
  json m;
  m["format"] = "omnisal-checkpoint-v1";
  m["dtype"] = as_f32 ? "f32" : "f64";
  m["tensors"] = tensors;
  return m;
}

void write_blob(const std::string& path, const std::map<std::string, Tensor>& params, bool as_f32) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  for (const auto& [name, t] : params) {
    if (as_f32) {
      std::vector<float> buf(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(t.values()[i]);
      f.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    } else {
      f.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
  }
  if (!f) throw DataError("write failed: " + path);
}

struct ManifestEntry {
  Shape shape;
  std::uint64_t offset = 0;
  std::size_t count = 0;
};

std::pair<std::map<std::string, ManifestEntry>, bool> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open: " + path);
  json m;
  try {
    f >> m;
  } catch (const json::exception& e) {
    throw DataError("bad checkpoint manifest " + path + ": " + e.what());
  }
  if (m.value("format", "") != "omnisal-checkpoint-v1") {
    throw DataError("unrecognized checkpoint format in " + path);
  }
  const std::string dtype = m.value("dtype", "f64");
  if (dtype != "f64" && dtype != "f32") throw DataError("unknown checkpoint dtype: " + dtype);
  std::map<std::string, ManifestEntry> entries;
  for (const auto& t : m.at("tensors")) {
    ManifestEntry e;
    e.shape = t.at("shape").get<Shape>();
    e.offset = t.at("offset").get<std::uint64_t>();
    e.count = t.at("count").get<std::size_t>();
    if (shape_size(e.shape) != e.count) throw DataError("manifest shape/count mismatch");
    entries[t.at("name").get<std::string>()] = e;
  }
  return {entries, dtype == "f32"};
}

void read_tensor(std::ifstream& f, const ManifestEntry& e, bool is_f32, Tensor& dst) {
  f.seekg(static_cast<std::streamoff>(e.offset));
  auto& out = dst.raw_values();
  if (is_f32) {
    std::vector<float> buf(e.count);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(e.count * sizeof(float)));
    for (std::size_t i = 0; i < e.count; ++i) out[i] = static_cast<double>(buf[i]);
  } else {
    f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(e.count * sizeof(double)));
  }
  if (!f) throw DataError("checkpoint blob truncated");
}

}  // namespace

void ParamStore::save(const std::string& basename, bool as_f32) const {
  const json m = make_manifest(params_, as_f32);
  std::ofstream mf(basename + ".json");
  if (!mf) throw DataError("cannot open for writing: " + basename + ".json");
  mf << m.dump(2) << "\n";
  write_blob(basename + ".bin", params_, as_f32);
}

void ParamStore::save_subset(const std::string& basename, const std::vector<std::string>& names,
                             bool as_f32) const {
  std::map<std::string, Tensor> subset;
  for (const auto& n : names) subset.emplace(n, at(n));
  const json m = make_manifest(subset, as_f32);
  std::ofstream mf(basename + ".json");
  if (!mf) throw DataError("cannot open for writing: " + basename + ".json");
  mf << m.dump(2) << "\n";
  write_blob(basename + ".bin", subset, as_f32);
}

void ParamStore::load(const std::string& basename) {
  auto [entries, is_f32] = read_manifest(basename + ".json");
  if (entries.size() != params_.size()) {
    throw DataError("checkpoint has " + std::to_string(entries.size()) + " tensors, model expects " +
                    std::to_string(params_.size()));
  }
  std::ifstream f(basename + ".bin", std::ios::binary);
  if (!f) throw DataError("cannot open: " + basename + ".bin");
  for (auto& [name, t] : params_) {
    auto it = entries.find(name);
    if (it == entries.end()) throw DataError("checkpoint missing parameter '" + name + "'");
    if (it->second.shape != t.shape()) {
      throw DataError("checkpoint shape mismatch for '" + name + "': file " +
                      shape_str(it->second.shape) + " vs model " + shape_str(t.shape()));
    }
    read_tensor(f, it->second, is_f32, t);
  }
}

void ParamStore::load_partial(const std::string& basename) {
  auto [entries, is_f32] = read_manifest(basename + ".json");
  std::ifstream f(basename + ".bin", std::ios::binary);
  if (!f) throw DataError("cannot open: " + basename + ".bin");
  for (const auto& [name, e] : entries) {
    auto it = params_.find(name);
    if (it == params_.end()) throw DataError("checkpoint parameter '" + name + "' unknown to model");
    if (e.shape != it->second.shape()) {
      throw DataError("checkpoint shape mismatch for '" + name + "'");
    }
    read_tensor(f, e, is_f32, it->second);
  }
}

namespace init {

void zeros(Tensor& t) { std::fill(t.raw_values().begin(), t.raw_values().end(), 0.0); }

void constant(Tensor& t, double v) { std::fill(t.raw_values().begin(), t.raw_values().end(), v); }

void uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (auto& v : t.raw_values()) v = omnisal::uniform(rng, lo, hi);
}

void normal(Tensor& t, Rng& rng, double mean, double stddev) {
  for (auto& v : t.raw_values()) v = omnisal::normal(rng, mean, stddev);
}

void kaiming(Tensor& t, Rng& rng, std::size_t fan_in, double gain) {
  const double stddev = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
  normal(t, rng, 0.0, stddev);
}

}  // namespace init

}  // namespace omnisal::ag
