#pragma once

// Checkpoint directory: manifest.json (tensor names, shapes, dtype, config,
// step) and tensors.bin (little-endian payloads concatenated in manifest
// order). float64 checkpoints resume bit-exactly; float32 is an export format.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "earl/adam.hpp"
#include "earl/common.hpp"
#include "earl/config.hpp"
#include "earl/encoder.hpp"
#include "earl/features.hpp"
#include "json.hpp"

namespace earl {

enum class Dtype { kFloat64, kFloat32 };

inline const char* dtype_name(Dtype d) { return d == Dtype::kFloat64 ? "float64" : "float32"; }

// Identifies the dataset a checkpoint was trained against.
struct DatasetFingerprint {
  std::string name;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::vector<Index> reserved;  // empty when reserved entities are disabled
};

struct Checkpoint {
  TrainConfig config;
  DatasetFingerprint dataset;
  std::size_t step = 0;
  ModelParams params;
  std::optional<AdamState> adam;
  std::string run_manifest;  // path of the RunManifest that produced it
};

namespace detail {

inline void write_tensor(std::ostream& out, const ad::Tensor& t, Dtype dtype) {
  for (double x : t.data()) {
    if (dtype == Dtype::kFloat64) {
      io::put<double>(out, x);
    } else {
      io::put<float>(out, static_cast<float>(x));
    }
  }
}

inline void read_tensor(std::istream& in, ad::Tensor& t, Dtype dtype, const std::string& what) {
  for (auto& x : t.data()) x = dtype == Dtype::kFloat64 ? io::get<double>(in, what) : io::get<float>(in, what);
}

inline nlohmann::json shape_json(const ad::Tensor& t) { return nlohmann::json(t.shape()); }

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck, Dtype dtype = Dtype::kFloat64) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  nlohmann::json tensors = nlohmann::json::array();
  std::ofstream payload(tmp / "tensors.bin", std::ios::binary);
  if (!payload) throw DataError("cannot write checkpoint payload in " + tmp.string());
  const auto params = ck.params.all();
  for (const auto* p : params) {
    tensors.push_back({{"name", p->name}, {"shape", detail::shape_json(p->value)}});
    detail::write_tensor(payload, p->value, dtype);
  }
  if (ck.adam && !ck.adam->m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      tensors.push_back({{"name", "adam.m." + params[i]->name}, {"shape", detail::shape_json(ck.adam->m[i])}});
      detail::write_tensor(payload, ck.adam->m[i], dtype);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      tensors.push_back({{"name", "adam.v." + params[i]->name}, {"shape", detail::shape_json(ck.adam->v[i])}});
      detail::write_tensor(payload, ck.adam->v[i], dtype);
    }
  }
  payload.close();

  nlohmann::json m{{"format", "earl-checkpoint"},
                   {"version", 1},
                   {"dtype", dtype_name(dtype)},
                   {"step", ck.step},
                   {"config", to_json(ck.config)},
                   {"model",
                    {{"dim", ck.params.config.dim},
                     {"width", ck.params.config.width()},
                     {"num_relations", ck.params.config.num_relations},
                     {"num_reserved", ck.params.config.num_reserved},
                     {"layers", ck.params.config.layers},
                     {"seed", ck.params.config.seed},
                     {"flags", to_json(ck.params.config.flags)}}},
                   {"dataset",
                    {{"name", ck.dataset.name},
                     {"num_entities", ck.dataset.num_entities},
                     {"num_relations", ck.dataset.num_relations},
                     {"reserved", ck.dataset.reserved}}},
                   {"param_count", ck.params.size()},
                   {"tensors", tensors},
                   {"run_manifest", ck.run_manifest}};
  if (ck.adam) m["adam_step"] = ck.adam->step;
  {
    std::ofstream out(tmp / "manifest.json", std::ios::binary);
    out << m.dump(2) << '\n';
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  std::ifstream in(mpath, std::ios::binary);
  if (!in) throw DataError("checkpoint manifest not found: " + mpath.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(mpath.string() + ": " + e.what());
  }
  if (m.value("format", "") != "earl-checkpoint") throw DataError(mpath.string() + ": not a checkpoint manifest");
  const auto dtype_s = m.value("dtype", "");
  if (dtype_s != "float64" && dtype_s != "float32") throw DataError(mpath.string() + ": unknown dtype " + dtype_s);
  const Dtype dtype = dtype_s == "float64" ? Dtype::kFloat64 : Dtype::kFloat32;

  Checkpoint ck;
  ck.config = train_config_from_json(m.at("config"));
  ck.step = m.at("step").get<std::size_t>();
  ck.run_manifest = m.value("run_manifest", "");
  const auto& d = m.at("dataset");
  ck.dataset.name = d.value("name", "");
  ck.dataset.num_entities = d.at("num_entities").get<std::size_t>();
  ck.dataset.num_relations = d.at("num_relations").get<std::size_t>();
  ck.dataset.reserved = d.at("reserved").get<std::vector<Index>>();

  const auto& mj = m.at("model");
  ModelConfig mc;
  mc.dim = mj.at("dim").get<std::size_t>();
  mc.num_relations = mj.at("num_relations").get<std::size_t>();
  mc.num_reserved = mj.at("num_reserved").get<std::size_t>();
  mc.layers = mj.at("layers").get<std::size_t>();
  mc.seed = mj.at("seed").get<std::uint64_t>();
  mc.flags = flags_from_json(mj.at("flags"));
  ck.params = ModelParams(mc);

  const auto ppath = dir / "tensors.bin";
  std::ifstream payload(ppath, std::ios::binary);
  if (!payload) throw DataError("checkpoint payload not found: " + ppath.string());
  const auto what = ppath.string();
  auto params = ck.params.all();
  const auto& tensors = m.at("tensors");
  std::size_t idx = 0;
  auto next_into = [&](ad::Tensor& t, const std::string& expect) {
    if (idx >= tensors.size()) throw DataError(mpath.string() + ": missing tensor " + expect);
    const auto& e = tensors[idx++];
    if (e.at("name").get<std::string>() != expect) {
      throw DataError(mpath.string() + ": expected tensor " + expect + ", found " + e.at("name").get<std::string>());
    }
    if (e.at("shape").get<ad::Shape>() != t.shape()) throw DataError(mpath.string() + ": shape mismatch for " + expect);
    detail::read_tensor(payload, t, dtype, what);
  };
  for (auto* p : params) next_into(p->value, p->name);
  if (idx < tensors.size()) {
    AdamState st;
    st.step = m.value("adam_step", std::uint64_t{0});
    for (auto* p : params) {
      st.m.push_back(ad::Tensor::zeros_like(p->value));
      next_into(st.m.back(), "adam.m." + p->name);
    }
    for (auto* p : params) {
      st.v.push_back(ad::Tensor::zeros_like(p->value));
      next_into(st.v.back(), "adam.v." + p->name);
    }
    ck.adam = std::move(st);
  }
  if (payload.peek() != std::char_traits<char>::eof()) throw DataError(what + ": trailing bytes");
  for (auto* p : params) p->grad = ad::Tensor::zeros_like(p->value);
  return ck;
}

}  // namespace earl
