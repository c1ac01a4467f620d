#pragma once

// A prepared dataset: graph, relational features, reserved set and kNN index,
// plus the on-disk bundle that caches them.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "earl/common.hpp"
#include "earl/features.hpp"
#include "earl/kg.hpp"
#include "json.hpp"

namespace earl {

struct DatasetStats {
  const char* name;
  std::size_t entities, relations, train, valid, test;
  double gamma;
  std::size_t dim;  // published model dimension
};

// Published benchmark statistics (entity and relation counts from the
// training split).
inline constexpr DatasetStats kKnownDatasets[] = {
    {"fb15k237", 14505, 237, 272115, 17526, 20438, 10.0, 150},
    {"wn18rr", 40559, 11, 86835, 2824, 2924, 10.0, 200},
    {"codex-l", 77951, 69, 551193, 30622, 30622, 10.0, 100},
    {"yago3-10", 123143, 37, 1079040, 4978, 4982, 15.0, 100},
};

inline std::string canonical_dataset_name(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '_') c = '-';
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (out == "fb15k-237") return "fb15k237";
  if (out == "codexl") return "codex-l";
  if (out == "yago3_10" || out == "yago310") return "yago3-10";
  return out;
}

inline std::optional<DatasetStats> known_dataset(const std::string& name) {
  const auto c = canonical_dataset_name(name);
  for (const auto& d : kKnownDatasets) {
    if (c == d.name) return d;
  }
  return std::nullopt;
}

// Margin default: 15 for YAGO3-10, 10 otherwise.
inline double default_gamma(const std::string& dataset) {
  if (auto d = known_dataset(dataset)) return d->gamma;
  return 10.0;
}

inline std::size_t default_dim(const std::string& dataset) {
  if (auto d = known_dataset(dataset)) return d->dim;
  return 150;
}

struct Dataset {
  std::string name;
  KnowledgeGraph kg;
  std::vector<RelationalFeature> features;
  ReservedSet reserved;
  KnnIndex knn;
  std::uint64_t index_seed = 0;
  std::size_t requested_k = 0;
};

// (Re)selects the reserved set and rebuilds the kNN index when the requested
// reserved count, k or seed differ from what the dataset holds.
inline void ensure_index(Dataset& ds, std::size_t k, std::size_t reserved_count, std::uint64_t seed) {
  const auto n = ds.kg.num_entities();
  const bool same_reserved = ds.reserved.size() == reserved_count && ds.index_seed == seed && ds.reserved.row.size() == n;
  if (!same_reserved) ds.reserved = select_reserved_count(n, reserved_count, seed);
  if (!same_reserved || ds.requested_k != k || ds.knn.num_entities != n) {
    ds.knn = build_knn_index(ds.kg, ds.features, ds.reserved, k, seed);
  }
  ds.index_seed = seed;
  ds.requested_k = k;
}

inline Dataset prepare_dataset(KnowledgeGraph kg, std::string name, std::size_t k, std::size_t reserved_count,
                               std::uint64_t seed) {
  Dataset ds;
  ds.name = std::move(name);
  ds.kg = std::move(kg);
  ds.features = build_relational_features(ds.kg);
  ensure_index(ds, k, reserved_count, seed);
  return ds;
}

// ---------------------------------------------------------------------------
// Bundle directory

namespace bundle {

inline constexpr int kFormatVersion = 1;

inline std::uint64_t file_checksum(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

inline void write_index_tsv(const std::filesystem::path& p, const std::vector<Triple>& ts) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  for (const auto& t : ts) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
}

inline std::vector<Triple> read_index_tsv(const std::filesystem::path& p, std::size_t ne, std::size_t nr) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::vector<Triple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::uint64_t h, r, t;
    if (!(ls >> h >> r >> t)) throw ParseError(p.string(), lineno, "expected three integer indices");
    if (h >= ne || t >= ne || r >= nr) throw ParseError(p.string(), lineno, "index outside vocabulary");
    out.push_back({static_cast<Index>(h), static_cast<Index>(r), static_cast<Index>(t)});
  }
  return out;
}

struct Sources {
  std::filesystem::path train, valid, test;
};

inline nlohmann::json stats_json(const Dataset& ds) {
  const auto& kg = ds.kg;
  return {{"name", ds.name},
          {"entities", kg.num_entities()},
          {"relations", kg.num_relations()},
          {"train", kg.train.size()},
          {"valid", kg.valid.size()},
          {"test", kg.test.size()},
          {"valid_unseen", kg.valid_unseen},
          {"test_unseen", kg.test_unseen},
          {"train_duplicates_dropped", kg.train_duplicates}};
}

// Writes vocabularies, index-form splits, reserved set, feature and kNN
// caches, and stats.json. Contents depend only on inputs and settings.
inline void save(const std::filesystem::path& dir, const Dataset& ds, const Sources* sources = nullptr) {
  std::filesystem::create_directories(dir);
  save_vocabulary(dir / "entities.json", ds.kg.entities);
  save_vocabulary(dir / "relations.json", ds.kg.relations);
  write_index_tsv(dir / "train.tsv", ds.kg.train);
  write_index_tsv(dir / "valid.tsv", ds.kg.valid);
  write_index_tsv(dir / "test.tsv", ds.kg.test);
  save_feature_cache(dir / "features.bin", ds.features, ds.kg.num_relations());
  save_knn_cache(dir / "knn.bin", ds.knn);
  {
    std::ofstream out(dir / "reserved.json", std::ios::binary);
    out << nlohmann::json(ds.reserved.indices).dump() << '\n';
  }
  auto stats = stats_json(ds);
  stats["format_version"] = kFormatVersion;
  stats["k"] = ds.requested_k;
  stats["reserved_count"] = ds.reserved.size();
  stats["seed"] = ds.index_seed;
  if (sources) {
    nlohmann::json src;
    for (auto [key, path] : {std::pair{"train", &sources->train}, std::pair{"valid", &sources->valid},
                             std::pair{"test", &sources->test}}) {
      src[key] = {{"path", path->string()}, {"fnv1a64", hex(file_checksum(*path))}};
    }
    stats["sources"] = src;
  }
  std::ofstream out(dir / "stats.json", std::ios::binary);
  out << stats.dump(2) << '\n';
}

inline Dataset load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("bundle directory not found: " + dir.string());
  nlohmann::json stats;
  {
    std::ifstream in(dir / "stats.json", std::ios::binary);
    if (!in) throw DataError("missing " + (dir / "stats.json").string());
    try {
      stats = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError((dir / "stats.json").string() + ": " + e.what());
    }
  }
  if (stats.value("format_version", 0) != kFormatVersion) throw DataError("unsupported bundle format");
  Dataset ds;
  ds.name = stats.value("name", std::string("unnamed"));
  auto& kg = ds.kg;
  kg.entities = load_vocabulary(dir / "entities.json");
  kg.relations = load_vocabulary(dir / "relations.json");
  const auto ne = kg.num_entities(), nr = kg.num_relations();
  kg.train = read_index_tsv(dir / "train.tsv", ne, nr);
  kg.valid = read_index_tsv(dir / "valid.tsv", ne, nr);
  kg.test = read_index_tsv(dir / "test.tsv", ne, nr);
  kg.valid_unseen = stats.value("valid_unseen", std::size_t{0});
  kg.test_unseen = stats.value("test_unseen", std::size_t{0});
  kg.train_duplicates = stats.value("train_duplicates_dropped", std::size_t{0});
  kg.build_adjacency();
  ds.features = load_feature_cache(dir / "features.bin");
  if (ds.features.size() != ne) throw DataError("feature cache does not match the vocabulary");
  std::vector<Index> reserved;
  {
    std::ifstream in(dir / "reserved.json", std::ios::binary);
    if (!in) throw DataError("missing reserved.json");
    reserved = nlohmann::json::parse(in).get<std::vector<Index>>();
  }
  ds.reserved = ReservedSet::from_indices(ne, std::move(reserved));
  ds.knn = load_knn_cache(dir / "knn.bin");
  if (ds.knn.num_entities != ne || ds.knn.num_relations != nr) throw DataError("kNN cache does not match the vocabulary");
  ds.index_seed = stats.value("seed", std::uint64_t{0});
  ds.requested_k = stats.value("k", ds.knn.k);
  return ds;
}

}  // namespace bundle

}  // namespace earl
