#pragma once

// Relational features, reserved-entity selection and k-nearest reserved
// entity retrieval.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "earl/common.hpp"
#include "earl/kg.hpp"

namespace earl {

// Sparse count vector of logical length 2|R|. Dimension r counts the entity as
// head of relation r; dimension |R|+r counts it as tail of r.
struct RelationalFeature {
  Index entity = 0;
  std::vector<std::pair<Index, std::uint32_t>> counts;  // sorted by dimension, non-zero only
  double norm = 0.0;

  std::uint32_t at(Index dim) const {
    auto it = std::lower_bound(counts.begin(), counts.end(), dim,
                               [](const auto& p, Index d) { return p.first < d; });
    return it != counts.end() && it->first == dim ? it->second : 0;
  }

  std::vector<std::uint32_t> dense(std::size_t num_relations) const {
    std::vector<std::uint32_t> v(2 * num_relations, 0);
    for (auto [d, c] : counts) v[d] = c;
    return v;
  }

  friend bool operator==(const RelationalFeature&, const RelationalFeature&) = default;
};

inline std::vector<RelationalFeature> build_relational_features(const KnowledgeGraph& kg) {
  const auto nrel = static_cast<Index>(kg.num_relations());
  std::vector<RelationalFeature> out(kg.num_entities());
  parallel_for(kg.num_entities(), [&](std::size_t b, std::size_t e) {
    std::vector<std::uint32_t> scratch(2 * nrel, 0);
    for (std::size_t ent = b; ent < e; ++ent) {
      auto& f = out[ent];
      f.entity = static_cast<Index>(ent);
      for (const auto& n : kg.out_adj[ent]) ++scratch[n.relation];
      for (const auto& n : kg.in_adj[ent]) ++scratch[nrel + n.relation];
      std::uint64_t sq = 0;
      for (Index d = 0; d < 2 * nrel; ++d) {
        if (scratch[d] != 0) {
          f.counts.emplace_back(d, scratch[d]);
          sq += static_cast<std::uint64_t>(scratch[d]) * scratch[d];
          scratch[d] = 0;
        }
      }
      f.norm = std::sqrt(static_cast<double>(sq));
    }
  });
  return out;
}

inline std::uint64_t sparse_dot(const RelationalFeature& a, const RelationalFeature& b) {
  std::uint64_t dot = 0;
  auto i = a.counts.begin();
  auto j = b.counts.begin();
  while (i != a.counts.end() && j != b.counts.end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      dot += static_cast<std::uint64_t>(i->second) * j->second;
      ++i;
      ++j;
    }
  }
  return dot;
}

// Zero when either vector is zero. The dot product is exact integer
// arithmetic, so the result is bitwise symmetric.
inline double cosine_similarity(const RelationalFeature& a, const RelationalFeature& b) {
  if (a.norm == 0.0 || b.norm == 0.0) return 0.0;
  return static_cast<double>(sparse_dot(a, b)) / (a.norm * b.norm);
}

struct ReservedSet {
  std::vector<Index> indices;     // sorted ascending; row i of the reserved embedding matrix
  std::vector<std::int32_t> row;  // entity -> row in `indices`, or -1

  std::size_t size() const noexcept { return indices.size(); }
  bool contains(Index e) const { return row[e] >= 0; }

  static ReservedSet from_indices(std::size_t num_entities, std::vector<Index> idx) {
    std::sort(idx.begin(), idx.end());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) throw ConfigError("duplicate reserved entity");
    if (!idx.empty() && idx.back() >= num_entities) throw ConfigError("reserved entity index out of range");
    ReservedSet r;
    r.indices = std::move(idx);
    r.row.assign(num_entities, -1);
    for (std::size_t i = 0; i < r.indices.size(); ++i) r.row[r.indices[i]] = static_cast<std::int32_t>(i);
    return r;
  }
};

// Uniform sample of `count` distinct entities (partial Fisher-Yates).
inline ReservedSet select_reserved_count(std::size_t num_entities, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ConfigError("reserved set would be empty");
  if (count > num_entities) throw ConfigError("reserved count exceeds entity count");
  std::vector<Index> pool(num_entities);
  std::iota(pool.begin(), pool.end(), Index{0});
  Rng rng(mix_seed(seed, 0x5e5e7ed));
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + rng.below(num_entities - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return ReservedSet::from_indices(num_entities, std::move(pool));
}

inline std::size_t reserved_count_for(std::size_t num_entities, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("reserved fraction must lie in (0, 1]");
  // Guard against 0.1 * 14505 landing a hair under an integer.
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(num_entities) + 1e-9));
}

inline ReservedSet select_reserved(std::size_t num_entities, double fraction, std::uint64_t seed) {
  return select_reserved_count(num_entities, reserved_count_for(num_entities, fraction), seed);
}

struct ScoredEntity {
  Index entity = 0;
  double similarity = 0.0;
};

// Descending similarity, ascending entity index on ties.
inline bool ranks_before(const ScoredEntity& a, const ScoredEntity& b) {
  return a.similarity != b.similarity ? a.similarity > b.similarity : a.entity < b.entity;
}

inline std::vector<ScoredEntity> retrieve_topk(const RelationalFeature& query,
                                               std::span<const RelationalFeature> features,
                                               const ReservedSet& reserved, std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1");
  std::vector<ScoredEntity> all;
  all.reserve(reserved.size());
  for (Index r : reserved.indices) all.push_back({r, cosine_similarity(query, features[r])});
  const auto take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), ranks_before);
  all.resize(take);
  return all;
}

inline std::vector<double> knn_weights(std::span<const double> similarities) {
  if (similarities.empty()) throw ConfigError("knn_weights needs at least one similarity");
  const double mx = *std::max_element(similarities.begin(), similarities.end());
  std::vector<double> w(similarities.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) z += (w[i] = std::exp(similarities[i] - mx));
  for (auto& x : w) x /= z;
  return w;
}

// Precomputed top-k lists for every entity. Similarities are held at float32
// precision, matching the on-disk cache, so a reloaded index is identical.
struct KnnIndex {
  struct Entry {
    Index entity = 0;
    float similarity = 0.0f;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t k = 0;  // records per entity = min(requested k, |reserved|)
  std::uint64_t seed = 0;
  std::vector<Entry> entries;  // num_entities * k, row-major

  std::span<const Entry> of(Index e) const { return {entries.data() + static_cast<std::size_t>(e) * k, k}; }

  friend bool operator==(const KnnIndex&, const KnnIndex&) = default;
};

inline KnnIndex build_knn_index(const KnowledgeGraph& kg, std::span<const RelationalFeature> features,
                                const ReservedSet& reserved, std::size_t k, std::uint64_t seed) {
  if (reserved.size() == 0) throw ConfigError("kNN index needs a non-empty reserved set");
  KnnIndex idx;
  idx.num_entities = kg.num_entities();
  idx.num_relations = kg.num_relations();
  idx.k = std::min(k, reserved.size());
  idx.seed = seed;
  idx.entries.resize(idx.num_entities * idx.k);
  parallel_for(idx.num_entities, [&](std::size_t b, std::size_t e) {
    for (std::size_t ent = b; ent < e; ++ent) {
      const auto top = retrieve_topk(features[ent], features, reserved, idx.k);
      for (std::size_t i = 0; i < top.size(); ++i) {
        idx.entries[ent * idx.k + i] = {top[i].entity, static_cast<float>(top[i].similarity)};
      }
    }
  }, 16);
  return idx;
}

// ---------------------------------------------------------------------------
// Binary caches (little-endian).

namespace io {

inline void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  put_bytes(out, buf, sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw DataError("truncated " + what);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

inline void expect_magic(std::istream& in, const char (&magic)[9], const std::string& what) {
  char got[8];
  if (!in.read(got, 8) || std::memcmp(got, magic, 8) != 0) throw DataError(what + ": bad magic");
}

}  // namespace io

inline constexpr char kKnnMagic[9] = "EARLKNN1";
inline constexpr char kFeatureMagic[9] = "EARLFEA1";
inline constexpr std::uint32_t kCacheVersion = 1;

// Header: magic[8], u32 version, u32 |E|, u32 |R|, u32 k, u64 seed.
// Body: |E| * k records of (u32 reserved entity index, f32 similarity).
inline void save_knn_cache(const std::filesystem::path& path, const KnnIndex& idx) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  io::put_bytes(out, kKnnMagic, 8);
  io::put<std::uint32_t>(out, kCacheVersion);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(idx.num_entities));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(idx.num_relations));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(idx.k));
  io::put<std::uint64_t>(out, idx.seed);
  for (const auto& e : idx.entries) {
    io::put<std::uint32_t>(out, e.entity);
    io::put<float>(out, e.similarity);
  }
}

inline KnnIndex load_knn_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const auto what = path.string();
  io::expect_magic(in, kKnnMagic, what);
  if (io::get<std::uint32_t>(in, what) != kCacheVersion) throw DataError(what + ": unsupported version");
  KnnIndex idx;
  idx.num_entities = io::get<std::uint32_t>(in, what);
  idx.num_relations = io::get<std::uint32_t>(in, what);
  idx.k = io::get<std::uint32_t>(in, what);
  idx.seed = io::get<std::uint64_t>(in, what);
  idx.entries.resize(idx.num_entities * idx.k);
  for (auto& e : idx.entries) {
    e.entity = io::get<std::uint32_t>(in, what);
    e.similarity = io::get<float>(in, what);
    if (e.entity >= idx.num_entities) throw DataError(what + ": entity index out of range");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(what + ": trailing bytes");
  return idx;
}

// Header: magic[8], u32 version, u32 |E|, u32 |R|.
// Body per entity: u32 nnz, then nnz * (u32 dimension, u32 count).
inline void save_feature_cache(const std::filesystem::path& path, std::span<const RelationalFeature> features,
                               std::size_t num_relations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  io::put_bytes(out, kFeatureMagic, 8);
  io::put<std::uint32_t>(out, kCacheVersion);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(features.size()));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(num_relations));
  for (const auto& f : features) {
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.counts.size()));
    for (auto [d, c] : f.counts) {
      io::put<std::uint32_t>(out, d);
      io::put<std::uint32_t>(out, c);
    }
  }
}

inline std::vector<RelationalFeature> load_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const auto what = path.string();
  io::expect_magic(in, kFeatureMagic, what);
  if (io::get<std::uint32_t>(in, what) != kCacheVersion) throw DataError(what + ": unsupported version");
  const auto n = io::get<std::uint32_t>(in, what);
  const auto nrel = io::get<std::uint32_t>(in, what);
  std::vector<RelationalFeature> out(n);
  for (std::uint32_t e = 0; e < n; ++e) {
    auto& f = out[e];
    f.entity = e;
    const auto nnz = io::get<std::uint32_t>(in, what);
    std::uint64_t sq = 0;
    for (std::uint32_t i = 0; i < nnz; ++i) {
      const auto d = io::get<std::uint32_t>(in, what);
      const auto c = io::get<std::uint32_t>(in, what);
      if (d >= 2 * nrel) throw DataError(what + ": feature dimension out of range");
      f.counts.emplace_back(d, c);
      sq += static_cast<std::uint64_t>(c) * c;
    }
    f.norm = std::sqrt(static_cast<double>(sq));
  }
  return out;
}

}  // namespace earl
