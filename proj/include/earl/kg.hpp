#pragma once

// Triple datasets: vocabularies, splits and adjacency.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "earl/common.hpp"
#include "json.hpp"

namespace earl {

struct Triple {
  Index head = 0;
  Index relation = 0;
  Index tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    return splitmix64((static_cast<std::uint64_t>(t.head) << 32) ^
                      (static_cast<std::uint64_t>(t.relation) << 20) ^ t.tail);
  }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

// Identifiers are opaque byte strings; order is first-insertion order.
class Vocabulary {
 public:
  Index intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<Index>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
  }

  std::optional<Index> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(Index i) const { return names_.at(i); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  nlohmann::json to_json() const { return nlohmann::json(names_); }

  static Vocabulary from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw DataError("vocabulary JSON must be an array of strings");
    Vocabulary v;
    for (const auto& s : j) {
      if (!s.is_string()) throw DataError("vocabulary JSON must be an array of strings");
      const auto before = v.size();
      v.intern(s.get<std::string>());
      if (v.size() == before) throw DataError("duplicate identifier in vocabulary: " + s.get<std::string>());
    }
    return v;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Index> index_;
};

inline void save_vocabulary(const std::filesystem::path& path, const Vocabulary& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << v.to_json().dump() << '\n';
}

inline Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return Vocabulary::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

struct RawTriple {
  std::string head, relation, tail;
  std::size_t line = 0;
};

// Reads head<TAB>relation<TAB>tail lines. A trailing '\r' is tolerated; blank
// lines are skipped.
inline std::vector<RawTriple> read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<RawTriple> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (a == std::string::npos || b == std::string::npos || line.find('\t', b + 1) != std::string::npos) {
      throw ParseError(path.string(), lineno, "expected 3 tab-separated fields");
    }
    RawTriple t{line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1), lineno};
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
      throw ParseError(path.string(), lineno, "empty field");
    }
    rows.push_back(std::move(t));
  }
  if (rows.empty()) throw DataError(path.string() + ": file contains no triples");
  return rows;
}

struct Vocabularies {
  Vocabulary entities;
  Vocabulary relations;
};

struct LoadResult {
  std::vector<Triple> triples;
  std::vector<RawTriple> unseen;  // only populated when a vocabulary was supplied
  std::size_t duplicates = 0;     // repeated lines dropped
  Vocabularies vocab;
};

namespace detail {
inline void dedup_in_order(std::vector<Triple>& triples, std::size_t& dropped) {
  TripleSet seen;
  seen.reserve(triples.size() * 2);
  std::vector<Triple> kept;
  kept.reserve(triples.size());
  for (const auto& t : triples) {
    if (seen.insert(t).second) kept.push_back(t);
  }
  dropped = triples.size() - kept.size();
  triples = std::move(kept);
}
}  // namespace detail

// Builds fresh vocabularies in first-occurrence order.
inline LoadResult load_triples(const std::filesystem::path& path) {
  LoadResult r;
  for (const auto& raw : read_tsv(path)) {
    r.triples.push_back({r.vocab.entities.intern(raw.head), r.vocab.relations.intern(raw.relation),
                         r.vocab.entities.intern(raw.tail)});
  }
  detail::dedup_in_order(r.triples, r.duplicates);
  return r;
}

// Resolves against an existing vocabulary. Lines naming identifiers outside it
// are returned in `unseen`.
inline LoadResult load_triples(const std::filesystem::path& path, const Vocabularies& vocab) {
  LoadResult r;
  for (auto& raw : read_tsv(path)) {
    const auto h = vocab.entities.find(raw.head);
    const auto rel = vocab.relations.find(raw.relation);
    const auto t = vocab.entities.find(raw.tail);
    if (h && rel && t) {
      r.triples.push_back({*h, *rel, *t});
    } else {
      r.unseen.push_back(std::move(raw));
    }
  }
  detail::dedup_in_order(r.triples, r.duplicates);
  r.vocab = vocab;
  return r;
}

struct Neighbor {
  Index relation = 0;
  Index entity = 0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

enum class Split { kValid, kTest };

struct KnowledgeGraph {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> train, valid, test;
  std::size_t valid_unseen = 0;  // triples dropped at load (identifiers outside vocabulary)
  std::size_t test_unseen = 0;
  std::size_t train_duplicates = 0;
  // out_adj[h] holds (r, t) and in_adj[t] holds (r, h) for every train triple.
  std::vector<std::vector<Neighbor>> out_adj, in_adj;

  std::size_t num_entities() const noexcept { return entities.size(); }
  std::size_t num_relations() const noexcept { return relations.size(); }
  std::size_t degree(Index e) const { return out_adj[e].size() + in_adj[e].size(); }

  const std::vector<Triple>& split(Split s) const { return s == Split::kValid ? valid : test; }

  void build_adjacency() {
    out_adj.assign(num_entities(), {});
    in_adj.assign(num_entities(), {});
    for (const auto& t : train) {
      out_adj[t.head].push_back({t.relation, t.tail});
      in_adj[t.tail].push_back({t.relation, t.head});
    }
  }

  // Throws DataError if any index falls outside the vocabularies.
  void validate() const {
    auto check = [&](const std::vector<Triple>& ts, const char* name) {
      for (const auto& t : ts) {
        if (t.head >= num_entities() || t.tail >= num_entities() || t.relation >= num_relations()) {
          throw DataError(std::string(name) + " split has an index outside the vocabulary");
        }
      }
    };
    check(train, "train");
    check(valid, "valid");
    check(test, "test");
  }

  static KnowledgeGraph load(const std::filesystem::path& train_path, const std::filesystem::path& valid_path,
                             const std::filesystem::path& test_path) {
    KnowledgeGraph kg;
    auto tr = load_triples(train_path);
    auto va = load_triples(valid_path, tr.vocab);
    auto te = load_triples(test_path, tr.vocab);
    kg.entities = std::move(tr.vocab.entities);
    kg.relations = std::move(tr.vocab.relations);
    kg.train = std::move(tr.triples);
    kg.train_duplicates = tr.duplicates;
    kg.valid = std::move(va.triples);
    kg.valid_unseen = va.unseen.size();
    kg.test = std::move(te.triples);
    kg.test_unseen = te.unseen.size();
    kg.build_adjacency();
    return kg;
  }

  // In-memory construction with synthetic names e<i> / r<i>.
  static KnowledgeGraph from_triples(std::size_t num_entities, std::size_t num_relations,
                                     std::vector<Triple> train, std::vector<Triple> valid = {},
                                     std::vector<Triple> test = {}) {
    KnowledgeGraph kg;
    for (std::size_t i = 0; i < num_entities; ++i) kg.entities.intern("e" + std::to_string(i));
    for (std::size_t i = 0; i < num_relations; ++i) kg.relations.intern("r" + std::to_string(i));
    kg.train = std::move(train);
    detail::dedup_in_order(kg.train, kg.train_duplicates);
    kg.valid = std::move(valid);
    kg.test = std::move(test);
    kg.validate();
    kg.build_adjacency();
    return kg;
  }
};

struct EvaluableSplit {
  std::vector<Triple> triples;
  std::size_t excluded = 0;  // includes triples already dropped at load
};

// Keeps triples whose head and tail both occur in some training triple.
inline EvaluableSplit filter_evaluable(const KnowledgeGraph& kg, Split s) {
  EvaluableSplit r;
  r.excluded = s == Split::kValid ? kg.valid_unseen : kg.test_unseen;
  for (const auto& t : kg.split(s)) {
    if (kg.degree(t.head) > 0 && kg.degree(t.tail) > 0) {
      r.triples.push_back(t);
    } else {
      ++r.excluded;
    }
  }
  return r;
}

// Union of all splits; the filter set for ranking.
inline TripleSet known_triples(const KnowledgeGraph& kg) {
  TripleSet s;
  s.reserve(2 * (kg.train.size() + kg.valid.size() + kg.test.size()));
  for (const auto* split : {&kg.train, &kg.valid, &kg.test}) s.insert(split->begin(), split->end());
  return s;
}

}  // namespace earl
