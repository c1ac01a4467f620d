#pragma once

// Filtered link-prediction ranking and the MRR / Hits@k / Effi report.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "earl/autodiff.hpp"
#include "earl/common.hpp"
#include "earl/encoder.hpp"
#include "earl/kg.hpp"
#include "earl/scoring.hpp"
#include "json.hpp"

namespace earl {

struct Embeddings {
  ad::Tensor entities;   // |E| x D
  ad::Tensor relations;  // |R| x D
};

inline Embeddings compute_embeddings(ModelParams& p, const EncoderGraph& g, const EdgeSet& edges) {
  ad::Tape tape;
  auto enc = encode(tape, p, g, edges);
  return {enc.entities.value(), enc.relations.value()};
}

// Known true tails per (head, relation) and heads per (relation, tail).
class FilterIndex {
 public:
  FilterIndex() = default;

  explicit FilterIndex(const TripleSet& known) {
    for (const auto& t : known) {
      tails_[key(t.head, t.relation)].push_back(t.tail);
      heads_[key(t.relation, t.tail)].push_back(t.head);
    }
  }

  std::span<const Index> true_tails(Index h, Index r) const { return lookup(tails_, key(h, r)); }
  std::span<const Index> true_heads(Index r, Index t) const { return lookup(heads_, key(r, t)); }

 private:
  using Map = std::unordered_map<std::uint64_t, std::vector<Index>>;
  static std::uint64_t key(Index a, Index b) { return (static_cast<std::uint64_t>(a) << 32) | b; }
  static std::span<const Index> lookup(const Map& m, std::uint64_t k) {
    auto it = m.find(k);
    if (it == m.end()) return {};
    return it->second;
  }
  Map tails_, heads_;
};

// Scores every entity in the corrupted slot of `query`.
inline void score_candidates(const Triple& query, Corruption slot, const Embeddings& emb, std::vector<double>& out) {
  const auto n = emb.entities.rows();
  out.resize(n);
  const auto r = emb.relations.row(query.relation);
  if (slot == Corruption::kTail) {
    const auto h = emb.entities.row(query.head);
    for (std::size_t e = 0; e < n; ++e) out[e] = rotate_score(h, r, emb.entities.row(e));
  } else {
    const auto t = emb.entities.row(query.tail);
    for (std::size_t e = 0; e < n; ++e) out[e] = rotate_score(emb.entities.row(e), r, t);
  }
}

// rank = 1 + #strictly better + floor(#ties / 2) among candidates other than
// the answer. With a filter, candidates forming another known triple are
// dropped first.
inline std::size_t rank_triple(const Triple& query, Corruption slot, const Embeddings& emb, const FilterIndex* filter,
                               std::vector<double>& scratch) {
  score_candidates(query, slot, emb, scratch);
  const Index answer = slot == Corruption::kTail ? query.tail : query.head;
  if (filter) {
    const auto known = slot == Corruption::kTail ? filter->true_tails(query.head, query.relation)
                                                 : filter->true_heads(query.relation, query.tail);
    for (Index e : known) {
      if (e != answer) scratch[e] = -std::numeric_limits<double>::infinity();
    }
  }
  const double target = scratch[answer];
  std::size_t better = 0, ties = 0;
  for (std::size_t e = 0; e < scratch.size(); ++e) {
    if (e == answer) continue;
    if (scratch[e] > target) {
      ++better;
    } else if (scratch[e] == target) {
      ++ties;
    }
  }
  return 1 + better + ties / 2;
}

inline std::size_t rank_triple(const Triple& query, Corruption slot, const Embeddings& emb, const FilterIndex* filter) {
  std::vector<double> scratch;
  return rank_triple(query, slot, emb, filter, scratch);
}

struct EvalReport {
  std::string split;
  std::size_t triples = 0;
  std::size_t queries = 0;  // two per triple
  std::size_t skipped_triples = 0;
  double mrr = 0.0;
  std::map<int, double> hits;  // k -> fraction
  std::size_t param_count = 0;
  double effi = 0.0;  // mrr per million parameters
  nlohmann::json config;

  void set_param_count(std::size_t n) {
    param_count = n;
    effi = n > 0 ? mrr / (static_cast<double>(n) / 1e6) : 0.0;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"split", split},
                     {"triples", triples},
                     {"queries", queries},
                     {"skipped_triples", skipped_triples},
                     {"mrr", mrr},
                     {"param_count", param_count},
                     {"effi", effi}};
    for (auto [k, v] : hits) j["hits@" + std::to_string(k)] = v;
    if (!config.is_null()) j["config"] = config;
    return j;
  }

  static std::string csv_header() { return "label,dim,reserved,param_count,mrr,hits1,hits3,hits10,effi"; }

  std::string csv_row(const std::string& label, std::size_t dim, std::size_t reserved) const {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << label << ',' << dim << ',' << reserved << ',' << param_count << ',' << mrr << ','
       << hits.at(1) << ',' << hits.at(3) << ',' << hits.at(10) << ',' << effi;
    return os.str();
  }
};

inline constexpr int kHitsAt[] = {1, 3, 10};

// Averages over head- and tail-corrupted queries of every triple.
inline EvalReport evaluate_ranking(const Embeddings& emb, std::span<const Triple> triples, const FilterIndex& filter,
                                   std::size_t skipped = 0) {
  std::vector<std::size_t> ranks(2 * triples.size());
  parallel_for(triples.size(), [&](std::size_t lo, std::size_t hi) {
    std::vector<double> scratch;
    for (std::size_t i = lo; i < hi; ++i) {
      ranks[2 * i] = rank_triple(triples[i], Corruption::kHead, emb, &filter, scratch);
      ranks[2 * i + 1] = rank_triple(triples[i], Corruption::kTail, emb, &filter, scratch);
    }
  }, 4);
  EvalReport rep;
  rep.triples = triples.size();
  rep.queries = ranks.size();
  rep.skipped_triples = skipped;
  for (int k : kHitsAt) rep.hits[k] = 0.0;
  if (ranks.empty()) return rep;
  double rr = 0.0;
  std::map<int, std::size_t> hit_counts;
  for (auto r : ranks) {
    rr += 1.0 / static_cast<double>(r);
    for (int k : kHitsAt) hit_counts[k] += r <= static_cast<std::size_t>(k) ? 1 : 0;
  }
  const auto q = static_cast<double>(ranks.size());
  rep.mrr = rr / q;
  for (int k : kHitsAt) rep.hits[k] = static_cast<double>(hit_counts[k]) / q;
  return rep;
}

}  // namespace earl
