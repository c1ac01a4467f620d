#pragma once

// Synthetic graphs with planted structure, for tests and smoke runs.

#include <cstdint>
#include <vector>

#include "earl/common.hpp"
#include "earl/kg.hpp"

namespace earl {

struct PlantedGraphSpec {
  std::size_t entities = 200;
  std::size_t relations = 8;
  std::size_t communities = 10;  // entity e sits at position e / communities of ring e % communities
  std::uint64_t seed = 1;
};

// Each community is a ring and relation r links every member to the member
// shift[r] positions further along, with shifts distinct across relations.
// Every entity heads and receives exactly one triple per relation, and each
// community withholds all triples of one relation for test and of another for
// validation. Train relation counts are therefore identical within a
// community: they identify the community but never a position on its ring,
// which only the neighbourhood reveals. Shifts compose like rotations, so a
// withheld relation is predictable from the other communities.
inline KnowledgeGraph planted_graph(const PlantedGraphSpec& spec) {
  if (spec.communities == 0 || spec.entities % spec.communities != 0) {
    throw ConfigError("planted graph needs the entity count to be a multiple of the community count");
  }
  const std::size_t ring = spec.entities / spec.communities;
  if (spec.relations < 3 || spec.relations >= ring) {
    throw ConfigError("planted graph needs at least 3 relations and more ring positions than relations");
  }
  Rng rng(mix_seed(spec.seed, 0x9a7));

  std::vector<std::size_t> shifts(ring - 1);
  for (std::size_t i = 0; i < shifts.size(); ++i) shifts[i] = i + 1;
  for (std::size_t i = 0; i < spec.relations; ++i) std::swap(shifts[i], shifts[i + rng.below(shifts.size() - i)]);

  std::vector<Triple> train, valid, test;
  for (std::size_t c = 0; c < spec.communities; ++c) {
    const auto test_rel = (c + rng.below(spec.relations)) % spec.relations;
    const auto valid_rel = (test_rel + 1 + rng.below(spec.relations - 1)) % spec.relations;
    for (std::size_t pos = 0; pos < ring; ++pos) {
      const auto e = pos * spec.communities + c;
      for (std::size_t r = 0; r < spec.relations; ++r) {
        const auto t = ((pos + shifts[r]) % ring) * spec.communities + c;
        const Triple tr{static_cast<Index>(e), static_cast<Index>(r), static_cast<Index>(t)};
        (r == test_rel ? test : r == valid_rel ? valid : train).push_back(tr);
      }
    }
  }
  return KnowledgeGraph::from_triples(spec.entities, spec.relations, std::move(train), std::move(valid),
                                      std::move(test));
}

// Uniformly random triples over small vocabularies (for oracle tests).
inline KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t triples, Rng& rng) {
  std::vector<Triple> ts;
  for (std::size_t i = 0; i < triples; ++i) {
    ts.push_back({static_cast<Index>(rng.below(entities)), static_cast<Index>(rng.below(relations)),
                  static_cast<Index>(rng.below(entities))});
  }
  return KnowledgeGraph::from_triples(entities, relations, std::move(ts));
}

}  // namespace earl
