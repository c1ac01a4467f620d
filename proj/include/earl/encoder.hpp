#pragma once

// Entity-agnostic encoder. Only reserved entities own embedding rows; every
// other entity is encoded from its relational feature (connected relations),
// its k nearest reserved entities, and a relational GNN over the train graph.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "earl/autodiff.hpp"
#include "earl/common.hpp"
#include "earl/features.hpp"
#include "earl/kg.hpp"

namespace earl {

struct AblationFlags {
  bool use_reserved = true;
  bool use_conrel = true;
  bool use_knresent = true;
  bool use_mulhop = true;

  void validate() const {
    if (use_knresent && !use_reserved) {
      throw ConfigError("k-nearest reserved entity encoding requires reserved entities");
    }
  }

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

enum class Ablation { kFull, kNoReserved, kNoConRel, kNoKnResEnt, kNoConRelKnResEnt, kNoMulHop };

inline constexpr Ablation kAllAblations[] = {Ablation::kFull,      Ablation::kNoReserved,
                                             Ablation::kNoConRel,  Ablation::kNoKnResEnt,
                                             Ablation::kNoConRelKnResEnt, Ablation::kNoMulHop};

inline AblationFlags flags_for(Ablation a) {
  switch (a) {
    case Ablation::kFull: return {};
    case Ablation::kNoReserved: return {false, true, false, true};
    case Ablation::kNoConRel: return {true, false, true, true};
    case Ablation::kNoKnResEnt: return {true, true, false, true};
    case Ablation::kNoConRelKnResEnt: return {true, false, false, true};
    case Ablation::kNoMulHop: return {true, true, true, false};
  }
  return {};
}

inline const char* ablation_label(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "EARL";
    case Ablation::kNoReserved: return "w/o Reserved Entity";
    case Ablation::kNoConRel: return "w/o ConRel";
    case Ablation::kNoKnResEnt: return "w/o kNResEnt";
    case Ablation::kNoConRelKnResEnt: return "w/o ConRel + kNResEnt";
    case Ablation::kNoMulHop: return "w/o MulHop";
  }
  return "?";
}

struct ModelConfig {
  std::size_t dim = 150;  // complex dimension; real width is 2 * dim
  std::size_t num_relations = 0;
  std::size_t num_reserved = 0;
  std::size_t layers = 2;
  AblationFlags flags;
  std::uint64_t seed = 0;

  std::size_t width() const noexcept { return 2 * dim; }

  void validate() const {
    flags.validate();
    if (dim == 0) throw ConfigError("dim must be positive");
    if (num_relations == 0) throw ConfigError("model needs at least one relation");
    if (flags.use_reserved && num_reserved == 0) throw ConfigError("reserved set is empty");
  }
};

// ---------------------------------------------------------------------------
// Parameter accounting

struct ParamBreakdown {
  struct Item {
    std::string name;
    std::size_t count = 0;
    std::string formula;  // e.g. "2|R| x D"
  };
  std::vector<Item> items;
  std::size_t total = 0;

  void add(std::string name, std::size_t n, std::string formula = {}) {
    items.push_back({std::move(name), n, std::move(formula)});
    total += n;
  }
};

// Closed form over the tensors ModelParams allocates for `config`. Depends on
// the entity set only through num_reserved. D is the real width 2 * dim.
inline ParamBreakdown count_params(const ModelConfig& config) {
  const std::size_t d = config.width();
  const std::size_t r = config.num_relations;
  const auto& f = config.flags;
  ParamBreakdown b;
  if (f.use_reserved) b.add("reserved_embedding", config.num_reserved * d, "|Eres| x D");
  if (f.use_conrel) b.add("relation_end_embedding", 2 * r * d, "2|R| x D");
  b.add("relation_embedding", r * d, "|R| x D");
  if (f.use_conrel) b.add("conrel_mlp", 2 * d * d + 2 * d, "2 (D x D + D)");
  if (f.use_conrel && f.use_knresent) b.add("combine_mlp", 2 * d * d + d + d * d + d, "2D x D + D + D x D + D");
  if (f.use_mulhop) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      b.add("gnn." + std::to_string(l), 2 * d * 2 * d + d * d + d * d, "2 (D x 2D) + 2 (D x D)");
    }
  }
  return b;
}

// Conventional RotatE: one complex vector per entity, one phase vector per
// relation.
inline ParamBreakdown count_params_rotate(std::size_t entities, std::size_t relations, std::size_t dim) {
  ParamBreakdown b;
  b.add("entity_embedding", entities * 2 * dim, "|E| x 2dim");
  b.add("relation_phase", relations * dim, "|R| x dim");
  return b;
}

// ---------------------------------------------------------------------------
// Parameters

struct Mlp {
  ad::Parameter w1, b1, w2, b2;
};

struct GnnLayer {
  ad::Parameter w_out, w_in, w_self, w_rel;
};

namespace detail {

inline ad::Tensor uniform_tensor(ad::Shape shape, double lo, double hi, std::uint64_t seed, const std::string& name) {
  ad::Tensor t(std::move(shape));
  Rng rng(mix_seed(seed, fnv1a(name.data(), name.size())));
  for (auto& x : t.data()) x = rng.uniform(lo, hi);
  return t;
}

// Glorot-uniform for a weight stored (fan_out x fan_in).
inline ad::Tensor glorot(std::size_t fan_out, std::size_t fan_in, std::uint64_t seed, const std::string& name) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_tensor({fan_out, fan_in}, -limit, limit, seed, name);
}

inline Mlp make_mlp(const std::string& name, std::size_t in, std::size_t width, std::uint64_t seed) {
  return Mlp{{name + ".w1", glorot(width, in, seed, name + ".w1")},
             {name + ".b1", ad::Tensor({width})},
             {name + ".w2", glorot(width, width, seed, name + ".w2")},
             {name + ".b2", ad::Tensor({width})}};
}

}  // namespace detail

struct ModelParams {
  ModelConfig config;
  ad::Parameter reserved;      // |reserved| x D
  ad::Parameter relation_end;  // 2|R| x D; rows [0,|R|) head ends, [|R|,2|R|) tail ends
  ad::Parameter relation;      // |R| x D, GNN relation inputs
  Mlp conrel_mlp;              // D -> D
  Mlp combine_mlp;             // 2D -> D
  std::vector<GnnLayer> layers;

  ModelParams() = default;

  explicit ModelParams(const ModelConfig& cfg) : config(cfg) {
    cfg.validate();
    const auto d = cfg.width();
    const auto nrel = cfg.num_relations;
    const auto seed = cfg.seed;
    const auto& f = cfg.flags;
    if (f.use_reserved) {
      reserved = {"reserved_embedding", detail::uniform_tensor({cfg.num_reserved, d}, -0.5, 0.5, seed, "reserved")};
    }
    if (f.use_conrel) {
      relation_end = {"relation_end_embedding", detail::uniform_tensor({2 * nrel, d}, -0.5, 0.5, seed, "relation_end")};
      conrel_mlp = detail::make_mlp("conrel_mlp", d, d, seed);
    }
    relation = {"relation_embedding", detail::uniform_tensor({nrel, d}, -0.5, 0.5, seed, "relation")};
    if (f.use_conrel && f.use_knresent) combine_mlp = detail::make_mlp("combine_mlp", 2 * d, d, seed);
    if (f.use_mulhop) {
      for (std::size_t l = 0; l < cfg.layers; ++l) {
        const auto p = "gnn." + std::to_string(l);
        layers.push_back({{p + ".w_out", detail::glorot(d, 2 * d, seed, p + ".w_out")},
                          {p + ".w_in", detail::glorot(d, 2 * d, seed, p + ".w_in")},
                          {p + ".w_self", detail::glorot(d, d, seed, p + ".w_self")},
                          {p + ".w_rel", detail::glorot(d, d, seed, p + ".w_rel")}});
      }
    }
  }

  // Allocated tensors in a fixed order (checkpoint order).
  std::vector<ad::Parameter*> all() {
    std::vector<ad::Parameter*> out;
    auto push = [&](ad::Parameter& p) {
      if (!p.value.empty()) out.push_back(&p);
    };
    push(reserved);
    push(relation_end);
    push(relation);
    for (Mlp* m : {&conrel_mlp, &combine_mlp}) {
      push(m->w1);
      push(m->b1);
      push(m->w2);
      push(m->b2);
    }
    for (auto& l : layers) {
      push(l.w_out);
      push(l.w_in);
      push(l.w_self);
      push(l.w_rel);
    }
    return out;
  }

  std::vector<const ad::Parameter*> all() const {
    auto v = const_cast<ModelParams*>(this)->all();
    return {v.begin(), v.end()};
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto* p : all()) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto* p : all()) p->zero_grad();
  }
};

// ---------------------------------------------------------------------------
// Static encoder inputs

// Everything the forward pass needs from the dataset, precomputed once.
struct EncoderGraph {
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t width = 0;
  ad::IndexList reserved_entities;  // entity of reserved row i
  ad::IndexList free_entities;      // entities that are encoded rather than looked up
  // Sparse f_e^T R_end over free entities: entry i adds counts[i] * R_end[dims[i]] to row rows[i].
  ad::IndexList conrel_dims, conrel_rows;
  ad::Tensor conrel_counts;
  // Weighted reserved neighbours: entry i adds weights[i] * E_res[reserved_rows[i]] to row rows[i].
  ad::IndexList knn_reserved_rows, knn_rows;
  ad::Tensor knn_weights;
  // Frozen inputs for free entities when neither ConRel nor kNResEnt is used.
  ad::Tensor random_inputs;
};

// Deterministic per-entity pseudorandom vector in [-0.5, 0.5)^width.
inline std::vector<double> frozen_entity_vector(Index entity, std::size_t width, std::uint64_t seed) {
  Rng rng(mix_seed(mix_seed(seed, 0xF0F0), entity));
  std::vector<double> v(width);
  for (auto& x : v) x = rng.uniform(-0.5, 0.5);
  return v;
}

inline EncoderGraph build_encoder_graph(const KnowledgeGraph& kg, std::span<const RelationalFeature> features,
                                        const ReservedSet* reserved, const KnnIndex* knn,
                                        const ModelConfig& config) {
  config.validate();
  const auto& f = config.flags;
  EncoderGraph g;
  g.num_entities = kg.num_entities();
  g.num_relations = kg.num_relations();
  g.width = config.width();
  if (f.use_reserved) {
    if (!reserved || reserved->size() != config.num_reserved) {
      throw ConfigError("reserved set does not match the model configuration");
    }
  }
  if (f.use_knresent && (!knn || knn->num_entities != kg.num_entities())) {
    throw ConfigError("k-nearest reserved entity encoding needs a kNN index for this graph");
  }
  std::vector<Index> res, free;
  for (Index e = 0; e < kg.num_entities(); ++e) {
    if (f.use_reserved && reserved->contains(e)) {
      res.push_back(e);
    } else {
      free.push_back(e);
    }
  }
  if (f.use_conrel) {
    std::vector<Index> dims, rows;
    std::vector<double> counts;
    for (std::size_t i = 0; i < free.size(); ++i) {
      for (auto [d, c] : features[free[i]].counts) {
        dims.push_back(d);
        rows.push_back(static_cast<Index>(i));
        counts.push_back(static_cast<double>(c));
      }
    }
    const auto nnz = counts.size();
    g.conrel_counts = ad::Tensor({nnz, 1}, std::move(counts));
    g.conrel_dims = ad::make_index(std::move(dims));
    g.conrel_rows = ad::make_index(std::move(rows));
  }
  if (f.use_knresent) {
    std::vector<Index> rrows, rows;
    std::vector<double> weights;
    for (std::size_t i = 0; i < free.size(); ++i) {
      const auto entries = knn->of(free[i]);
      std::vector<double> sims;
      for (const auto& en : entries) sims.push_back(en.similarity);
      const auto w = knn_weights(sims);
      for (std::size_t j = 0; j < entries.size(); ++j) {
        const auto row = reserved->row[entries[j].entity];
        if (row < 0) throw ConfigError("kNN index refers to an entity outside the reserved set");
        rrows.push_back(static_cast<Index>(row));
        rows.push_back(static_cast<Index>(i));
        weights.push_back(w[j]);
      }
    }
    const auto nw = weights.size();
    g.knn_weights = ad::Tensor({nw, 1}, std::move(weights));
    g.knn_reserved_rows = ad::make_index(std::move(rrows));
    g.knn_rows = ad::make_index(std::move(rows));
  }
  if (!f.use_conrel && !f.use_knresent) {
    g.random_inputs = ad::Tensor::matrix(free.size(), g.width);
    for (std::size_t i = 0; i < free.size(); ++i) {
      const auto v = frozen_entity_vector(free[i], g.width, config.seed);
      std::copy(v.begin(), v.end(), g.random_inputs.row(i).begin());
    }
  }
  g.reserved_entities = ad::make_index(std::move(res));
  g.free_entities = ad::make_index(std::move(free));
  return g;
}

// Message-passing edges. Entry i of the out-lists sends W_out[h_r; h_nbr] to
// `target`; likewise for in-lists with W_in.
struct EdgeSet {
  ad::IndexList out_target, out_rel, out_nbr;
  ad::IndexList in_target, in_rel, in_nbr;
  ad::Tensor inv_degree;  // |E| x 1, 1 / max(1, pairs used)
};

// All train pairs, or at most `max_neighbors` pairs per entity drawn uniformly
// without replacement from O(e) u I(e) when a cap is given.
inline EdgeSet build_edges(const KnowledgeGraph& kg, std::size_t max_neighbors = 0, std::uint64_t seed = 0) {
  std::vector<Index> ot, orl, on, it, irl, in;
  ad::Tensor inv({kg.num_entities(), 1});
  std::vector<std::size_t> pick;
  for (Index e = 0; e < kg.num_entities(); ++e) {
    const auto& outs = kg.out_adj[e];
    const auto& ins = kg.in_adj[e];
    const std::size_t deg = outs.size() + ins.size();
    pick.resize(deg);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    if (max_neighbors > 0 && deg > max_neighbors) {
      Rng rng(mix_seed(seed, e));
      for (std::size_t i = 0; i < max_neighbors; ++i) std::swap(pick[i], pick[i + rng.below(deg - i)]);
      pick.resize(max_neighbors);
      std::sort(pick.begin(), pick.end());
    }
    for (auto p : pick) {
      if (p < outs.size()) {
        ot.push_back(e);
        orl.push_back(outs[p].relation);
        on.push_back(outs[p].entity);
      } else {
        const auto& n = ins[p - outs.size()];
        it.push_back(e);
        irl.push_back(n.relation);
        in.push_back(n.entity);
      }
    }
    inv[e] = 1.0 / static_cast<double>(std::max<std::size_t>(1, pick.size()));
  }
  return {ad::make_index(std::move(ot)), ad::make_index(std::move(orl)), ad::make_index(std::move(on)),
          ad::make_index(std::move(it)), ad::make_index(std::move(irl)), ad::make_index(std::move(in)),
          std::move(inv)};
}

// ---------------------------------------------------------------------------
// Forward pass pieces

inline ad::Var mlp_forward(ad::Tape& tape, Mlp& m, ad::Var x) {
  auto h = ad::relu(ad::matmul_nt(x, tape.param(m.w1)) + tape.param(m.b1));
  return ad::matmul_nt(h, tape.param(m.w2)) + tape.param(m.b2);
}

// Rows of f_e^T R_end for each free entity (before the MLP).
inline ad::Var conrel_sum(ad::Tape& tape, ModelParams& p, const EncoderGraph& g) {
  auto rows = ad::gather_rows(tape.param(p.relation_end), g.conrel_dims);
  auto weighted = ad::mul(rows, tape.constant(g.conrel_counts));
  return ad::scatter_add_rows(weighted, g.conrel_rows, g.free_entities->size());
}

inline ad::Var encode_conrel(ad::Tape& tape, ModelParams& p, const EncoderGraph& g) {
  return mlp_forward(tape, p.conrel_mlp, conrel_sum(tape, p, g));
}

// Softmax-weighted sum of each free entity's nearest reserved embeddings.
inline ad::Var encode_knresent(ad::Tape& tape, ModelParams& p, const EncoderGraph& g) {
  auto rows = ad::gather_rows(tape.param(p.reserved), g.knn_reserved_rows);
  auto weighted = ad::mul(rows, tape.constant(g.knn_weights));
  return ad::scatter_add_rows(weighted, g.knn_rows, g.free_entities->size());
}

// GNN input matrix H^0 (|E| x D): reserved rows looked up, free rows encoded
// according to the ablation flags.
inline ad::Var combine_inputs(ad::Tape& tape, ModelParams& p, const EncoderGraph& g) {
  const auto& f = p.config.flags;
  const auto n = g.num_entities;
  std::optional<ad::Var> h0;
  auto accumulate = [&](ad::Var v) { h0 = h0 ? ad::add(*h0, v) : v; };
  if (f.use_reserved && !g.reserved_entities->empty()) {
    accumulate(ad::scatter_add_rows(tape.param(p.reserved), g.reserved_entities, n));
  }
  if (!g.free_entities->empty()) {
    ad::Var free_inputs;
    if (f.use_conrel && f.use_knresent) {
      free_inputs = mlp_forward(tape, p.combine_mlp,
                                ad::concat_cols(encode_conrel(tape, p, g), encode_knresent(tape, p, g)));
    } else if (f.use_conrel) {
      free_inputs = encode_conrel(tape, p, g);
    } else if (f.use_knresent) {
      free_inputs = encode_knresent(tape, p, g);
    } else {
      free_inputs = tape.constant(g.random_inputs, "frozen inputs");
    }
    accumulate(ad::scatter_add_rows(free_inputs, g.free_entities, n));
  }
  return *h0;
}

struct Encoded {
  ad::Var entities;   // |E| x D
  ad::Var relations;  // |R| x D
};

// `activate` is false for the last layer: a ReLU there would confine every
// complex coordinate to one quadrant and cripple the rotation scorer.
inline Encoded gnn_layer(ad::Tape& tape, GnnLayer& layer, Encoded in, const EdgeSet& edges, std::size_t width,
                         bool activate = true) {
  const auto n = in.entities.rows();
  auto message = [&](ad::Parameter& w, const ad::IndexList& target, const ad::IndexList& rel,
                     const ad::IndexList& nbr) {
    // W [h_r; h_x] = W[:, :D] h_r + W[:, D:] h_x, projected once per node.
    auto wv = tape.param(w);
    auto rel_proj = ad::matmul_nt(in.relations, ad::slice_cols(wv, 0, width));
    auto ent_proj = ad::matmul_nt(in.entities, ad::slice_cols(wv, width, width));
    auto msgs = ad::gather_rows(rel_proj, rel) + ad::gather_rows(ent_proj, nbr);
    return ad::scatter_add_rows(msgs, target, n);
  };
  auto m = message(layer.w_out, edges.out_target, edges.out_rel, edges.out_nbr) +
           message(layer.w_in, edges.in_target, edges.in_rel, edges.in_nbr);
  auto normalized = ad::mul(m, tape.constant(edges.inv_degree));
  auto ent = normalized + ad::matmul_nt(in.entities, tape.param(layer.w_self));
  auto rel = ad::matmul_nt(in.relations, tape.param(layer.w_rel));
  if (!activate) return {ent, rel};
  return {ad::relu(ent), ad::relu(rel)};
}

inline Encoded gnn_forward(ad::Tape& tape, ModelParams& p, ad::Var h0, const EdgeSet& edges) {
  Encoded cur{h0, tape.param(p.relation)};
  if (!p.config.flags.use_mulhop) return cur;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    cur = gnn_layer(tape, p.layers[l], cur, edges, p.config.width(), l + 1 < p.layers.size());
  }
  return cur;
}

inline Encoded encode(ad::Tape& tape, ModelParams& p, const EncoderGraph& g, const EdgeSet& edges) {
  return gnn_forward(tape, p, combine_inputs(tape, p, g), edges);
}

}  // namespace earl
