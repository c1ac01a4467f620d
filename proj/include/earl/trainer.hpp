#pragma once

// Optimization loop: uniform positive sampling, corrupted negatives, one
// full-graph encoder pass per step, self-adversarial loss, Adam.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "earl/adam.hpp"
#include "earl/checkpoint.hpp"
#include "earl/config.hpp"
#include "earl/dataset.hpp"
#include "earl/encoder.hpp"
#include "earl/evaluator.hpp"
#include "earl/scoring.hpp"

namespace earl {

struct LogRow {
  std::size_t step = 0;
  double loss = 0.0;
  double seconds = 0.0;
};

// Wall time stays out of the file so equal runs give byte-identical logs.
inline void write_log_csv(const std::filesystem::path& path, const std::vector<LogRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "step,loss\n";
  out.precision(17);
  for (const auto& r : rows) out << r.step << ',' << r.loss << '\n';
}

// Reserved set / kNN index the configuration asks for.
inline void resolve_index(Dataset& ds, const TrainConfig& cfg) {
  if (!cfg.flags.use_reserved) return;
  ensure_index(ds, cfg.k, cfg.resolved_reserved_count(ds.kg.num_entities()), cfg.index_seed.value_or(ds.index_seed));
}

inline DatasetFingerprint fingerprint(const Dataset& ds, const TrainConfig& cfg) {
  DatasetFingerprint f{ds.name, ds.kg.num_entities(), ds.kg.num_relations(), {}};
  if (cfg.flags.use_reserved) f.reserved = ds.reserved.indices;
  return f;
}

// Throws ConfigError when a checkpoint cannot be applied to this dataset.
inline void check_compatible(const Dataset& ds, const Checkpoint& ck) {
  if (ck.dataset.num_entities != ds.kg.num_entities() || ck.dataset.num_relations != ds.kg.num_relations()) {
    throw ConfigError("checkpoint was trained on a graph with " + std::to_string(ck.dataset.num_entities) +
                      " entities / " + std::to_string(ck.dataset.num_relations) + " relations; bundle has " +
                      std::to_string(ds.kg.num_entities()) + " / " + std::to_string(ds.kg.num_relations()));
  }
  if (ck.params.config.flags.use_reserved && ck.dataset.reserved != ds.reserved.indices) {
    throw ConfigError("checkpoint reserved set differs from the dataset's");
  }
}

struct BatchLoss {
  ad::Var loss;
  ad::Tensor weights;  // self-adversarial weights used, B x n
};

inline ad::IndexList triple_field(const std::vector<Triple>& ts, Index Triple::*field) {
  std::vector<Index> v;
  v.reserve(ts.size());
  for (const auto& t : ts) v.push_back(t.*field);
  return ad::make_index(std::move(v));
}

// Encoder pass plus self-adversarial loss for one batch. With `fixed_weights`
// the adversarial weights are taken as given instead of recomputed, which is
// what finite-difference checks need since the weights carry no gradient.
inline BatchLoss batch_loss(ad::Tape& tape, ModelParams& params, const EncoderGraph& graph, const EdgeSet& edges,
                            const Batch& batch, double gamma, double alpha,
                            const ad::Tensor* fixed_weights = nullptr) {
  const auto enc = encode(tape, params, graph, edges);
  auto pos = rotate_scores(enc.entities, enc.relations, triple_field(batch.positives, &Triple::head),
                           triple_field(batch.positives, &Triple::relation),
                           triple_field(batch.positives, &Triple::tail));
  auto neg = rotate_scores(enc.entities, enc.relations, triple_field(batch.negatives, &Triple::head),
                           triple_field(batch.negatives, &Triple::relation),
                           triple_field(batch.negatives, &Triple::tail));
  auto weights = fixed_weights ? *fixed_weights : adversarial_weight_matrix(neg.value(), batch.per_positive, alpha);
  auto loss = nsa_batch_loss(pos, neg, weights, gamma);
  return {loss, std::move(weights)};
}

class Trainer {
 public:
  // `ds` must outlive the trainer and already hold the index resolve_index()
  // selects for `cfg`.
  Trainer(const Dataset& ds, TrainConfig cfg) : ds_(&ds), cfg_(std::move(cfg)) {
    cfg_.validate();
    params_ = ModelParams(cfg_.model_config(ds.kg.num_relations(), ds.reserved.size()));
    init();
  }

  Trainer(const Dataset& ds, Checkpoint ck) : ds_(&ds), cfg_(std::move(ck.config)) {
    cfg_.validate();
    check_compatible(ds, ck);
    step_ = ck.step;
    params_ = std::move(ck.params);
    if (ck.adam) adam_ = std::move(*ck.adam);
    init();
  }

  // One optimization step; returns the batch loss.
  double step() {
    const auto& kg = ds_->kg;
    Rng rng(mix_seed(cfg_.seed, step_ + 1));
    const Batch batch = sample_batch(kg.train, cfg_.batch_size, cfg_.n_negatives, kg.num_entities(), rng);
    const EdgeSet* edges = &edges_;
    EdgeSet sampled;
    if (cfg_.max_neighbors > 0) {
      sampled = build_edges(kg, cfg_.max_neighbors, mix_seed(cfg_.seed ^ 0xED6E5ULL, step_ + 1));
      edges = &sampled;
    }

    ad::Tape tape;
    auto loss = batch_loss(tape, params_, graph_, *edges, batch, cfg_.gamma, cfg_.alpha).loss;
    const double value = loss.value().item();
    if (!std::isfinite(value)) throw NumericalError("non-finite loss at step " + std::to_string(step_ + 1));

    params_.zero_grad();
    tape.backward(loss);
    auto all = params_.all();
    // Checked before the update so a failed step leaves the last good state.
    for (const auto* p : all) {
      if (!p->grad.all_finite()) {
        throw NumericalError("non-finite gradient for " + p->name + " at step " + std::to_string(step_ + 1));
      }
    }
    optimizer_step(all, adam_, AdamConfig{cfg_.learning_rate});
    ++step_;
    return value;
  }

  struct Hooks {
    std::function<void(const LogRow&)> on_log;
    std::function<void(std::size_t step)> on_checkpoint;
    std::function<void(std::size_t step)> on_eval;
  };

  // Runs until config.max_steps total steps. Timing is cumulative wall time
  // of this call.
  const std::vector<LogRow>& run(const Hooks& hooks = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    while (step_ < cfg_.max_steps) {
      const double loss = step();
      if (cfg_.log_every > 0 && (step_ % cfg_.log_every == 0 || step_ == cfg_.max_steps)) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log_.push_back({step_, loss, secs});
        if (hooks.on_log) hooks.on_log(log_.back());
      }
      if (hooks.on_checkpoint && cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0) {
        hooks.on_checkpoint(step_);
      }
      if (hooks.on_eval && cfg_.eval_every > 0 && step_ % cfg_.eval_every == 0) hooks.on_eval(step_);
    }
    return log_;
  }

  Checkpoint checkpoint(std::string run_manifest = {}) const {
    Checkpoint ck;
    ck.config = cfg_;
    ck.dataset = fingerprint(*ds_, cfg_);
    ck.step = step_;
    ck.params = params_;
    ck.adam = adam_;
    ck.run_manifest = std::move(run_manifest);
    return ck;
  }

  Embeddings embeddings() { return compute_embeddings(params_, graph_, edges_); }

  const TrainConfig& config() const noexcept { return cfg_; }
  ModelParams& params() noexcept { return params_; }
  const ModelParams& params() const noexcept { return params_; }
  const AdamState& optimizer_state() const noexcept { return adam_; }
  std::size_t steps_done() const noexcept { return step_; }
  const std::vector<LogRow>& log() const noexcept { return log_; }
  const EncoderGraph& graph() const noexcept { return graph_; }

 private:
  void init() {
    const auto& mc = params_.config;
    graph_ = build_encoder_graph(ds_->kg, ds_->features, &ds_->reserved, &ds_->knn, mc);
    edges_ = build_edges(ds_->kg);
  }

  const Dataset* ds_;
  TrainConfig cfg_;
  ModelParams params_;
  AdamState adam_;
  EncoderGraph graph_;
  EdgeSet edges_;
  std::size_t step_ = 0;
  std::vector<LogRow> log_;
};

// Filtered evaluation of trained parameters on a split of `ds`.
inline EvalReport evaluate(const Dataset& ds, ModelParams& params, Split split) {
  const auto graph = build_encoder_graph(ds.kg, ds.features, &ds.reserved, &ds.knn, params.config);
  const auto emb = compute_embeddings(params, graph, build_edges(ds.kg));
  const auto evaluable = filter_evaluable(ds.kg, split);
  const FilterIndex filter(known_triples(ds.kg));
  auto rep = evaluate_ranking(emb, evaluable.triples, filter, evaluable.excluded);
  rep.split = split == Split::kValid ? "valid" : "test";
  rep.set_param_count(params.size());
  return rep;
}

inline EvalReport evaluate(const Dataset& ds, Checkpoint& ck, Split split) {
  check_compatible(ds, ck);
  auto rep = evaluate(ds, ck.params, split);
  rep.config = to_json(ck.config);
  return rep;
}

}  // namespace earl
