// Acceptance checks. Prints one PASS / FAIL / SKIP line per criterion and
// exits non-zero if any criterion fails. Tolerances are fixed here.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "earl/dataset.hpp"
#include "earl/harness.hpp"
#include "earl/synthetic.hpp"
#include "earl/trainer.hpp"
#include "oracles.hpp"

using namespace earl;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSeconds = 60;
constexpr double kPhaseTol = 1e-9;
constexpr double kSumTol = 1e-9;
constexpr int kPropertyInstances = 10000;
constexpr int kOracleGraphs = 100;
constexpr double kBaselineFactor = 10.0;
constexpr std::size_t kSanitySteps = 2000;  // at most 5000 allowed
constexpr double kSanityBudgetSeconds = 600;
constexpr double kRotateLo = 29.2e6, kRotateHi = 29.3e6;
constexpr double kEarlTarget = 1.8e6, kEarlRel = 0.25;

struct Outcome {
  enum Kind { kPass, kFail, kSkip } kind = kFail;
  std::string detail;
};

Outcome fail(std::string d) { return {Outcome::kFail, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? Outcome::kPass : Outcome::kFail, std::move(d)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename... Ts>
std::string str(const Ts&... xs) {
  std::ostringstream os;
  os << std::setprecision(4);
  (os << ... << xs);
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto kg = KnowledgeGraph::from_triples(
      5, 3, {{0, 0, 1}, {1, 1, 2}, {2, 2, 3}, {3, 0, 4}, {4, 1, 0}, {0, 2, 2}, {1, 0, 3}});
  auto ds = prepare_dataset(kg, "toy", 2, 3, 1);
  ModelConfig mc;
  mc.dim = 4;  // D = 8
  mc.num_relations = 3;
  mc.num_reserved = ds.reserved.size();
  mc.layers = 2;
  mc.seed = 11;
  ModelParams params(mc);
  const auto graph = build_encoder_graph(ds.kg, ds.features, &ds.reserved, &ds.knn, mc);
  const auto edges = build_edges(ds.kg);
  Rng rng(5);
  const auto batch = sample_batch(ds.kg.train, 4, 3, 5, rng);

  ad::Tensor weights;
  {
    ad::Tape tape;
    weights = batch_loss(tape, params, graph, edges, batch, 10.0, 1.0).weights;
  }
  auto f = [&](ad::Tape& tape) { return batch_loss(tape, params, graph, edges, batch, 10.0, 1.0, &weights).loss; };
  auto all = params.all();
  const auto rep = ad::grad_check(f, all, 1e-6, 1u << 30);
  const double secs = seconds_since(t0);
  return verdict(rep.max_rel_error < kGradTol && secs < kGradBudgetSeconds,
                 str("max rel err ", rep.max_rel_error, " (", rep.worst, ") over ", rep.coordinates,
                     " coordinates of ", all.size(), " tensors; tol ", kGradTol, "; ", secs, " s < ",
                     kGradBudgetSeconds, " s"));
}

Outcome oracle_equivalence() {
  Rng rng(2024);
  std::size_t feature_mismatch = 0, topk_mismatch = 0, rank_mismatch = 0;
  std::size_t features = 0, queries = 0, ranks = 0;
  for (int g = 0; g < kOracleGraphs; ++g) {
    const std::size_t ne = 5 + rng.below(46);
    const std::size_t nr = 1 + rng.below(6);
    auto kg = random_graph(ne, nr, 1 + rng.below(3 * ne), rng);
    std::vector<Triple> test;
    for (int i = 0; i < 10; ++i) {
      test.push_back({static_cast<Index>(rng.below(ne)), static_cast<Index>(rng.below(nr)),
                      static_cast<Index>(rng.below(ne))});
    }
    kg.test = test;
    const auto f = build_relational_features(kg);
    for (Index e = 0; e < ne; ++e, ++features) {
      const auto want = oracle::feature(kg, e);
      std::vector<std::uint32_t> got(2 * nr, 0);
      for (auto [d, c] : f[e].counts) got[d] = c;
      if (got != want) ++feature_mismatch;
    }

    const auto res = select_reserved_count(ne, 1 + rng.below(ne), g);
    const std::size_t k = 1 + rng.below(10);
    for (Index q = 0; q < ne; ++q, ++queries) {
      const auto want = oracle::topk(kg, q, res.indices, k);
      const auto got = retrieve_topk(f[q], f, res, k);
      bool same = got.size() == want.size();
      for (std::size_t i = 0; same && i < got.size(); ++i) {
        same = got[i].entity == want[i].first && got[i].similarity == want[i].second;
      }
      if (!same) ++topk_mismatch;
    }

    Embeddings emb{ad::Tensor::matrix(ne, 6), ad::Tensor::matrix(nr, 6)};
    for (auto& x : emb.entities.data()) x = std::round(rng.uniform(-2, 2) * 4) / 4;  // coarse grid forces ties
    for (auto& x : emb.relations.data()) x = rng.uniform(-3, 3);
    const auto known = known_triples(kg);
    const FilterIndex filter(known);
    for (const auto& t : kg.test) {
      for (auto slot : {Corruption::kHead, Corruption::kTail}) {
        std::vector<double> scores;
        score_candidates(t, slot, emb, scores);
        std::vector<bool> mask(ne);
        for (Index e = 0; e < ne; ++e) {
          Triple c = t;
          (slot == Corruption::kTail ? c.tail : c.head) = e;
          mask[e] = known.contains(c);
        }
        const Index answer = slot == Corruption::kTail ? t.tail : t.head;
        if (rank_triple(t, slot, emb, &filter) != oracle::rank(scores, answer, mask)) ++rank_mismatch;
        ++ranks;
      }
    }
  }
  return verdict(feature_mismatch + topk_mismatch + rank_mismatch == 0,
                 str(kOracleGraphs, " graphs (<= 50 entities): features ", features - feature_mismatch, "/", features,
                     ", top-k ", queries - topk_mismatch, "/", queries, ", filtered ranks ", ranks - rank_mismatch,
                     "/", ranks, " exact"));
}

Outcome score_properties() {
  Rng rng(77);
  std::size_t identity_bad = 0, uniform_bad = 0;
  double phase_err = 0, sum_err = 0;
  for (int i = 0; i < kPropertyInstances; ++i) {
    const std::size_t half = 1 + rng.below(8), d = 2 * half;
    oracle::Vec h(d), r(d), t(d), zero(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      h[j] = rng.uniform(-3, 3);
      r[j] = rng.uniform(-7, 7);
      t[j] = rng.uniform(-3, 3);
    }
    if (rotate_score(h, zero, h) != 0.0) ++identity_bad;

    const double phi = rng.uniform(-7, 7);
    auto rot = [&](const oracle::Vec& v) {
      oracle::Vec o(d);
      for (std::size_t k = 0; k < half; ++k) {
        o[k] = v[k] * std::cos(phi) - v[half + k] * std::sin(phi);
        o[half + k] = v[k] * std::sin(phi) + v[half + k] * std::cos(phi);
      }
      return o;
    };
    phase_err = std::max(phase_err, std::abs(rotate_score(h, r, t) - rotate_score(rot(h), r, rot(t))));

    const std::size_t n = 1 + rng.below(64);
    std::vector<double> s(n);
    for (auto& x : s) x = rng.uniform(-200, 0);
    const auto u = adversarial_weights(s, 0.0);
    for (double w : u) {
      if (w != u[0] || std::abs(w - 1.0 / static_cast<double>(n)) > 1e-15) {
        ++uniform_bad;
        break;
      }
    }
    const auto w = adversarial_weights(s, rng.uniform(0.1, 4));
    sum_err = std::max(sum_err, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
  }
  return verdict(identity_bad == 0 && uniform_bad == 0 && phase_err <= kPhaseTol && sum_err <= kSumTol,
                 str(kPropertyInstances, " instances: identity exact in ", kPropertyInstances - identity_bad,
                     ", max phase drift ", phase_err, " (tol ", kPhaseTol, "), alpha=0 uniform in ",
                     kPropertyInstances - uniform_bad, ", max |sum-1| ", sum_err, " (tol ", kSumTol, ")"));
}

Outcome entity_agnosticism() {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.k = 3;
  cfg.reserved_count = 20;
  std::vector<std::size_t> counts, allocated;
  for (std::size_t ne : {100, 200, 400}) {
    auto ds = prepare_dataset(planted_graph({ne, 8, ne / 20, 3}), "planted", cfg.k, cfg.reserved_count, 1);
    counts.push_back(count_params(cfg.model_config(ds.kg.num_relations(), ds.reserved.size())).total);
    Trainer tr(ds, cfg);
    allocated.push_back(tr.params().size());
  }
  const bool ok = counts[0] == counts[1] && counts[1] == counts[2] && allocated == counts;
  return verdict(ok, str("|E| = 100 / 200 / 400 with 20 reserved: count_params ", counts[0], " / ", counts[1], " / ",
                         counts[2], ", allocated ", allocated[0], " / ", allocated[1], " / ", allocated[2]));
}

TrainConfig sanity_config() {
  TrainConfig c;
  c.dim = 16;
  c.k = 5;
  c.reserved_fraction = 0.10;
  c.batch_size = 128;
  c.n_negatives = 32;
  c.learning_rate = 0.01;
  c.gamma = 6.0;
  c.max_steps = kSanitySteps;
  c.seed = 1;
  c.log_every = 0;
  return c;
}

Outcome training_sanity() {
  const auto t0 = std::chrono::steady_clock::now();
  auto ds = prepare_dataset(planted_graph({200, 8, 10, 1}), "planted", 5, 20, 1);
  const double baseline = 2.0 / static_cast<double>(ds.kg.num_entities());
  auto run = [&](Ablation a) {
    auto cfg = sanity_config();
    cfg.flags = flags_for(a);
    resolve_index(ds, cfg);
    Trainer tr(ds, cfg);
    tr.run();
    return evaluate(ds, tr.params(), Split::kTest);
  };
  const auto full = run(Ablation::kFull);
  const auto flat = run(Ablation::kNoMulHop);
  const double secs = seconds_since(t0);
  const bool ok = full.mrr >= kBaselineFactor * baseline && flat.mrr <= full.mrr && secs < kSanityBudgetSeconds;
  return verdict(ok, str("planted 200 entities / 8 relations, ", kSanitySteps, " steps: MRR ", full.mrr,
                         " >= ", kBaselineFactor, " x ", baseline, "; w/o MulHop ", flat.mrr, " <= full; ", secs,
                         " s < ", kSanityBudgetSeconds, " s"));
}

Outcome parameter_counts() {
  const auto fb = *known_dataset("fb15k237");
  const auto rot = count_params_rotate(fb.entities, fb.relations, 1000);
  TrainConfig cfg;
  cfg.dim = fb.dim;
  const auto reserved = cfg.resolved_reserved_count(fb.entities);
  const auto earl = count_params(cfg.model_config(fb.relations, reserved));
  std::ostringstream breakdown;
  for (const auto& it : earl.items) breakdown << "\n      " << std::left << std::setw(24) << it.name << std::setw(26) << it.formula << std::right << std::setw(10) << it.count;
  const bool rot_ok = rot.total >= kRotateLo && rot.total <= kRotateHi;
  const bool earl_ok = std::abs(static_cast<double>(earl.total) - kEarlTarget) <= kEarlRel * kEarlTarget;
  return verdict(rot_ok && earl_ok,
                 str("RotatE dim 1000: ", rot.total, " in [29.2M, 29.3M]; EARL dim ", fb.dim, ", ", reserved,
                     " reserved: ", earl.total, " within 25% of 1.8M", breakdown.str()));
}

Outcome extended_benchmarks() {
  const char* root = std::getenv("EARL_DATA_DIR");
  const char* enabled = std::getenv("EARL_ACCEPT_EXTENDED");
  if (!root || !enabled || std::string(enabled) != "1") {
    return {Outcome::kSkip, "full FB15k-237 / WN18RR training; set EARL_ACCEPT_EXTENDED=1 and EARL_DATA_DIR to run"};
  }
  struct Target {
    const char* name;
    double mrr;
    std::optional<double> hits10;
  };
  std::ostringstream detail;
  bool ok = true;
  for (const Target& t : {Target{"fb15k237", 0.310, 0.501}, Target{"wn18rr", 0.440, std::nullopt}}) {
    const auto dir = std::filesystem::path(root) / t.name;
    if (!std::filesystem::exists(dir / "train.txt")) return {Outcome::kSkip, "missing " + (dir / "train.txt").string()};
    auto kg = KnowledgeGraph::load(dir / "train.txt", dir / "valid.txt", dir / "test.txt");
    TrainConfig cfg;
    cfg.dim = default_dim(t.name);
    cfg.gamma = default_gamma(t.name);
    cfg.log_every = 0;
    const auto reserved = cfg.resolved_reserved_count(kg.num_entities());
    auto ds = prepare_dataset(std::move(kg), t.name, cfg.k, reserved, 0);
    resolve_index(ds, cfg);
    Trainer tr(ds, cfg);
    tr.run();
    const auto rep = evaluate(ds, tr.params(), Split::kTest);
    ok = ok && std::abs(rep.mrr - t.mrr) <= 0.03;
    if (t.hits10) ok = ok && std::abs(rep.hits.at(10) - *t.hits10) <= 0.03;
    detail << t.name << " MRR " << rep.mrr << " Hits@10 " << rep.hits.at(10) << "; ";
  }
  return verdict(ok, detail.str() + "tolerance 0.03");
}

Outcome determinism() {
  auto ds = prepare_dataset(planted_graph({100, 8, 5, 4}), "planted", 3, 10, 2);
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.k = 3;
  cfg.reserved_count = 10;
  cfg.batch_size = 64;
  cfg.n_negatives = 16;
  cfg.learning_rate = 0.01;
  cfg.max_steps = 150;
  cfg.seed = 7;
  resolve_index(ds, cfg);
  auto run = [&](unsigned threads) {
    set_threads(threads);
    Trainer tr(ds, cfg);
    const auto log = tr.run();
    std::vector<double> losses;
    for (const auto& r : log) losses.push_back(r.loss);
    return std::pair{losses, evaluate(ds, tr.params(), Split::kTest).to_json().dump()};
  };
  const unsigned saved = threads();
  const auto a = run(1);
  const auto b = run(4);
  set_threads(saved);
  const bool ok = a.first == b.first && a.second == b.second;
  return verdict(ok, str(cfg.max_steps, "-step loss trace ", a.first == b.first ? "bitwise equal" : "differs",
                         ", evaluation report ", a.second == b.second ? "bitwise equal" : "differs",
                         " (runs with 1 and 4 threads)"));
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"1 gradient correctness", gradient_correctness},
      {"2 oracle equivalence", oracle_equivalence},
      {"3 score-function properties", score_properties},
      {"4 entity-agnostic parameter count", entity_agnosticism},
      {"5 training sanity at desk scale", training_sanity},
      {"6 parameter-count reproduction", parameter_counts},
      {"7 extended benchmarks", extended_benchmarks},
      {"8 determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = fail(std::string("threw: ") + e.what());
    }
    const char* tag = o.kind == Outcome::kPass ? "PASS" : o.kind == Outcome::kSkip ? "SKIP" : "FAIL";
    if (o.kind == Outcome::kFail) ++failures;
    std::cout << "[" << tag << "] " << name << ": " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "acceptance: all criteria met" : "acceptance: " + std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
