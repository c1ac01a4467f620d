#include "earl/evaluator.hpp"
#include "earl/harness.hpp"
#include "earl/synthetic.hpp"
#include "earl/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"

using namespace earl;

namespace {

Embeddings random_embeddings(std::size_t ne, std::size_t nr, std::size_t d, Rng& rng) {
  Embeddings e{ad::Tensor::matrix(ne, d), ad::Tensor::matrix(nr, d)};
  for (auto& x : e.entities.data()) x = rng.uniform(-1, 1);
  for (auto& x : e.relations.data()) x = rng.uniform(-3, 3);
  return e;
}

std::vector<bool> known_mask(const TripleSet& known, const Triple& q, Corruption slot, std::size_t ne) {
  std::vector<bool> m(ne, false);
  for (Index e = 0; e < ne; ++e) {
    Triple t = q;
    (slot == Corruption::kTail ? t.tail : t.head) = e;
    m[e] = known.contains(t);
  }
  return m;
}

std::vector<double> all_scores(const Embeddings& emb, const Triple& q, Corruption slot) {
  std::vector<double> s;
  score_candidates(q, slot, emb, s);
  return s;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.dim = 4;
  c.k = 2;
  c.reserved_count = 8;
  c.batch_size = 8;
  c.n_negatives = 4;
  c.max_steps = 3;
  c.learning_rate = 0.01;
  c.seed = 3;
  return c;
}

Dataset planted_dataset() {
  return prepare_dataset(planted_graph({40, 3, 4, 1}), "planted", 2, 8, 1);
}

}  // namespace

TEST(Rank, UniqueTop) {
  // The head rotated by pi lands exactly on entity 1; the others are far.
  const Embeddings emb{ad::Tensor({3, 2}, {1, 0, -1, 0, 5, 5}), ad::Tensor({1, 2}, {std::numbers::pi, 0})};
  EXPECT_EQ(rank_triple({0, 0, 1}, Corruption::kTail, emb, nullptr), 1u);
  EXPECT_EQ(rank_triple({0, 0, 1}, Corruption::kHead, emb, nullptr), 1u);
}

TEST(Rank, FilterDropsOtherTrueAnswers) {
  // Two entities; the other tail outscores the answer but is itself true.
  Embeddings emb{ad::Tensor({2, 2}, {1, 0, 2, 0}), ad::Tensor({1, 2}, {0, 0})};
  const Triple q{0, 0, 1};
  // candidate 0 scores 0, the answer 1 scores -1
  EXPECT_EQ(rank_triple(q, Corruption::kTail, emb, nullptr), 2u);
  const FilterIndex filter(TripleSet{{0, 0, 0}, {0, 0, 1}});
  EXPECT_EQ(rank_triple(q, Corruption::kTail, emb, &filter), 1u);
}

TEST(Rank, TiesCountHalf) {
  // Five identical entities: the answer ties with four others.
  Embeddings emb{ad::Tensor({5, 2}, 1.0), ad::Tensor({1, 2}, {0, 0})};
  EXPECT_EQ(rank_triple({0, 0, 3}, Corruption::kTail, emb, nullptr), 3u);
  EXPECT_EQ(rank_triple({0, 0, 3}, Corruption::kHead, emb, nullptr), 3u);
}

TEST(Rank, MatchesBruteForceOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto emb = random_embeddings(8, 3, 4, rng);
    auto kg = random_graph(8, 3, 20, rng);
    const auto known = known_triples(kg);
    const FilterIndex filter(known);
    for (const auto& t : kg.train) {
      for (auto slot : {Corruption::kHead, Corruption::kTail}) {
        const Index answer = slot == Corruption::kTail ? t.tail : t.head;
        const auto want = oracle::rank(all_scores(emb, t, slot), answer, known_mask(known, t, slot, 8));
        EXPECT_EQ(rank_triple(t, slot, emb, &filter), want);
      }
    }
  }
}

TEST(Rank, FilteredNeverWorseThanRaw) {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto emb = random_embeddings(30, 4, 6, rng);
    auto kg = random_graph(30, 4, 200, rng);
    const FilterIndex filter(known_triples(kg));
    for (const auto& t : kg.train) {
      for (auto slot : {Corruption::kHead, Corruption::kTail}) {
        const auto raw = rank_triple(t, slot, emb, nullptr);
        const auto filt = rank_triple(t, slot, emb, &filter);
        EXPECT_LE(filt, raw);
        EXPECT_GE(filt, 1u);
        EXPECT_LE(raw, 30u);
      }
    }
  }
}

TEST(Report, PerfectModelScoresOne) {
  // (e, r, e) with zero phase: the answer scores 0 and every other entity,
  // being distinct, scores below it.
  Rng rng(2);
  const auto emb = random_embeddings(12, 1, 4, rng);
  Embeddings perfect{emb.entities, ad::Tensor({1, 4}, 0.0)};
  std::vector<Triple> ts;
  for (Index e = 0; e < 12; ++e) ts.push_back({e, 0, e});
  const FilterIndex filter(TripleSet(ts.begin(), ts.end()));
  const auto rep = evaluate_ranking(perfect, ts, filter);
  EXPECT_EQ(rep.queries, 24u);
  EXPECT_DOUBLE_EQ(rep.mrr, 1.0);
  for (int k : kHitsAt) EXPECT_DOUBLE_EQ(rep.hits.at(k), 1.0);
}

TEST(Report, AggregatesMatchRanks) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto emb = random_embeddings(25, 3, 4, rng);
    auto kg = random_graph(25, 3, 60, rng);
    const FilterIndex filter(known_triples(kg));
    const auto rep = evaluate_ranking(emb, kg.train, filter, 7);
    double rr = 0;
    std::map<int, double> hits;
    for (const auto& t : kg.train) {
      for (auto slot : {Corruption::kHead, Corruption::kTail}) {
        const auto r = rank_triple(t, slot, emb, &filter);
        rr += 1.0 / r;
        for (int k : kHitsAt) hits[k] += r <= static_cast<std::size_t>(k);
      }
    }
    const double q = 2.0 * kg.train.size();
    EXPECT_NEAR(rep.mrr, rr / q, 1e-12);
    EXPECT_EQ(rep.skipped_triples, 7u);
    for (int k : kHitsAt) EXPECT_NEAR(rep.hits.at(k), hits[k] / q, 1e-12);
    EXPECT_LE(rep.hits.at(1), rep.hits.at(3));
    EXPECT_LE(rep.hits.at(3), rep.hits.at(10));
    EXPECT_LE(rep.hits.at(1), rep.mrr);
  }
}

TEST(Report, EmptySplit) {
  const auto rep = evaluate_ranking({ad::Tensor({2, 2}), ad::Tensor({1, 2})}, {}, FilterIndex{});
  EXPECT_EQ(rep.queries, 0u);
  EXPECT_EQ(rep.mrr, 0.0);
}

TEST(Report, EffiIsMrrPerMillionParameters) {
  EvalReport rep;
  rep.mrr = 0.310;
  rep.set_param_count(1'800'000);
  EXPECT_NEAR(rep.effi, 0.1722, 1e-4);
  const auto j = rep.to_json();
  EXPECT_EQ(j["param_count"], 1'800'000);
  EXPECT_TRUE(j.contains("effi"));
}

TEST(Evaluate, Deterministic) {
  auto ds = planted_dataset();
  auto cfg = tiny_config();
  resolve_index(ds, cfg);
  Trainer tr(ds, cfg);
  tr.run();
  const auto a = evaluate(ds, tr.params(), Split::kTest);
  const auto b = evaluate(ds, tr.params(), Split::kTest);
  EXPECT_EQ(a.mrr, b.mrr);
  EXPECT_EQ(a.hits, b.hits);
  EXPECT_EQ(a.param_count, tr.params().size());
  EXPECT_EQ(a.triples, ds.kg.test.size());
}

TEST(Evaluate, IncompatibleCheckpointRejected) {
  auto ds = planted_dataset();
  auto cfg = tiny_config();
  resolve_index(ds, cfg);
  Trainer tr(ds, cfg);
  auto ck = tr.checkpoint();
  ck.dataset.num_entities += 1;
  EXPECT_THROW(evaluate(ds, ck, Split::kTest), ConfigError);
  ck = tr.checkpoint();
  ck.dataset.reserved[0] = ck.dataset.reserved[0] == 0 ? 1 : 0;
  EXPECT_THROW(evaluate(ds, ck, Split::kTest), ConfigError);
}

TEST(Ablations, TableOrderAndParameterCounts) {
  auto ds = planted_dataset();
  const auto rows = run_ablations(ds, tiny_config(), Split::kValid);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].which, kAllAblations[i]);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(rows[i].report.param_count, rows[0].report.param_count) << ablation_label(rows[i].which);
  }
  const auto table = format_ablation_table(rows);
  std::size_t pos = 0;
  for (auto a : kAllAblations) {
    const auto at = table.find(ablation_label(a), pos);
    ASSERT_NE(at, std::string::npos) << ablation_label(a);
    pos = at;
  }
  EXPECT_NE(table.find("Effi"), std::string::npos);
}

TEST(Budget, GuardRejectsOffBudgetPoints) {
  TrainConfig base;
  const std::size_t nrel = 237, ne = 14505;
  const auto budget = grid_params(base, nrel, {150, 1450});
  EXPECT_NO_THROW(check_budget(base, nrel, ne, {{150, 1450}}, budget));

  std::vector<GridPoint> grid;
  for (std::size_t dim : {100, 125, 150}) {
    const auto r = fit_reserved(base, nrel, dim, budget);
    grid.push_back({dim, r});
    const double dev = std::abs(static_cast<double>(grid_params(base, nrel, grid.back())) - budget) / budget;
    EXPECT_LE(dev, 0.05) << dim;
  }
  EXPECT_NO_THROW(check_budget(base, nrel, ne, grid, budget));

  grid.push_back({150, 1450 * 4});
  try {
    check_budget(base, nrel, ne, grid, budget);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("dim 150, reserved 5800"), std::string::npos) << e.what();
  }
  EXPECT_THROW(check_budget(base, nrel, ne, {{150, 0}}, budget), ConfigError);
  EXPECT_THROW(check_budget(base, nrel, ne, {{150, ne + 1}}, budget), ConfigError);
}

TEST(Budget, SweepRequiresReservedAndWritesCsv) {
  auto ds = planted_dataset();
  auto cfg = tiny_config();
  cfg.flags = flags_for(Ablation::kNoReserved);
  EXPECT_THROW(budget_sweep(ds, cfg, 1000, {{4, 8}}), ConfigError);

  cfg = tiny_config();
  const auto budget = grid_params(cfg, ds.kg.num_relations(), {4, 8});
  const auto rows = budget_sweep(ds, cfg, budget, {{4, 8}}, Split::kValid);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].params, budget);
  const auto csv = sweep_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "dim,reserved_count,params,mrr,hits10");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}
