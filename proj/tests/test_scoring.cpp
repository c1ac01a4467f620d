#include "earl/scoring.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "oracles.hpp"

using namespace earl;

namespace {

oracle::Vec random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  oracle::Vec v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

ad::Parameter random_param(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
  ad::Tensor t = ad::Tensor::matrix(rows, cols);
  for (auto& x : t.data()) x = rng.uniform(-1.0, 1.0);
  return ad::Parameter(name, std::move(t));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(RotateScore, Examples) {
  const oracle::Vec h{1, 0}, zero{0, 0};
  EXPECT_DOUBLE_EQ(rotate_score(h, zero, h), 0.0);
  EXPECT_NEAR(rotate_score(h, oracle::Vec{std::numbers::pi, 0}, oracle::Vec{-1, 0}), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(rotate_score(h, zero, zero), -1.0);
  // (3 + 4i) against 0
  EXPECT_DOUBLE_EQ(rotate_score(oracle::Vec{3, 4}, zero, zero), -5.0);
}

TEST(RotateScore, WidthErrors) {
  const oracle::Vec odd{1, 2, 3};
  EXPECT_THROW(rotate_score(odd, odd, odd), ConfigError);
  EXPECT_THROW(rotate_score(oracle::Vec{1, 0}, oracle::Vec{0, 0, 0, 0}, oracle::Vec{1, 0}), ConfigError);
}

TEST(RotateScore, MatchesOracle) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto d = 2 * (1 + rng.below(6));
    const auto h = random_vec(rng, d), r = random_vec(rng, d, -4, 4), t = random_vec(rng, d);
    EXPECT_NEAR(rotate_score(h, r, t), oracle::rotate(h, r, t), 1e-12);
  }
}

// Rotating h by theta and t by the same global phase leaves the distance
// unchanged; rotating h onto t exactly scores zero.
TEST(RotateScore, PhaseInvarianceAndIdentity) {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const auto d = 2 * (1 + rng.below(5));
    const auto half = d / 2;
    auto h = random_vec(rng, d), r = random_vec(rng, d, -4, 4), t = random_vec(rng, d);
    const double phi = rng.uniform(-4, 4);
    oracle::Vec h2(d), t2(d);
    for (std::size_t k = 0; k < half; ++k) {
      h2[k] = h[k] * std::cos(phi) - h[half + k] * std::sin(phi);
      h2[half + k] = h[k] * std::sin(phi) + h[half + k] * std::cos(phi);
      t2[k] = t[k] * std::cos(phi) - t[half + k] * std::sin(phi);
      t2[half + k] = t[k] * std::sin(phi) + t[half + k] * std::cos(phi);
    }
    ASSERT_NEAR(rotate_score(h, r, t), rotate_score(h2, r, t2), 1e-9);

    oracle::Vec zero(d, 0.0);
    ASSERT_EQ(rotate_score(h, zero, h), 0.0);
    ASSERT_LE(rotate_score(h, r, t), 0.0);
  }
}

TEST(RotateScores, MatchesScalarAndGradChecks) {
  Rng rng(21);
  auto E = random_param("E", 6, 8, rng);
  auto R = random_param("R", 3, 8, rng);
  std::vector<Index> hs, rs, ts;
  for (int i = 0; i < 20; ++i) {
    hs.push_back(static_cast<Index>(rng.below(6)));
    rs.push_back(static_cast<Index>(rng.below(3)));
    ts.push_back(static_cast<Index>(rng.below(6)));
  }
  const auto H = ad::make_index(hs), Rl = ad::make_index(rs), T = ad::make_index(ts);
  {
    ad::Tape tape;
    const auto s = rotate_scores(tape.param(E), tape.param(R), H, Rl, T);
    for (std::size_t i = 0; i < hs.size(); ++i) {
      EXPECT_DOUBLE_EQ(s.value()[i], rotate_score(E.value.row(hs[i]), R.value.row(rs[i]), E.value.row(ts[i])));
    }
  }
  Rng wr(2);
  ad::Tensor w = ad::Tensor::matrix(hs.size(), 1);
  for (auto& x : w.data()) x = wr.uniform(-1, 1);
  auto f = [&](ad::Tape& tp) {
    return ad::sum(ad::mul(rotate_scores(tp.param(E), tp.param(R), H, Rl, T), tp.constant(w)));
  };
  const auto rep = ad::grad_check(f, std::vector<ad::Parameter*>{&E, &R}, 1e-6);
  EXPECT_LT(rep.max_rel_error, 1e-6) << rep.worst;
}

TEST(RotateScores, Errors) {
  Rng rng(1);
  auto E = random_param("E", 3, 3, rng);
  auto R = random_param("R", 1, 3, rng);
  ad::Tape tape;
  EXPECT_THROW(rotate_scores(tape.param(E), tape.param(R), ad::make_index({0}), ad::make_index({0}),
                             ad::make_index({1})),
               ConfigError);
  auto E2 = random_param("E2", 3, 4, rng);
  auto R2 = random_param("R2", 1, 4, rng);
  EXPECT_THROW(rotate_scores(tape.param(E2), tape.param(R2), ad::make_index({0}), ad::make_index({1}),
                             ad::make_index({1})),
               ConfigError);
  EXPECT_THROW(rotate_scores(tape.param(E2), tape.param(R2), ad::make_index({0, 1}), ad::make_index({0}),
                             ad::make_index({1})),
               ConfigError);
}

TEST(NegativeSampling, SingleEntityReproducesPositive) {
  Rng rng(0);
  const Triple p{0, 2, 0};
  for (const auto& n : sample_negatives(p, 16, 1, rng)) EXPECT_EQ(n, p);
}

TEST(NegativeSampling, ExactlyOneSlotChanges) {
  Rng rng(4);
  const Triple p{3, 1, 7};
  std::vector<Corruption> modes;
  const auto negs = sample_negatives(p, 5000, 50, rng, &modes);
  ASSERT_EQ(modes.size(), negs.size());
  for (std::size_t i = 0; i < negs.size(); ++i) {
    EXPECT_EQ(negs[i].relation, p.relation);
    if (modes[i] == Corruption::kHead) {
      EXPECT_EQ(negs[i].tail, p.tail);
    } else {
      EXPECT_EQ(negs[i].head, p.head);
    }
    EXPECT_LT(negs[i].head, 50u);
    EXPECT_LT(negs[i].tail, 50u);
  }
}

TEST(NegativeSampling, SideRatioAndUniformity) {
  Rng rng(99);
  std::vector<Corruption> modes;
  const auto negs = sample_negatives({0, 0, 0}, 100000, 10, rng, &modes);
  const auto heads = std::count(modes.begin(), modes.end(), Corruption::kHead);
  const double ratio = static_cast<double>(heads) / 1e5;
  EXPECT_GE(ratio, 0.49);
  EXPECT_LE(ratio, 0.51);
  std::vector<int> hist(10);
  for (std::size_t i = 0; i < negs.size(); ++i) ++hist[modes[i] == Corruption::kHead ? negs[i].head : negs[i].tail];
  for (int c : hist) EXPECT_NEAR(c / 1e5, 0.1, 0.01);
}

TEST(NegativeSampling, BatchLayoutAndErrors) {
  Rng rng(5);
  const std::vector<Triple> train{{0, 0, 1}, {1, 1, 2}};
  const auto b = sample_batch(train, 7, 3, 4, rng);
  EXPECT_EQ(b.positives.size(), 7u);
  EXPECT_EQ(b.negatives.size(), 21u);
  EXPECT_EQ(b.per_positive, 3u);
  for (std::size_t i = 0; i < b.negatives.size(); ++i) EXPECT_EQ(b.negatives[i].relation, b.positives[i / 3].relation);
  EXPECT_THROW(sample_negatives({0, 0, 0}, 0, 4, rng), ConfigError);
  EXPECT_THROW(sample_batch({}, 1, 1, 4, rng), ConfigError);
}

TEST(AdversarialWeights, Examples) {
  const auto uniform = adversarial_weights(std::vector<double>{-1, -5, -9}, 0.0);
  for (double w : uniform) EXPECT_DOUBLE_EQ(w, 1.0 / 3);
  EXPECT_EQ(adversarial_weights(std::vector<double>{-4}, 1.0), std::vector<double>{1.0});
  const auto w = adversarial_weights(std::vector<double>{-1, -2}, 1.0);
  EXPECT_NEAR(w[0], 0.7310585786, 1e-9);
  EXPECT_NEAR(w[1], 0.2689414214, 1e-9);
  EXPECT_THROW(adversarial_weights(std::vector<double>{}, 1.0), ConfigError);
  EXPECT_THROW(adversarial_weights(std::vector<double>{NAN}, 1.0), NumericalError);
}

TEST(AdversarialWeights, SumToOneAndShiftInvariant) {
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const auto n = 1 + rng.below(40);
    const auto s = random_vec(rng, n, -500, 0);
    const double alpha = rng.uniform(0, 3);
    const auto w = adversarial_weights(s, alpha);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    auto shifted = s;
    const double c = rng.uniform(-100, 100);
    for (auto& x : shifted) x += c;
    const auto w2 = adversarial_weights(shifted, alpha);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(w[j], w2[j], 1e-9);
  }
}

TEST(NsaLoss, Examples) {
  // -log sigma(9) - log sigma(2)
  EXPECT_NEAR(nsa_loss(-1, std::vector<double>{-12}, 10, 1), -std::log(sigmoid(9)) - std::log(sigmoid(2)), 1e-12);
  EXPECT_NEAR(nsa_loss(-1, std::vector<double>{-12}, 10, 1), 0.12705, 1e-4);
  // pos = neg = -gamma: both terms are log 2
  EXPECT_NEAR(nsa_loss(-10, std::vector<double>{-10, -10}, 10, 1), 2 * std::log(2.0), 1e-12);
  // huge margins stay finite
  EXPECT_TRUE(std::isfinite(nsa_loss(-1e4, std::vector<double>{0}, 10, 1)));
}

TEST(NsaLoss, Monotone) {
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    const double pos = rng.uniform(-30, 0);
    const auto neg = random_vec(rng, 1 + rng.below(8), -30, 0);
    const double base = nsa_loss(pos, neg, 10, 1);
    EXPECT_LT(nsa_loss(pos + 0.5, neg, 10, 1), base);
    // Lowering every negative score (at fixed weights, which shift
    // invariance preserves) reduces the loss.
    auto lower = neg;
    for (auto& x : lower) x -= 0.5;
    EXPECT_LT(nsa_loss(pos, lower, 10, 1), base);
  }
}

TEST(NsaBatchLoss, MatchesScalarLoss) {
  Rng rng(12);
  const std::size_t b = 5, n = 4;
  ad::Tensor pos = ad::Tensor::matrix(b, 1), neg = ad::Tensor::matrix(b * n, 1);
  for (auto& x : pos.data()) x = rng.uniform(-20, 0);
  for (auto& x : neg.data()) x = rng.uniform(-20, 0);
  for (double alpha : {0.0, 0.5, 1.0}) {
    ad::Tape tape;
    const auto w = adversarial_weight_matrix(neg, n, alpha);
    const auto loss = nsa_batch_loss(tape.constant(pos), tape.constant(neg), w, 10.0);
    double want = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      want += nsa_loss(pos[i], std::vector<double>(neg.data().begin() + i * n, neg.data().begin() + (i + 1) * n), 10.0,
                       alpha);
    }
    EXPECT_NEAR(loss.value().item(), want / b, 1e-12);
  }
}

TEST(NsaBatchLoss, WeightsCarryNoGradient) {
  // With detached weights, d loss / d neg_i = -p_i * d log sigma(-gamma - neg_i) / B.
  ad::Parameter pos("pos", ad::Tensor({1, 1}, {-3.0}));
  ad::Parameter neg("neg", ad::Tensor({2, 1}, {-1.0, -4.0}));
  ad::Tape tape;
  const auto w = adversarial_weight_matrix(neg.value, 2, 1.0);
  auto loss = nsa_batch_loss(tape.param(pos), tape.param(neg), w, 10.0);
  tape.backward(loss);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(neg.grad[i], w[i] * sigmoid(10.0 + neg.value[i]), 1e-12);
  }
  EXPECT_NEAR(pos.grad[0], -sigmoid(-(10.0 - 3.0)), 1e-12);
}
