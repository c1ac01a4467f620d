#pragma once

// RotatE scoring, negative sampling and the self-adversarial loss.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "earl/autodiff.hpp"
#include "earl/common.hpp"
#include "earl/kg.hpp"

namespace earl {

// Rows of width D are read as C^(D/2): first half real parts, second half
// imaginary parts. A relation row contributes its first D/2 entries as phases.
inline void require_even_width(std::size_t d) {
  if (d == 0 || d % 2 != 0) throw ConfigError("RotatE needs an even, positive embedding width (got " + std::to_string(d) + ")");
}

// -|| h o e^{i theta} - t ||
inline double rotate_score(std::span<const double> h, std::span<const double> r, std::span<const double> t) {
  const auto d = h.size();
  require_even_width(d);
  if (r.size() != d || t.size() != d) throw ConfigError("rotate_score: width mismatch");
  const auto half = d / 2;
  double sq = 0.0;
  for (std::size_t k = 0; k < half; ++k) {
    const double c = std::cos(r[k]), s = std::sin(r[k]);
    const double re = h[k] * c - h[half + k] * s - t[k];
    const double im = h[k] * s + h[half + k] * c - t[half + k];
    sq += re * re + im * im;
  }
  return -std::sqrt(sq);
}

// Scores triple i as rotate_score(ent[heads[i]], rel[rels[i]], ent[tails[i]]).
// Output is (N x 1). Gathering happens inside the primitive so a batch with
// many negatives never materializes N x D copies.
inline ad::Var rotate_scores(ad::Var ent, ad::Var rel, ad::IndexList heads, ad::IndexList rels,
                             ad::IndexList tails) {
  const auto& E = ent.value();
  const auto& R = rel.value();
  const auto d = E.cols();
  require_even_width(d);
  if (R.cols() != d) throw ConfigError("rotate_scores: entity width " + std::to_string(d) + " vs relation width " + std::to_string(R.cols()));
  const auto n = heads->size();
  if (rels->size() != n || tails->size() != n) throw ConfigError("rotate_scores: index list lengths differ");
  for (std::size_t i = 0; i < n; ++i) {
    if ((*heads)[i] >= E.rows() || (*tails)[i] >= E.rows() || (*rels)[i] >= R.rows()) {
      throw ConfigError("rotate_scores: index out of range");
    }
  }
  ad::Tensor out = ad::Tensor::matrix(n, 1);
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) out[i] = rotate_score(E.row((*heads)[i]), R.row((*rels)[i]), E.row((*tails)[i]));
  });
  const ad::Var self{ent.tape, ent.tape->size()};
  return ent.tape->record(
      "rotate_scores", std::move(out), {ent, rel}, [ent, rel, self, heads, rels, tails, d](ad::Tape& tp, const ad::Tensor& g) {
        const auto& E = tp.value(ent);
        const auto& R = tp.value(rel);
        const auto& S = tp.value(self);
        const bool want_e = tp.wants(ent), want_r = tp.wants(rel);
        ad::Tensor* gE = want_e ? &tp.grad(ent) : nullptr;
        ad::Tensor* gR = want_r ? &tp.grad(rel) : nullptr;
        const auto half = d / 2;
        for (std::size_t i = 0; i < heads->size(); ++i) {
          const double dist = -S[i];
          if (dist == 0.0 || g[i] == 0.0) continue;
          const double u = -g[i] / dist;
          const auto h = E.row((*heads)[i]);
          const auto r = R.row((*rels)[i]);
          const auto t = E.row((*tails)[i]);
          for (std::size_t k = 0; k < half; ++k) {
            const double c = std::cos(r[k]), s = std::sin(r[k]);
            const double hr = h[k], hi = h[half + k];
            const double re = hr * c - hi * s - t[k];
            const double im = hr * s + hi * c - t[half + k];
            if (gE) {
              gE->at((*heads)[i], k) += u * (re * c + im * s);
              gE->at((*heads)[i], half + k) += u * (-re * s + im * c);
              gE->at((*tails)[i], k) -= u * re;
              gE->at((*tails)[i], half + k) -= u * im;
            }
            if (gR) gR->at((*rels)[i], k) += u * (re * (-hr * s - hi * c) + im * (hr * c - hi * s));
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Negative sampling

enum class Corruption : unsigned char { kHead, kTail };

struct Batch {
  std::vector<Triple> positives;
  std::vector<Triple> negatives;  // positives.size() * per_positive, grouped by positive
  std::vector<Corruption> modes;  // one per negative
  std::size_t per_positive = 0;
};

// Each negative replaces the head or the tail (probability 1/2 each) with an
// entity drawn uniformly from all entities. Known true triples are not
// filtered out.
inline std::vector<Triple> sample_negatives(const Triple& positive, std::size_t n, std::size_t num_entities,
                                            Rng& rng, std::vector<Corruption>* modes = nullptr) {
  if (n == 0) throw ConfigError("need at least one negative per positive");
  if (num_entities == 0) throw ConfigError("cannot sample from an empty entity set");
  std::vector<Triple> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Triple t = positive;
    const bool head = rng.coin();
    const auto e = static_cast<Index>(rng.below(num_entities));
    (head ? t.head : t.tail) = e;
    out.push_back(t);
    if (modes) modes->push_back(head ? Corruption::kHead : Corruption::kTail);
  }
  return out;
}

inline Batch sample_batch(std::span<const Triple> train, std::size_t batch_size, std::size_t n_negatives,
                          std::size_t num_entities, Rng& rng) {
  if (train.empty()) throw ConfigError("no training triples");
  Batch b;
  b.per_positive = n_negatives;
  b.positives.reserve(batch_size);
  b.negatives.reserve(batch_size * n_negatives);
  b.modes.reserve(batch_size * n_negatives);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto& pos = train[rng.below(train.size())];
    b.positives.push_back(pos);
    auto negs = sample_negatives(pos, n_negatives, num_entities, rng, &b.modes);
    b.negatives.insert(b.negatives.end(), negs.begin(), negs.end());
  }
  return b;
}

// ---------------------------------------------------------------------------
// Loss

// softmax(alpha * scores), max-shifted.
inline std::vector<double> adversarial_weights(std::span<const double> neg_scores, double alpha) {
  if (neg_scores.empty()) throw ConfigError("adversarial_weights: empty score list");
  double mx = -INFINITY;
  for (double s : neg_scores) {
    if (!std::isfinite(s)) throw NumericalError("adversarial_weights: non-finite score");
    mx = std::max(mx, alpha * s);
  }
  std::vector<double> w(neg_scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) z += (w[i] = std::exp(alpha * neg_scores[i] - mx));
  for (auto& x : w) x /= z;
  return w;
}

inline double log_sigmoid(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); }

// -log sigma(gamma + pos) - sum_i p_i log sigma(-gamma - neg_i)
inline double nsa_loss(double pos_score, std::span<const double> neg_scores, double gamma, double alpha) {
  const auto p = adversarial_weights(neg_scores, alpha);
  double loss = -log_sigmoid(gamma + pos_score);
  for (std::size_t i = 0; i < p.size(); ++i) loss -= p[i] * log_sigmoid(-gamma - neg_scores[i]);
  if (!std::isfinite(loss)) throw NumericalError("nsa_loss: non-finite loss");
  return loss;
}

// Self-adversarial weights for a (B*n x 1) negative score column, as a
// constant (B x n) tensor.
inline ad::Tensor adversarial_weight_matrix(const ad::Tensor& neg_scores, std::size_t per_positive, double alpha) {
  const auto b = neg_scores.size() / per_positive;
  ad::Tensor w = ad::Tensor::matrix(b, per_positive);
  for (std::size_t i = 0; i < b; ++i) {
    const auto row = adversarial_weights(neg_scores.data().subspan(i * per_positive, per_positive), alpha);
    std::copy(row.begin(), row.end(), w.row(i).begin());
  }
  return w;
}

// Mean over positives of the self-adversarial loss. `weights` is (B x n) and
// enters as a constant, so no gradient flows through the sampling weights.
inline ad::Var nsa_batch_loss(ad::Var pos_scores, ad::Var neg_scores, const ad::Tensor& weights, double gamma) {
  auto& tape = *pos_scores.tape;
  const auto b = pos_scores.rows();
  if (weights.rows() != b || weights.size() != neg_scores.value().size()) {
    throw ConfigError("nsa_batch_loss: weights " + ad::to_string(weights.shape()) + " do not match scores");
  }
  auto pos_term = ad::scale(ad::log_sigmoid(ad::add_scalar(pos_scores, gamma)), -1.0);
  auto negs = ad::reshape(neg_scores, {b, weights.cols()});
  auto neg_ls = ad::log_sigmoid(ad::add_scalar(ad::scale(negs, -1.0), -gamma));
  auto neg_term = ad::scale(ad::sum_rows(ad::mul(neg_ls, tape.constant(weights, "adversarial weights"))), -1.0);
  return ad::mean(pos_term + neg_term);
}

}  // namespace earl
