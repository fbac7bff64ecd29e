#pragma once

// Posterior predictive scoring of edges.
//
// A hypothetical edge at query time t is scored by extending the seating
// prior with one more customer at t: each existing cluster attracts the new
// edge with mass equal to its summed decay over past member times, a fresh
// cluster with mass alpha. The edge probability mixes the collapsed
// endpoint predictives over that distribution. Test edges are scored
// independently given a trained state, and Monte-Carlo averaged over
// posterior samples.

#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dynmdnd/decay.hpp"
#include "dynmdnd/gibbs.hpp"
#include "dynmdnd/numeric.hpp"
#include "dynmdnd/types.hpp"

namespace dynmdnd {

struct SplitSpec {
  enum class Mode { WithinSlotHoldout, NextSlot };
  Mode mode = Mode::WithinSlotHoldout;
  double fraction = 0.2;   // held-out share per slot
  int target_slot = -1;    // NextSlot: slot to predict; -1 = last

  void validate() const {
    if (mode == Mode::WithinSlotHoldout && !(fraction > 0.0 && fraction < 1.0))
      throw std::invalid_argument("SplitSpec: fraction must lie in (0, 1)");
  }
};

struct TrainTestSplit {
  EdgeSequence train;
  EdgeSequence test;
};

// Seeded split. Within-slot holdout samples round(fraction * n) edges
// uniformly per slot (always leaving at least one training edge per slot);
// next-slot puts slots before `target_slot` in train and the target slot in
// test. Timestamps are preserved.
inline TrainTestSplit split_edges(const EdgeSequence& data, const SplitSpec& spec,
                                  std::uint64_t seed) {
  spec.validate();
  data.validate();
  TrainTestSplit out;
  out.train.slot_boundaries = data.slot_boundaries;
  out.test.slot_boundaries = data.slot_boundaries;

  if (spec.mode == SplitSpec::Mode::NextSlot) {
    const int target = spec.target_slot < 0 ? data.n_slots() - 1 : spec.target_slot;
    if (data.n_slots() < 2) throw std::invalid_argument("split_edges: need at least two slots");
    if (target < 1 || target >= data.n_slots())
      throw std::invalid_argument("split_edges: target slot out of range");
    for (const auto& e : data.edges) {
      const int s = data.slot_of(e.time);
      if (s < target)
        out.train.edges.push_back(e);
      else if (s == target)
        out.test.edges.push_back(e);
    }
    if (out.test.empty()) throw std::invalid_argument("split_edges: target slot is empty");
  } else {
    std::map<int, std::vector<std::size_t>> by_slot;
    for (std::size_t i = 0; i < data.size(); ++i) by_slot[data.slot_of(data[i].time)].push_back(i);
    std::vector<bool> held(data.size(), false);
    for (auto& [slot, idx] : by_slot) {
      Rng rng(split_seed(seed, static_cast<std::uint64_t>(slot)));
      for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
      std::size_t n_test = static_cast<std::size_t>(spec.fraction * idx.size() + 0.5);
      if (n_test >= idx.size()) n_test = idx.size() - 1;
      for (std::size_t i = 0; i < n_test; ++i) held[idx[i]] = true;
    }
    for (std::size_t i = 0; i < data.size(); ++i)
      (held[i] ? out.test : out.train).edges.push_back(data[i]);
  }
  if (out.train.empty()) throw std::invalid_argument("split_edges: empty training set");
  return out;
}

// Mixture scorer for one posterior sample at one query time.
class SampleScorer {
 public:
  SampleScorer(const PosteriorSample& sample, const EdgeSequence& train, double t_query)
      : sample_(sample) {
    if (sample.clusters.size() != train.size())
      throw std::invalid_argument("SampleScorer: sample does not match training data");
    std::map<ClusterId, double> mass;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double gap = t_query - train[i].time;
      if (gap < 0.0) continue;  // future edges carry no seating mass
      const double w = decay_eval(sample.hp.decay, gap);
      if (w > 0.0) mass[sample.clusters[i]] += w;
    }
    double total = sample_.hp.alpha;
    for (const auto& [k, w] : mass) total += w;
    for (const auto& [k, w] : mass) cluster_probs_.emplace_back(k, w / total);
    new_cluster_prob_ = sample_.hp.alpha / total;
  }

  // Probability of the directed pair; map vertices unseen in training to
  // kNewVertex before calling.
  double edge_prob(VertexId s, VertexId r) const {
    double p = new_cluster_prob_ * sample_.counts.edge_predictive(s, r, std::nullopt, sample_.hp);
    for (const auto& [k, pk] : cluster_probs_)
      p += pk * sample_.counts.edge_predictive(s, r, k, sample_.hp);
    return p;
  }

  // Total probability that both endpoints are previously seen vertices;
  // the complement is the mass on pairs involving an unseen vertex.
  double seen_pair_mass() const {
    const auto seen_side = [&](std::optional<ClusterId> k, Side s) {
      const ClusterId kk = k ? *k : ClusterId(-1);
      return 1.0 - sample_.counts.vertex_predictive(kNewVertex, kk, s, sample_.hp);
    };
    double m = new_cluster_prob_ * seen_side(std::nullopt, Side::Sender) *
               seen_side(std::nullopt, Side::Recipient);
    for (const auto& [k, pk] : cluster_probs_)
      m += pk * seen_side(k, Side::Sender) * seen_side(k, Side::Recipient);
    return m;
  }

  double new_cluster_prob() const { return new_cluster_prob_; }

  VertexId map_vertex(VertexId v) const {
    return sample_.counts.global_tables(v) > 0 ? v : kNewVertex;
  }

 private:
  const PosteriorSample& sample_;
  std::vector<std::pair<ClusterId, double>> cluster_probs_;
  double new_cluster_prob_ = 0.0;
};

// Held-out predictive log-likelihood: per edge, the posterior-averaged
// probability (log-mean-exp across samples); summed over test edges. Test
// edges are scored independently given the trained state.
inline double heldout_loglik(std::span<const PosteriorSample> samples, const EdgeSequence& train,
                             const EdgeSequence& test) {
  if (samples.empty()) throw std::invalid_argument("heldout_loglik: no posterior samples");
  if (test.empty()) throw std::invalid_argument("heldout_loglik: empty test set");
  double total = 0.0;
  std::vector<double> lps(samples.size());
  for (const auto& e : test.edges) {
    for (std::size_t s = 0; s < samples.size(); ++s) {
      SampleScorer scorer(samples[s], train, e.time);
      lps[s] = std::log(scorer.edge_prob(scorer.map_vertex(e.sender), scorer.map_vertex(e.recipient)));
    }
    total += log_sum_exp(lps) - std::log(static_cast<double>(samples.size()));
  }
  return total;
}

using EdgePair = std::pair<VertexId, VertexId>;

struct RankedPrediction {
  struct Entry {
    VertexId sender;
    VertexId recipient;
    double score;
  };
  std::vector<Entry> edges;        // sorted by descending score, ties by (sender, recipient)
  int n_predicted = 0;
  bool had_duplicates = false;     // duplicate candidate pairs were deduplicated
  double new_vertex_mass = 0.0;    // posterior-mean mass on pairs with an unseen vertex

  std::vector<EdgePair> pairs() const {
    std::vector<EdgePair> out;
    out.reserve(edges.size());
    for (const auto& e : edges) out.emplace_back(e.sender, e.recipient);
    return out;
  }
};

// Scores candidate pairs at t_query with the same mixture as heldout_loglik
// and returns them ranked. Candidates are deduplicated; ranking ties break
// lexicographically so output order is deterministic.
inline RankedPrediction score_candidate_edges(std::span<const PosteriorSample> samples,
                                              const EdgeSequence& train,
                                              std::span<const EdgePair> candidates,
                                              double t_query) {
  if (samples.empty()) throw std::invalid_argument("score_candidate_edges: no posterior samples");
  if (candidates.empty()) throw std::invalid_argument("score_candidate_edges: no candidates");
  std::set<EdgePair> dedup(candidates.begin(), candidates.end());
  RankedPrediction out;
  out.had_duplicates = dedup.size() != candidates.size();

  std::map<EdgePair, double> score;
  double new_mass = 0.0;
  for (const auto& sample : samples) {
    SampleScorer scorer(sample, train, t_query);
    for (const auto& c : dedup)
      score[c] += scorer.edge_prob(scorer.map_vertex(c.first), scorer.map_vertex(c.second));
    new_mass += 1.0 - scorer.seen_pair_mass();
  }
  out.new_vertex_mass = new_mass / static_cast<double>(samples.size());
  out.edges.reserve(dedup.size());
  for (const auto& [pair, s] : score)
    out.edges.push_back({pair.first, pair.second, s / static_cast<double>(samples.size())});
  std::sort(out.edges.begin(), out.edges.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.sender != b.sender) return a.sender < b.sender;
    return a.recipient < b.recipient;
  });
  out.n_predicted = static_cast<int>(out.edges.size());
  return out;
}

// All ordered pairs of vertices seen in the training data.
inline std::vector<EdgePair> training_pair_grid(const EdgeSequence& train) {
  std::set<VertexId> verts;
  for (const auto& e : train.edges) {
    verts.insert(e.sender);
    verts.insert(e.recipient);
  }
  std::vector<EdgePair> grid;
  grid.reserve(verts.size() * verts.size());
  for (VertexId s : verts)
    for (VertexId r : verts) grid.emplace_back(s, r);
  return grid;
}

}  // namespace dynmdnd
