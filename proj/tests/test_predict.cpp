#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "dynmdnd/predict.hpp"
#include "dynmdnd/simulate.hpp"

using namespace dynmdnd;

namespace {

EdgeSequence make_edges(std::vector<std::tuple<int, int, double>> rows) {
  EdgeSequence e;
  for (auto& [s, r, t] : rows) e.edges.push_back({s, r, t});
  return e;
}

PosteriorSample sample_from_sim(const SimResult& sim) {
  return {sim.seating.links, sim.seating.clusters, sim.counts, {}, 0};
}

}  // namespace

TEST(Predict, EmptyModelScoresSingleEdgeAsCertain) {
  PosteriorSample s;
  s.hp.decay = {DecayKind::Identity, 1.0};
  EdgeSequence train;  // nothing observed
  EdgeSequence test = make_edges({{0, 1, 0.0}});
  std::vector<PosteriorSample> samples{s};
  EXPECT_DOUBLE_EQ(heldout_loglik(samples, train, test), 0.0);
}

TEST(Predict, DuplicateSamplesDoNotChangeTheResult) {
  SimConfig sc;
  sc.n_edges = 60;
  sc.hp.decay = {DecayKind::Exponential, 2.0};
  sc.seed = 100;
  auto sim = simulate(sc);
  PosteriorSample s = sample_from_sim(sim);
  s.hp = sc.hp;
  EdgeSequence test = make_edges({{0, 1, 60.0}, {1, 2, 61.0}});
  std::vector<PosteriorSample> one{s};
  std::vector<PosteriorSample> two{s, s};
  EXPECT_NEAR(heldout_loglik(one, sim.edges, test), heldout_loglik(two, sim.edges, test), 1e-12);
}

TEST(Predict, ErrorsOnEmptyInputs) {
  PosteriorSample s;
  std::vector<PosteriorSample> samples{s};
  EdgeSequence train, empty_test;
  EXPECT_THROW(heldout_loglik(samples, train, empty_test), std::invalid_argument);
  EXPECT_THROW(heldout_loglik({}, train, make_edges({{0, 0, 0.0}})), std::invalid_argument);
}

TEST(Predict, MixtureMatchesIndependentRecomputation) {
  // five training edges with a hand-built latent state; the expected score
  // recomputes cluster weights and endpoint predictives from raw counts
  auto train = make_edges({{0, 1, 0.0}, {0, 1, 1.0}, {1, 0, 2.0}, {2, 0, 3.0}, {0, 1, 4.0}});
  Hyperparams hp;
  hp.decay = {DecayKind::Exponential, 2.0};
  hp.alpha = 0.8;
  hp.gamma = 1.3;
  hp.tau = 0.9;

  // seating: edges {0,1,4} in one cluster, {2,3} in another
  PosteriorSample s;
  s.hp = hp;
  s.links = {0, 0, 2, 2, 1};
  s.clusters = links_to_clusters(s.links);
  // one table per customer keeps m easy to audit: m_v = number of cells
  // times their table counts; here every cell has one table per customer
  for (std::size_t e = 0; e < train.size(); ++e)
    for (Side side : {Side::Sender, Side::Recipient})
      s.counts.seat(s.clusters[e], side, train[e].vertex(side), s.counts.fresh_table_id());

  const double t_query = 6.0;
  const VertexId qs = 0, qr = 1;

  // independent recomputation
  const auto f = [&](double d) { return std::exp(-d / 2.0); };
  std::map<int, double> mass;
  for (std::size_t j = 0; j < train.size(); ++j) mass[s.clusters[j]] += f(t_query - train[j].time);
  double total = hp.alpha;
  for (auto& [k, w] : mass) total += w;
  // global tables: every seat opened a table; 10 tables across 5 edges
  const double m_tot = 10.0;
  const auto m_v = [&](VertexId v) {
    double m = 0.0;
    for (std::size_t e = 0; e < train.size(); ++e) {
      m += train[e].sender == v;
      m += train[e].recipient == v;
    }
    return m;
  };
  const auto pred = [&](VertexId v, int k, Side side) {
    double n_kv = 0.0, n_k = 0.0;
    for (std::size_t e = 0; e < train.size(); ++e) {
      if (s.clusters[e] != k) continue;
      n_kv += train[e].vertex(side) == v;
      n_k += 1.0;
    }
    return (n_kv + hp.tau * m_v(v) / (m_tot + hp.gamma)) / (n_k + hp.tau);
  };
  double expect = hp.alpha / total * (hp.tau * m_v(qs) / (m_tot + hp.gamma) / hp.tau) *
                  (hp.tau * m_v(qr) / (m_tot + hp.gamma) / hp.tau);
  for (auto& [k, w] : mass) expect += w / total * pred(qs, k, Side::Sender) * pred(qr, k, Side::Recipient);

  SampleScorer scorer(s, train, t_query);
  EXPECT_NEAR(scorer.edge_prob(qs, qr), expect, 1e-12);

  // and through the public held-out path
  EdgeSequence test = make_edges({{qs, qr, t_query}});
  std::vector<PosteriorSample> samples{s};
  EXPECT_NEAR(heldout_loglik(samples, train, test), std::log(expect), 1e-12);
}

TEST(Predict, FutureTrainingEdgesCarryNoMass) {
  auto train = make_edges({{0, 1, 0.0}, {2, 3, 100.0}});
  PosteriorSample s;
  s.hp.decay = {DecayKind::Identity, 1.0};
  s.links = {0, 1};
  s.clusters = {0, 1};
  for (std::size_t e = 0; e < train.size(); ++e)
    for (Side side : {Side::Sender, Side::Recipient})
      s.counts.seat(s.clusters[e], side, train[e].vertex(side), s.counts.fresh_table_id());
  // query in between: only edge 0's cluster exists yet
  SampleScorer scorer(s, train, 50.0);
  // cluster of edge 1 is future; mixture is {cluster 0, new} with weights 1 and alpha
  const double p_cluster0 = 1.0 / (1.0 + s.hp.alpha);
  const double p_new = s.hp.alpha / (1.0 + s.hp.alpha);
  const double expect = p_cluster0 * s.counts.edge_predictive(0, 1, 0, s.hp) +
                        p_new * s.counts.edge_predictive(0, 1, std::nullopt, s.hp);
  EXPECT_NEAR(scorer.edge_prob(0, 1), expect, 1e-14);
}

TEST(Predict, CandidateScoresSumWithNewMassToOne) {
  SimConfig sc;
  sc.n_edges = 80;
  sc.hp.decay = {DecayKind::Exponential, 3.0};
  sc.hp.gamma = 2.0;
  sc.hp.tau = 0.7;
  sc.seed = 200;
  auto sim = simulate(sc);
  PosteriorSample s = sample_from_sim(sim);
  s.hp = sc.hp;
  std::vector<PosteriorSample> samples{s, s};

  const auto grid = training_pair_grid(sim.edges);
  const auto ranked = score_candidate_edges(samples, sim.edges, grid, 85.0);
  double total = ranked.new_vertex_mass;
  for (const auto& e : ranked.edges) total += e.score;
  EXPECT_NEAR(total, 1.0, 1e-10);
  EXPECT_FALSE(ranked.had_duplicates);
  // scores are non-increasing
  for (std::size_t i = 1; i < ranked.edges.size(); ++i)
    EXPECT_GE(ranked.edges[i - 1].score, ranked.edges[i].score);
}

TEST(Predict, SingleCandidateAndDuplicateHandling) {
  auto train = make_edges({{0, 1, 0.0}});
  PosteriorSample s;
  s.hp.decay = {DecayKind::Identity, 1.0};
  s.links = {0};
  s.clusters = {0};
  s.counts.seat(0, Side::Sender, 0, s.counts.fresh_table_id());
  s.counts.seat(0, Side::Recipient, 1, s.counts.fresh_table_id());
  std::vector<PosteriorSample> samples{s};
  std::vector<EdgePair> cands{{0, 1}, {0, 1}, {1, 0}};
  const auto ranked = score_candidate_edges(samples, train, cands, 1.0);
  EXPECT_TRUE(ranked.had_duplicates);
  EXPECT_EQ(ranked.edges.size(), 2u);
  EXPECT_EQ(ranked.n_predicted, 2);
}

TEST(Predict, TiesBreakLexicographically) {
  // two candidates with identical scores by symmetry
  auto train = make_edges({{0, 1, 0.0}, {1, 0, 0.0}});
  PosteriorSample s;
  s.hp.decay = {DecayKind::Identity, 1.0};
  s.links = {0, 0};
  s.clusters = {0, 0};
  for (std::size_t e = 0; e < train.size(); ++e)
    for (Side side : {Side::Sender, Side::Recipient})
      s.counts.seat(0, side, train[e].vertex(side), s.counts.fresh_table_id());
  std::vector<PosteriorSample> samples{s};
  std::vector<EdgePair> cands{{1, 0}, {0, 1}};
  const auto ranked = score_candidate_edges(samples, train, cands, 1.0);
  ASSERT_EQ(ranked.edges.size(), 2u);
  EXPECT_DOUBLE_EQ(ranked.edges[0].score, ranked.edges[1].score);
  EXPECT_EQ(ranked.edges[0].sender, 0);
  EXPECT_EQ(ranked.edges[1].sender, 1);
}

TEST(Split, WithinSlotHoldoutRespectsFractionPerSlot) {
  EdgeSequence data;
  for (int i = 0; i < 100; ++i) data.edges.push_back({0, 1, double(i)});
  data.slot_boundaries = {25.0, 50.0, 75.0, 100.0};
  SplitSpec spec;
  spec.fraction = 0.2;
  auto split = split_edges(data, spec, 9);
  EXPECT_EQ(split.test.size(), 20u);
  EXPECT_EQ(split.train.size(), 80u);
  // per slot: 5 held out of 25
  std::map<int, int> per_slot;
  for (const auto& e : split.test.edges) per_slot[data.slot_of(e.time)] += 1;
  for (const auto& [slot, n] : per_slot) EXPECT_EQ(n, 5);
  // deterministic given the seed
  auto again = split_edges(data, spec, 9);
  EXPECT_EQ(split.test.edges.size(), again.test.edges.size());
  for (std::size_t i = 0; i < split.test.size(); ++i)
    EXPECT_EQ(split.test[i].time, again.test[i].time);
  // different seed picks different edges
  auto other = split_edges(data, spec, 10);
  bool differs = false;
  for (std::size_t i = 0; i < split.test.size(); ++i)
    differs |= split.test[i].time != other.test[i].time;
  EXPECT_TRUE(differs);
}

TEST(Split, NextSlotSplitsAtTargetBoundary) {
  EdgeSequence data;
  for (int i = 0; i < 30; ++i) data.edges.push_back({0, 1, double(i)});
  data.slot_boundaries = {10.0, 20.0, 30.0};
  SplitSpec spec;
  spec.mode = SplitSpec::Mode::NextSlot;
  spec.target_slot = 2;
  auto split = split_edges(data, spec, 1);
  EXPECT_EQ(split.train.size(), 20u);
  EXPECT_EQ(split.test.size(), 10u);
  for (const auto& e : split.test.edges) EXPECT_GE(e.time, 20.0);
  // bad fraction and bad target rejected
  SplitSpec bad;
  bad.fraction = 1.5;
  EXPECT_THROW(split_edges(data, bad, 1), std::invalid_argument);
  SplitSpec bad2;
  bad2.mode = SplitSpec::Mode::NextSlot;
  bad2.target_slot = 7;
  EXPECT_THROW(split_edges(data, bad2, 1), std::invalid_argument);
}
