#pragma once

// Dynamic link prediction protocol: train on slots 1..T, predict the edges
// of slot T+1, repeat with independent chains and report mean and standard
// deviation of each metric. F1 uses the top-N predictions where N is the
// number of distinct true pairs in the target slot; the candidate set is
// every ordered pair of training vertices (scores for pairs involving an
// unseen vertex cannot be itemized, so their total mass is reported
// separately).

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dynmdnd/gibbs.hpp"
#include "dynmdnd/metrics.hpp"
#include "dynmdnd/predict.hpp"

namespace dynmdnd {

struct EvalConfig {
  std::vector<int> ks{1, 5, 10};
  int repetitions = 10;
  HitsMode hits_mode = HitsMode::PrecisionAtK;
  bool baselines = false;  // frequency / recency rankings for sanity checks

  void validate() const {
    if (repetitions < 1) throw std::invalid_argument("EvalConfig: repetitions must be >= 1");
    for (int k : ks)
      if (k < 1) throw std::invalid_argument("EvalConfig: every k must be >= 1");
  }
};

struct MetricRow {
  std::string metric;
  int k = 0;
  int repetition = 0;
  double value = 0.0;
};

struct MetricAggregate {
  std::string metric;
  int k = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::vector<MetricAggregate> aggregates;
  int n_predicted = 0;  // F1 cut: number of distinct true pairs
  int n_truth = 0;
  double t_query = 0.0;
  std::string hits_mode;
};

namespace detail {

inline void aggregate_rows(MetricReport& report) {
  std::map<std::pair<std::string, int>, std::vector<double>> grouped;
  for (const auto& r : report.rows) grouped[{r.metric, r.k}].push_back(r.value);
  for (const auto& [key, vals] : grouped) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0.0;
    if (vals.size() > 1) {
      for (double v : vals) var += (v - mean) * (v - mean);
      var /= (vals.size() - 1);
    }
    report.aggregates.push_back({key.first, key.second, mean, std::sqrt(var)});
  }
}

inline void score_ranking(MetricReport& report, const std::string& prefix,
                          const std::vector<EdgePair>& ranked, const EdgePairSet& truth,
                          const EvalConfig& cfg, int rep) {
  const int n = static_cast<int>(truth.size());
  EdgePairSet top_n(ranked.begin(),
                    ranked.begin() + std::min<std::size_t>(n, ranked.size()));
  report.rows.push_back({prefix + "f1", n, rep, f1_score(top_n, truth)});
  for (int k : cfg.ks) {
    report.rows.push_back({prefix + "map", k, rep, map_at_k(ranked, truth, k)});
    report.rows.push_back({prefix + "hits", k, rep, hits_at_k(ranked, truth, k, cfg.hits_mode)});
  }
}

}  // namespace detail

inline MetricReport evaluate_next_slot(const EdgeSequence& data, const Hyperparams& hp,
                                       const ChainConfig& chain_cfg, const EvalConfig& eval_cfg,
                                       int target_slot = -1) {
  eval_cfg.validate();
  if (data.n_slots() < 2)
    throw std::invalid_argument("evaluate_next_slot: need at least two slots");

  SplitSpec split_spec;
  split_spec.mode = SplitSpec::Mode::NextSlot;
  split_spec.target_slot = target_slot;
  const auto split = split_edges(data, split_spec, chain_cfg.seed);
  const int target = target_slot < 0 ? data.n_slots() - 1 : target_slot;

  const EdgePairSet truth = distinct_pairs(split.test);
  const auto candidates = training_pair_grid(split.train);

  MetricReport report;
  report.n_truth = static_cast<int>(truth.size());
  report.n_predicted = report.n_truth;
  report.hits_mode = eval_cfg.hits_mode == HitsMode::PrecisionAtK ? "precision@k" : "recall-style";
  const double lower = target == 0 ? split.test.edges.front().time
                                   : data.slot_boundaries[target - 1];
  const double upper = data.slot_boundaries[target];
  report.t_query = 0.5 * (lower + upper);

  for (int rep = 0; rep < eval_cfg.repetitions; ++rep) {
    ChainConfig cfg = chain_cfg;
    cfg.seed = split_seed(chain_cfg.seed, 7919 + static_cast<std::uint64_t>(rep));
    const auto result = run_chain(split.train, hp, cfg);
    const auto ranked =
        score_candidate_edges(result.samples, split.train, candidates, report.t_query);
    detail::score_ranking(report, "", ranked.pairs(), truth, eval_cfg, rep);
    report.rows.push_back({"new_vertex_mass", 0, rep, ranked.new_vertex_mass});
  }

  if (eval_cfg.baselines) {
    // non-Bayesian reference rankings from the training slots only
    std::map<EdgePair, double> freq, latest;
    for (const auto& e : split.train.edges) {
      freq[{e.sender, e.recipient}] += 1.0;
      auto& t = latest[{e.sender, e.recipient}];
      t = std::max(t, e.time);
    }
    const auto rank_by = [](const std::map<EdgePair, double>& score) {
      std::vector<std::pair<EdgePair, double>> v(score.begin(), score.end());
      std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
      });
      std::vector<EdgePair> out;
      out.reserve(v.size());
      for (const auto& [p, s] : v) out.push_back(p);
      return out;
    };
    detail::score_ranking(report, "baseline_freq_", rank_by(freq), truth, eval_cfg, 0);
    detail::score_ranking(report, "baseline_recency_", rank_by(latest), truth, eval_cfg, 0);
  }

  detail::aggregate_rows(report);
  return report;
}

}  // namespace dynmdnd
