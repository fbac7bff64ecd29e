#pragma once

// Exact forward simulation of the generative process.
//
// Edges are generated sequentially: an arrival time from the configured
// time process, a seating link from the decayed seating prior, then a
// sender and a recipient drawn through the collapsed franchise (join an
// occupied table, or open a new one whose vertex comes from the global
// level). Every random choice is recorded, so the accumulated latent
// log-probability can be replayed bit-for-bit from the returned state.

#include <array>
#include <cstdint>
#include <vector>

#include "dynmdnd/franchise.hpp"
#include "dynmdnd/numeric.hpp"
#include "dynmdnd/seating.hpp"
#include "dynmdnd/types.hpp"

namespace dynmdnd {

enum class TimeProcess { UnitSpaced, PoissonRate };

struct SimConfig {
  int n_edges = 1;
  Hyperparams hp;
  TimeProcess time_process = TimeProcess::UnitSpaced;
  double rate = 1.0;  // arrival rate for PoissonRate
  std::uint64_t seed = 0;

  void validate() const {
    if (n_edges < 1) throw std::invalid_argument("SimConfig: n_edges must be >= 1");
    if (time_process == TimeProcess::PoissonRate && !(rate > 0.0))
      throw std::invalid_argument("SimConfig: rate must be > 0");
    hp.validate();
  }
};

struct SimResult {
  EdgeSequence edges;
  SeatingState seating;
  CollapsedCounts counts;
  std::vector<std::array<TableId, 2>> tables;  // per edge: sender table, recipient table
  double log_prob = 0.0;                       // seating choices + dish/table choices
  int n_vertices = 0;
};

namespace detail {

// Log probability of opening a new table with dish `v` under the current
// collapsed state. Shared between simulation and replay so both accumulate
// identical arithmetic.
inline double log_open_factor(const CollapsedCounts& counts, ClusterId k, Side s, VertexId v,
                              const Hyperparams& hp) {
  const double tau = hp.tau_for(s);
  const int mv = counts.global_tables(v);
  const double base = (mv > 0 ? static_cast<double>(mv) : hp.gamma);
  return std::log(tau) + std::log(base) -
         std::log(counts.global_table_total() + hp.gamma) -
         std::log(counts.restaurant_total(k, s) + tau);
}

inline double log_join_factor(const CollapsedCounts& counts, ClusterId k, Side s, int occupancy,
                              const Hyperparams& hp) {
  const double tau = hp.tau_for(s);
  return std::log(static_cast<double>(occupancy)) -
         std::log(counts.restaurant_total(k, s) + tau);
}

}  // namespace detail

// One collapsed draw from a cluster restaurant: returns the vertex, the
// table it sat at, and the log probability of that outcome. `next_vertex`
// supplies fresh labels for draws that land on the continuous base.
inline std::tuple<VertexId, TableId, double> draw_vertex(CollapsedCounts& counts, ClusterId k,
                                                         Side s, const Hyperparams& hp, Rng& rng,
                                                         VertexId& next_vertex) {
  const double tau = hp.tau_for(s);
  const auto& rest = counts.restaurant(k, s);
  const double u = rng.u01() * (rest.total + tau);
  if (u < rest.total) {
    // join an occupied table; walk tables in deterministic (vertex, id) order
    double acc = 0.0;
    for (const auto& [v, cell] : rest.cells) {
      for (const auto& [t, occ] : cell.tables) {
        acc += occ;
        if (u < acc) {
          const double lp = detail::log_join_factor(counts, k, s, occ, hp);
          counts.seat(k, s, v, t);
          return {v, t, lp};
        }
      }
    }
  }
  // open a new table; its dish comes from the global level
  VertexId v = kNewVertex;
  const double u2 = rng.u01() * (counts.global_table_total() + hp.gamma);
  double acc = 0.0;
  for (const auto& [w, m] : counts.global_table_map()) {
    acc += m;
    if (u2 < acc) {
      v = w;
      break;
    }
  }
  if (v == kNewVertex) v = next_vertex++;
  const double lp = detail::log_open_factor(counts, k, s, v, hp);
  const TableId t = counts.fresh_table_id();
  counts.seat(k, s, v, t);
  return {v, t, lp};
}

inline SimResult simulate(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Hyperparams& hp = cfg.hp;

  SimResult out;
  out.edges.edges.reserve(cfg.n_edges);
  out.tables.reserve(cfg.n_edges);
  std::vector<double> times;
  times.reserve(cfg.n_edges);
  std::vector<int>& links = out.seating.links;
  std::vector<int>& z = out.seating.clusters;
  VertexId next_vertex = 0;
  double t = 0.0;

  for (int i = 0; i < cfg.n_edges; ++i) {
    if (cfg.time_process == TimeProcess::UnitSpaced)
      t = static_cast<double>(i);
    else
      t += rng.exponential(cfg.rate);
    times.push_back(t);

    auto w = seating_log_weights(static_cast<std::size_t>(i), times, hp);
    const std::size_t c = rng.categorical_log(w);
    out.log_prob += w[c] - log_sum_exp(w);
    links.push_back(static_cast<int>(c));
    z.push_back(c == static_cast<std::size_t>(i) ? i : z[c]);

    const ClusterId k = z[i];
    auto [s, ts, lps] = draw_vertex(out.counts, k, Side::Sender, hp, rng, next_vertex);
    auto [r, tr, lpr] = draw_vertex(out.counts, k, Side::Recipient, hp, rng, next_vertex);
    out.log_prob += lps + lpr;
    out.edges.edges.push_back({s, r, t});
    out.tables.push_back({ts, tr});
  }
  out.n_vertices = static_cast<int>(next_vertex);
  return out;
}

// Sequential re-evaluation of the latent log-probability of a generated (or
// otherwise fully annotated) sequence: seating choices plus dish/table
// choices. Replaying a simulation's own output reproduces its accumulated
// log_prob exactly, since the same factors are computed in the same order.
inline double replay_log_prob(const EdgeSequence& edges, std::span<const int> links,
                              std::span<const std::array<TableId, 2>> tables,
                              const Hyperparams& hp) {
  if (links.size() != edges.size() || tables.size() != edges.size())
    throw std::invalid_argument("replay_log_prob: size mismatch");
  CollapsedCounts counts;
  std::vector<double> times;
  times.reserve(edges.size());
  std::vector<int> z(edges.size());
  double lp = 0.0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    times.push_back(edges[i].time);
    auto w = seating_log_weights(i, times, hp);
    lp += w[links[i]] - log_sum_exp(w);
    z[i] = (links[i] == static_cast<int>(i)) ? static_cast<int>(i) : z[links[i]];
    const ClusterId k = z[i];
    for (Side s : {Side::Sender, Side::Recipient}) {
      const VertexId v = edges[i].vertex(s);
      const TableId tid = tables[i][side_index(s)];
      const auto& cell = counts.restaurant(k, s).cells;
      auto cit = cell.find(v);
      int occ = 0;
      if (cit != cell.end()) {
        auto tit = cit->second.tables.find(tid);
        if (tit != cit->second.tables.end()) occ = tit->second;
      }
      lp += occ > 0 ? detail::log_join_factor(counts, k, s, occ, hp)
                    : detail::log_open_factor(counts, k, s, v, hp);
      counts.seat(k, s, v, tid);
    }
  }
  return lp;
}

}  // namespace dynmdnd
