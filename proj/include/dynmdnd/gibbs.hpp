#pragma once

// Collapsed Gibbs sampler over seating links and table configurations.
//
// The chain state is (links, table assignment per edge endpoint); cluster
// labels and all counts are derived and maintained incrementally. A sweep
// resamples every link in random order, then every customer's table, then
// optionally the scalar hyperparameters.
//
// Link move. Removing edge i's outgoing link detaches the subtree rooted
// at i (links always point backward, so the link graph is a forest and the
// detached part is exactly i plus its descendants). The subtree's customers
// are unseated, the posterior over candidate links is assembled as
//    prior f(d_ij) x marginal(subtree joins candidate's cluster),
// grouped by candidate cluster, and the subtree is re-seated into the
// sampled destination. For components up to `exact_component_cutoff` edges
// the marginal sums over all table-opening paths exactly (and re-seating
// samples from the exact conditional via the same dynamic program), which
// makes the move a correct blocked Gibbs update. Larger components fall
// back to a sequential predictive with the global table state frozen, the
// usual collapsed-franchise approximation; the table sweep restores mixing
// over that conditioning.
//
// Table move. Each customer is unseated and re-seated by its exact
// conditional: join an occupied table with its vertex (weight = occupancy)
// or open a new one (weight = tau * table-level mass of the vertex).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "dynmdnd/decay.hpp"
#include "dynmdnd/franchise.hpp"
#include "dynmdnd/numeric.hpp"
#include "dynmdnd/seating.hpp"
#include "dynmdnd/types.hpp"

namespace dynmdnd {

struct ChainConfig {
  int n_sweeps = 1000;
  int burn_in = 500;
  int thin = 1;
  int n_chains = 1;
  bool hyper_resample = false;
  std::uint64_t seed = 1;
  int exact_component_cutoff = 8;
  double candidate_floor = 1e-12;
  bool debug_checks = false;

  int n_retained() const { return (n_sweeps - burn_in) / thin; }

  void validate() const {
    if (n_sweeps < 1) throw std::invalid_argument("ChainConfig: n_sweeps must be >= 1");
    if (burn_in < 0 || burn_in >= n_sweeps)
      throw std::invalid_argument("ChainConfig: burn_in must lie in [0, n_sweeps)");
    if (thin < 1) throw std::invalid_argument("ChainConfig: thin must be >= 1");
    if (n_chains < 1) throw std::invalid_argument("ChainConfig: n_chains must be >= 1");
    if (n_retained() < 1) throw std::invalid_argument("ChainConfig: no samples would be retained");
    if (!(candidate_floor > 0.0) || candidate_floor >= 1.0)
      throw std::invalid_argument("ChainConfig: candidate_floor must lie in (0, 1)");
  }
};

struct PosteriorSample {
  std::vector<int> links;
  std::vector<int> clusters;
  CollapsedCounts counts;
  Hyperparams hp;
  int sweep = 0;
};

struct SweepStats {
  int chain = 0;
  int sweep = 0;
  double joint_log_prob = 0.0;
  int n_clusters = 0;
  double alpha = 0.0, gamma = 0.0, tau = 0.0;
};

namespace detail {

inline constexpr ClusterId kFreshCluster = -1;

struct Draw {
  int edge = 0;
  VertexId v = 0;
  Side side = Side::Sender;
};

inline std::vector<Draw> component_draws(const EdgeSequence& edges, std::span<const int> members) {
  std::vector<Draw> d;
  d.reserve(members.size() * 2);
  for (int e : members) {
    d.push_back({e, edges[e].sender, Side::Sender});
    d.push_back({e, edges[e].recipient, Side::Recipient});
  }
  return d;
}

// Exact marginal probability of a draw sequence entering `target`'s
// restaurants (or a fresh cluster), summing over every table-opening path.
// States are per-vertex counts of tables opened during the walk; customer
// counts evolve deterministically, so they are precomputed per draw.
class ExactJoin {
 public:
  ExactJoin(const CollapsedCounts& counts, ClusterId target, std::span<const Draw> draws,
            const Hyperparams& hp)
      : gamma_(hp.gamma), m_tot0_(counts.global_table_total()), n_draws_(draws.size()) {
    vslot_.resize(n_draws_);
    tau_.resize(n_draws_);
    nv_before_.resize(n_draws_);
    ntot_before_.resize(n_draws_);
    std::map<VertexId, int> slot;
    std::map<std::pair<int, VertexId>, int> seen;
    std::array<int, 2> side_n{0, 0};
    for (std::size_t d = 0; d < n_draws_; ++d) {
      const auto& dr = draws[d];
      auto [it, fresh] = slot.try_emplace(dr.v, static_cast<int>(slot.size()));
      if (fresh) m0_.push_back(counts.global_tables(dr.v));
      vslot_[d] = it->second;
      tau_[d] = hp.tau_for(dr.side);
      const int si = side_index(dr.side);
      nv_before_[d] = counts.count(target, dr.side, dr.v) + seen[{si, dr.v}];
      ntot_before_[d] = counts.restaurant_total(target, dr.side) + side_n[si];
      seen[{si, dr.v}] += 1;
      side_n[si] += 1;
    }

    // forward reachability, then backward valuation
    levels_.assign(n_draws_ + 1, {});
    State zero(m0_.size(), 0);
    levels_[0][zero] = 0.0;
    for (std::size_t d = 0; d < n_draws_; ++d) {
      for (const auto& [st, _] : levels_[d]) {
        if (nv_before_[d] > 0) levels_[d + 1].try_emplace(st, 0.0);
        State open = st;
        open[vslot_[d]] += 1;
        levels_[d + 1].try_emplace(std::move(open), 0.0);
      }
    }
    for (auto& [st, val] : levels_[n_draws_]) val = 1.0;
    for (std::size_t d = n_draws_; d-- > 0;) {
      for (auto& [st, val] : levels_[d]) {
        auto [jw, ow] = step_weights(d, st);
        double v = 0.0;
        if (jw > 0.0) v += jw * levels_[d + 1].at(st);
        State open = st;
        open[vslot_[d]] += 1;
        v += ow * levels_[d + 1].at(open);
        val = v;
      }
    }
    log_marginal_ = std::log(levels_[0].at(zero));
  }

  double log_marginal() const { return log_marginal_; }

  int vertex_slot(std::size_t d) const { return vslot_[d]; }

  // Join/open branch masses at step d, each already multiplied by the value
  // of the corresponding continuation; sampling proportional to these gives
  // the exact conditional path.
  std::pair<double, double> branch_values(std::size_t d, const std::vector<std::uint8_t>& st) const {
    auto [jw, ow] = step_weights(d, st);
    double jv = 0.0;
    if (jw > 0.0) jv = jw * levels_[d + 1].at(st);
    State open = st;
    open[vslot_[d]] += 1;
    return {jv, ow * levels_[d + 1].at(open)};
  }

 private:
  using State = std::vector<std::uint8_t>;

  std::pair<double, double> step_weights(std::size_t d, const State& st) const {
    const double tau = tau_[d];
    const double denom = ntot_before_[d] + tau;
    int opened = 0;
    for (std::uint8_t x : st) opened += x;
    const int mv = m0_[vslot_[d]] + st[vslot_[d]];
    const double base = mv > 0 ? static_cast<double>(mv) : gamma_;
    const double ow = tau * base / (m_tot0_ + opened + gamma_) / denom;
    const double jw = nv_before_[d] > 0 ? nv_before_[d] / denom : 0.0;
    return {jw, ow};
  }

  double gamma_;
  int m_tot0_;
  std::size_t n_draws_;
  std::vector<int> vslot_, m0_, nv_before_, ntot_before_;
  std::vector<double> tau_;
  std::vector<std::map<State, double>> levels_;
  double log_marginal_ = 0.0;
};

// Sequential predictive with the global table state frozen at its current
// value. Vertices with no tables left in the conditioning state enter
// through the fresh-vertex mass once, and through the count of walk-opened
// restaurants afterwards.
class FrozenWalk {
 public:
  FrozenWalk(const CollapsedCounts& counts, ClusterId target, std::span<const Draw> draws,
             const Hyperparams& hp)
      : counts_(counts), target_(target), hp_(hp),
        mtot_gamma_(counts.global_table_total() + hp.gamma) {
    for (const auto& d : draws) m0_.try_emplace(d.v, counts.global_tables(d.v));
  }

  // Base mass of v under the frozen global state.
  double base_mass(VertexId v) const {
    const int m0 = m0_.at(v);
    if (m0 > 0) return static_cast<double>(m0);
    auto it = walk_m_.find(v);
    const int wm = it == walk_m_.end() ? 0 : it->second;
    return wm > 0 ? static_cast<double>(wm) : hp_.gamma;
  }

  // Records an arrival; must be called once per draw after its weight was
  // taken. Tracks the deterministic per-restaurant first appearances that
  // stand in for table counts of vertices absent from the frozen state.
  void note_arrival(const Draw& d) {
    if (m0_.at(d.v) == 0 && appeared_.insert({side_index(d.side), d.v}).second)
      walk_m_[d.v] += 1;
  }

  double mtot_gamma() const { return mtot_gamma_; }

  // Log marginal of the whole sequence (does not touch physical state).
  double evaluate(std::span<const Draw> draws) {
    std::map<std::pair<int, VertexId>, int> extra;
    std::array<int, 2> extra_tot{0, 0};
    double lp = 0.0;
    for (const auto& d : draws) {
      const int si = side_index(d.side);
      const double tau = hp_.tau_for(d.side);
      const double nv = counts_.count(target_, d.side, d.v) + extra[{si, d.v}];
      const double nt = counts_.restaurant_total(target_, d.side) + extra_tot[si];
      lp += std::log(nv + tau * base_mass(d.v) / mtot_gamma_) - std::log(nt + tau);
      note_arrival(d);
      extra[{si, d.v}] += 1;
      extra_tot[si] += 1;
    }
    return lp;
  }

 private:
  const CollapsedCounts& counts_;
  ClusterId target_;
  const Hyperparams& hp_;
  double mtot_gamma_;
  std::map<VertexId, int> m0_;
  std::map<VertexId, int> walk_m_;
  std::set<std::pair<int, VertexId>> appeared_;
};

// Closed-form exact marginal for a single-edge component (two draws, at
// most one table opening each): the four join/open paths are summed
// directly, which avoids the dynamic program on the hottest move.
inline double exact_pair_log_marginal(const CollapsedCounts& counts, ClusterId target,
                                      const Draw& d0, const Draw& d1, const Hyperparams& hp) {
  const double gamma = hp.gamma;
  const int m_tot = counts.global_table_total();
  const double tau0 = hp.tau_for(d0.side);
  const double tau1 = hp.tau_for(d1.side);

  const double nv0 = counts.count(target, d0.side, d0.v);
  const double denom0 = counts.restaurant_total(target, d0.side) + tau0;
  const int mv0 = counts.global_tables(d0.v);
  const double j0 = nv0 > 0 ? nv0 / denom0 : 0.0;
  const double o0 = tau0 * (mv0 > 0 ? mv0 : gamma) / (m_tot + gamma) / denom0;

  const bool same_side = d0.side == d1.side;
  const bool same_v = d0.v == d1.v;
  const double nv1 = counts.count(target, d1.side, d1.v) + (same_side && same_v ? 1 : 0);
  const double denom1 = counts.restaurant_total(target, d1.side) + (same_side ? 1 : 0) + tau1;
  const int mv1 = counts.global_tables(d1.v);
  const double j1 = nv1 > 0 ? nv1 / denom1 : 0.0;
  const double o1_after_join = tau1 * (mv1 > 0 ? mv1 : gamma) / (m_tot + gamma) / denom1;
  const int mv1_after_open = mv1 + (same_v ? 1 : 0);
  const double o1_after_open =
      tau1 * (mv1_after_open > 0 ? mv1_after_open : gamma) / (m_tot + 1 + gamma) / denom1;

  return std::log(j0 * (j1 + o1_after_join) + o0 * (j1 + o1_after_open));
}

// Univariate slice sampler on the log scale for positive parameters.
inline double slice_sample_positive(double x0, const std::function<double(double)>& log_post,
                                    Rng& rng, double width = 1.0, int max_steps = 50) {
  const auto g = [&](double y) { return log_post(std::exp(y)) + y; };
  double y0 = std::log(x0);
  const double gy0 = g(y0);
  const double level = gy0 - rng.exponential(1.0);
  double lo = y0 - width * rng.u01();
  double hi = lo + width;
  for (int s = 0; s < max_steps && g(lo) > level; ++s) lo -= width;
  for (int s = 0; s < max_steps && g(hi) > level; ++s) hi += width;
  for (;;) {
    const double y = lo + rng.u01() * (hi - lo);
    if (g(y) > level) return std::exp(y);
    if (y < y0)
      lo = y;
    else
      hi = y;
  }
}

}  // namespace detail

// Marginal log-likelihood of a cluster's sender and recipient sequences in
// edge order, given the table-level state of everything outside the
// cluster. Exact table marginalization for small clusters, frozen-state
// predictive beyond the cutoff.
inline double cluster_marginal_loglik(const std::vector<TimedEdge>& members,
                                      const CollapsedCounts& conditioning, const Hyperparams& hp,
                                      int exact_cutoff = 8) {
  if (members.empty()) return 0.0;
  EdgeSequence seq;
  seq.edges = members;
  std::vector<int> idx(members.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  auto draws = detail::component_draws(seq, idx);
  if (static_cast<int>(members.size()) <= exact_cutoff)
    return detail::ExactJoin(conditioning, detail::kFreshCluster, draws, hp).log_marginal();
  return detail::FrozenWalk(conditioning, detail::kFreshCluster, draws, hp).evaluate(draws);
}

struct GibbsOptions {
  int exact_component_cutoff = 8;
  double candidate_floor = 1e-12;
  bool debug_checks = false;
  bool hyper_resample = false;
};

class GibbsChain {
 public:
  using Options = GibbsOptions;

  GibbsChain(const EdgeSequence& edges, const Hyperparams& hp, std::uint64_t seed,
             Options opt = Options())
      : edges_(edges), hp_(hp), opt_(opt), rng_(seed), n_(static_cast<int>(edges.size())) {
    hp_.validate();
    edges.validate();
    if (n_ == 0) throw std::invalid_argument("GibbsChain: empty edge sequence");
    times_.reserve(n_);
    for (const auto& e : edges.edges) times_.push_back(e.time);

    links_.resize(n_);
    z_.resize(n_);
    children_.resize(n_);
    table_of_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      links_[i] = i;
      z_[i] = i;
      for (Side s : {Side::Sender, Side::Recipient}) {
        const TableId t = counts_.fresh_table_id();
        counts_.seat(i, s, edges_[i].vertex(s), t);
        table_of_[i][side_index(s)] = t;
      }
    }

    group_mass_.assign(n_, 0.0);

    // decayed prior mass ahead of each customer; constant across the run
    prior_sums_.assign(n_, 0.0);
    const double bound = decay_support_bound(hp_.decay, opt_.candidate_floor);
    for (int i = 1; i < n_; ++i) {
      double s = 0.0;
      for (int j = i - 1; j >= 0 && times_[i] - times_[j] <= bound; --j)
        s += decay_eval(hp_.decay, times_[i] - times_[j]);
      prior_sums_[i] = s;
    }
  }

  // --- moves -------------------------------------------------------------

  void resample_link(int i) {
    if (links_[i] != i) remove_child(links_[i], i);
    links_[i] = i;
    std::vector<int> comp = collect_component(i);
    const ClusterId old_slot = z_[i];
    for (int e : comp)
      for (Side s : {Side::Sender, Side::Recipient})
        counts_.unseat(old_slot, s, edges_[e].vertex(s), table_of_[e][side_index(s)]);
    for (int e : comp) z_[e] = i;

    const auto draws = detail::component_draws(edges_, comp);
    const bool exact = static_cast<int>(comp.size()) <= opt_.exact_component_cutoff;

    // prior mass per candidate cluster, accumulated into dense buffers
    // (cluster slots are edge indices, so the buffers are chain-sized)
    const double bound = decay_support_bound(hp_.decay, opt_.candidate_floor);
    int lo = i;
    for (int j = i - 1; j >= 0; --j) {
      const double d = times_[i] - times_[j];
      if (d > bound) break;
      lo = j;
      const double f = decay_eval(hp_.decay, d);
      if (f <= 0.0) continue;
      const ClusterId k = z_[j];
      if (group_mass_[k] == 0.0) touched_.push_back(k);
      group_mass_[k] += f;
    }
    std::sort(touched_.begin(), touched_.end());

    group_lw_.clear();
    for (ClusterId k : touched_)
      group_lw_.push_back(std::log(group_mass_[k]) + join_log_marginal(draws, k, exact));
    group_lw_.push_back(std::log(hp_.alpha) +
                        join_log_marginal(draws, detail::kFreshCluster, exact));

    const std::size_t gi = rng_.categorical_log(group_lw_);
    int j = i;
    ClusterId eval_target = detail::kFreshCluster;
    ClusterId slot_target = i;
    if (gi < touched_.size()) {
      // draw the specific neighbor within the chosen cluster
      const ClusterId chosen = touched_[gi];
      cand_idx_.clear();
      cand_w_.clear();
      for (int jj = i - 1; jj >= lo; --jj) {
        if (z_[jj] != chosen) continue;
        const double f = decay_eval(hp_.decay, times_[i] - times_[jj]);
        if (f <= 0.0) continue;
        cand_idx_.push_back(jj);
        cand_w_.push_back(f);
      }
      j = cand_idx_[rng_.categorical(cand_w_)];
      eval_target = chosen;
      slot_target = chosen;
    }
    for (ClusterId k : touched_) group_mass_[k] = 0.0;
    touched_.clear();

    links_[i] = j;
    if (j != i) children_[j].push_back(i);
    if (exact)
      reseat_exact(draws, eval_target, slot_target);
    else
      reseat_frozen(draws, eval_target, slot_target);
    for (int e : comp) z_[e] = slot_target;
  }

  void resample_tables() {
    for (int e = 0; e < n_; ++e)
      for (Side s : {Side::Sender, Side::Recipient}) resample_customer_table(e, s);
  }

  // Exact single-customer table move: unseat, then join an occupied table
  // (weight occupancy) or open a new one (weight tau * table mass of v).
  void resample_customer_table(int e, Side s) {
    const ClusterId k = z_[e];
    const VertexId v = edges_[e].vertex(s);
    counts_.unseat(k, s, v, table_of_[e][side_index(s)]);
    const double tau = hp_.tau_for(s);
    const int mv = counts_.global_tables(v);
    const double open_w =
        tau * (mv > 0 ? static_cast<double>(mv) : hp_.gamma) /
        (counts_.global_table_total() + hp_.gamma);

    const auto& cells = counts_.restaurant(k, s).cells;
    auto cit = cells.find(v);
    double total = open_w;
    if (cit != cells.end()) total += cit->second.count;
    double u = rng_.u01() * total;
    TableId chosen = 0;
    bool found = false;
    if (cit != cells.end()) {
      double acc = 0.0;
      for (const auto& [t, occ] : cit->second.tables) {
        acc += occ;
        if (u < acc) {
          chosen = t;
          found = true;
          break;
        }
      }
    }
    if (!found) chosen = counts_.fresh_table_id();
    counts_.seat(k, s, v, chosen);
    table_of_[e][side_index(s)] = chosen;
  }

  // Slice-sampling moves for the scalar concentrations under Gamma(1,1)
  // priors; the decay scale is model selection, not inference.
  void resample_hyperparams() {
    // alpha | links
    int n_self = 0;
    for (int i = 0; i < n_; ++i) n_self += links_[i] == i;
    const auto alpha_post = [&](double a) {
      double lp = -a + n_self * std::log(a);
      for (int i = 0; i < n_; ++i) lp -= std::log(a + prior_sums_[i]);
      return lp;
    };
    hp_.alpha = detail::slice_sample_positive(hp_.alpha, alpha_post, rng_);

    // tau | table configuration (per side when split, shared otherwise)
    std::array<std::vector<std::pair<int, int>>, 2> rests;  // (n_tables, n_customers)
    for (const auto& [k, sides] : counts_.clusters()) {
      for (int s = 0; s < 2; ++s) {
        int nt = 0;
        for (const auto& [v, cell] : sides[s].cells) nt += static_cast<int>(cell.tables.size());
        rests[s].emplace_back(nt, sides[s].total);
      }
    }
    const auto tau_post = [&](std::span<const std::pair<int, int>> rs) {
      return [rs](double t) {
        double lp = -t;
        for (const auto& [m, n] : rs)
          lp += m * std::log(t) + std::lgamma(t) - std::lgamma(t + n);
        return lp;
      };
    };
    if (hp_.tau_recipient) {
      hp_.tau = detail::slice_sample_positive(hp_.tau, tau_post(rests[0]), rng_);
      hp_.tau_recipient =
          detail::slice_sample_positive(*hp_.tau_recipient, tau_post(rests[1]), rng_);
    } else {
      std::vector<std::pair<int, int>> all = rests[0];
      all.insert(all.end(), rests[1].begin(), rests[1].end());
      hp_.tau = detail::slice_sample_positive(hp_.tau, tau_post(all), rng_);
    }

    // gamma | global table counts
    const int n_dishes = static_cast<int>(counts_.global_table_map().size());
    const int m_tot = counts_.global_table_total();
    const auto gamma_post = [&](double g) {
      return -g + n_dishes * std::log(g) + std::lgamma(g) - std::lgamma(g + m_tot);
    };
    hp_.gamma = detail::slice_sample_positive(hp_.gamma, gamma_post, rng_);
  }

  void sweep() {
    ++sweep_index_;
    std::vector<int> order(n_);
    for (int i = 0; i < n_; ++i) order[i] = i;
    for (int i = n_ - 1; i > 0; --i)
      std::swap(order[i], order[rng_.uniform_index(i + 1)]);
    for (int i : order) resample_link(i);
    resample_tables();
    if (opt_.hyper_resample) resample_hyperparams();
    if (opt_.debug_checks) check_consistency();
  }

  // --- state -------------------------------------------------------------

  const std::vector<int>& links() const { return links_; }
  const std::vector<int>& clusters() const { return z_; }
  const CollapsedCounts& counts() const { return counts_; }
  const Hyperparams& hyperparams() const { return hp_; }
  int n_clusters() const { return counts_.n_clusters(); }
  int sweep_index() const { return sweep_index_; }
  Rng& rng() { return rng_; }

  double joint_log_prob() const {
    double lp = 0.0;
    for (int i = 0; i < n_; ++i) {
      lp += links_[i] == i ? std::log(hp_.alpha)
                           : log_decay_eval(hp_.decay, times_[i] - times_[links_[i]]);
      lp -= std::log(hp_.alpha + prior_sums_[i]);
    }
    return lp + counts_.assignment_log_prob(hp_);
  }

  PosteriorSample make_sample() const { return {links_, z_, counts_, hp_, sweep_index_}; }

  // Adopts a given seating (warm start). Every customer lands at its own
  // table; a table sweep restores a mixed configuration.
  void set_links(const std::vector<int>& links) {
    if (links.size() != static_cast<std::size_t>(n_))
      throw std::invalid_argument("set_links: size mismatch");
    z_ = links_to_clusters(links);
    links_ = links;
    children_.assign(n_, {});
    for (int i = 0; i < n_; ++i)
      if (links_[i] != i) children_[links_[i]].push_back(i);
    counts_ = CollapsedCounts();
    for (int e = 0; e < n_; ++e) {
      for (Side s : {Side::Sender, Side::Recipient}) {
        const TableId t = counts_.fresh_table_id();
        counts_.seat(z_[e], s, edges_[e].vertex(s), t);
        table_of_[e][side_index(s)] = t;
      }
    }
  }

  // Rebuilds every derived structure from scratch and compares.
  void check_consistency() const {
    if (links_to_clusters(links_) != z_)
      throw std::logic_error("GibbsChain: cluster labels out of sync with links");
    CollapsedCounts rebuilt;
    for (int e = 0; e < n_; ++e)
      for (Side s : {Side::Sender, Side::Recipient})
        rebuilt.seat(z_[e], s, edges_[e].vertex(s), table_of_[e][side_index(s)]);
    if (!(rebuilt == counts_))
      throw std::logic_error("GibbsChain: incremental counts diverge from rebuild");
    counts_.check_invariants();
    for (int i = 0; i < n_; ++i) {
      if (links_[i] != i) {
        const auto& ch = children_[links_[i]];
        if (std::find(ch.begin(), ch.end(), i) == ch.end())
          throw std::logic_error("GibbsChain: child lists out of sync");
      }
    }
  }

 private:
  void remove_child(int parent, int child) {
    auto& ch = children_[parent];
    ch.erase(std::find(ch.begin(), ch.end(), child));
  }

  std::vector<int> collect_component(int i) const {
    std::vector<int> out, stack{i};
    while (!stack.empty()) {
      const int e = stack.back();
      stack.pop_back();
      out.push_back(e);
      for (int c : children_[e]) stack.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  double join_log_marginal(std::span<const detail::Draw> draws, ClusterId target, bool exact) {
    if (!exact) {
      detail::FrozenWalk w(counts_, target, draws, hp_);
      return w.evaluate(draws);
    }
    if (draws.size() == 2)
      return detail::exact_pair_log_marginal(counts_, target, draws[0], draws[1], hp_);
    return detail::ExactJoin(counts_, target, draws, hp_).log_marginal();
  }

  void seat_draw(const detail::Draw& d, ClusterId slot, bool open) {
    TableId t;
    if (open) {
      t = counts_.fresh_table_id();
    } else {
      const auto& cell = counts_.restaurant(slot, d.side).cells.at(d.v);
      double u = rng_.u01() * cell.count;
      double acc = 0.0;
      t = cell.tables.begin()->first;
      for (const auto& [tid, occ] : cell.tables) {
        acc += occ;
        if (u < acc) {
          t = tid;
          break;
        }
      }
    }
    counts_.seat(slot, d.side, d.v, t);
    table_of_[d.edge][side_index(d.side)] = t;
  }

  void reseat_exact(std::span<const detail::Draw> draws, ClusterId eval_target,
                    ClusterId slot_target) {
    detail::ExactJoin eval(counts_, eval_target, draws, hp_);
    int n_slots = 0;
    for (std::size_t d = 0; d < draws.size(); ++d)
      n_slots = std::max(n_slots, eval.vertex_slot(d) + 1);
    std::vector<std::uint8_t> st(n_slots, 0);
    for (std::size_t d = 0; d < draws.size(); ++d) {
      auto [jv, ov] = eval.branch_values(d, st);
      const bool open = rng_.u01() * (jv + ov) >= jv;
      seat_draw(draws[d], slot_target, open);
      if (open) st[eval.vertex_slot(d)] += 1;
    }
  }

  void reseat_frozen(std::span<const detail::Draw> draws, ClusterId eval_target,
                     ClusterId slot_target) {
    detail::FrozenWalk walk(counts_, eval_target, draws, hp_);
    for (const auto& d : draws) {
      const double tau = hp_.tau_for(d.side);
      const double open_w = tau * walk.base_mass(d.v) / walk.mtot_gamma();
      const auto& cells = counts_.restaurant(slot_target, d.side).cells;
      auto cit = cells.find(d.v);
      const double join_w = cit == cells.end() ? 0.0 : cit->second.count;
      const bool open = rng_.u01() * (join_w + open_w) >= join_w;
      walk.note_arrival(d);
      seat_draw(d, slot_target, open);
    }
  }

  const EdgeSequence& edges_;
  Hyperparams hp_;
  Options opt_;
  Rng rng_;
  int n_;
  std::vector<double> times_;
  std::vector<int> links_, z_;
  std::vector<std::vector<int>> children_;
  CollapsedCounts counts_;
  std::vector<std::array<TableId, 2>> table_of_;
  std::vector<double> prior_sums_;
  int sweep_index_ = 0;

  // scratch buffers for the link move
  std::vector<double> group_mass_;
  std::vector<ClusterId> touched_;
  std::vector<double> group_lw_;
  std::vector<int> cand_idx_;
  std::vector<double> cand_w_;
};

struct ChainResult {
  std::vector<PosteriorSample> samples;
  std::vector<SweepStats> trace;
};

// Runs n_chains independent chains (in parallel when more than one) and
// returns the retained samples and per-sweep diagnostics, ordered by chain.
inline ChainResult run_chain(const EdgeSequence& edges, const Hyperparams& hp,
                             const ChainConfig& cfg) {
  cfg.validate();
  std::vector<ChainResult> per_chain(cfg.n_chains);

  const auto run_one = [&](int c) {
    GibbsChain::Options opt;
    opt.exact_component_cutoff = cfg.exact_component_cutoff;
    opt.candidate_floor = cfg.candidate_floor;
    opt.debug_checks = cfg.debug_checks;
    opt.hyper_resample = cfg.hyper_resample;
    GibbsChain chain(edges, hp, split_seed(cfg.seed, static_cast<std::uint64_t>(c)), opt);
    auto& res = per_chain[c];
    for (int s = 1; s <= cfg.n_sweeps; ++s) {
      chain.sweep();
      res.trace.push_back({c, s, chain.joint_log_prob(), chain.n_clusters(),
                           chain.hyperparams().alpha, chain.hyperparams().gamma,
                           chain.hyperparams().tau});
      if (s > cfg.burn_in && (s - cfg.burn_in) % cfg.thin == 0)
        res.samples.push_back(chain.make_sample());
    }
  };

  if (cfg.n_chains == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(cfg.n_chains);
    for (int c = 0; c < cfg.n_chains; ++c) workers.emplace_back(run_one, c);
    for (auto& w : workers) w.join();
  }

  ChainResult out;
  for (auto& r : per_chain) {
    out.samples.insert(out.samples.end(), std::make_move_iterator(r.samples.begin()),
                       std::make_move_iterator(r.samples.end()));
    out.trace.insert(out.trace.end(), r.trace.begin(), r.trace.end());
  }
  return out;
}

}  // namespace dynmdnd
