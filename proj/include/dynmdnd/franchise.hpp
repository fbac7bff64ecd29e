#pragma once

// Collapsed franchise state: the sufficient statistics that replace the
// global popularity measure and the per-cluster sender/recipient
// distributions once all Dirichlet processes are integrated out.
//
// Each (cluster, side) pair is a restaurant; each restaurant groups its
// customers (edge endpoints) into tables, and every table serves one
// vertex. The global level tracks, per vertex, how many tables across all
// restaurants serve it. Predictive probabilities need only these counts:
//
//   P(v | cluster k, side) = (n_kv + tau * pH(v)) / (n_k. + tau)
//   pH(v)   = m_v / (m_. + gamma)          for a seen vertex
//   pH(new) = gamma / (m_. + gamma)        for a fresh vertex
//
// where n counts customers in the restaurant and m counts tables globally.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynmdnd/types.hpp"

namespace dynmdnd {

using ClusterId = std::int32_t;
using TableId = std::uint64_t;

class CollapsedCounts {
 public:
  struct Cell {
    int count = 0;                    // n_kv: customers with this vertex
    std::map<TableId, int> tables;    // occupancy per table; size() = m_kv
  };
  struct Restaurant {
    std::map<VertexId, Cell> cells;
    int total = 0;                    // n_k.
  };

  // --- queries ---------------------------------------------------------

  int count(ClusterId k, Side s, VertexId v) const {
    const Cell* c = find_cell(k, s, v);
    return c ? c->count : 0;
  }

  int restaurant_total(ClusterId k, Side s) const {
    const Restaurant* r = find_restaurant(k, s);
    return r ? r->total : 0;
  }

  int table_count(ClusterId k, Side s, VertexId v) const {
    const Cell* c = find_cell(k, s, v);
    return c ? static_cast<int>(c->tables.size()) : 0;
  }

  int global_tables(VertexId v) const {
    auto it = global_tables_.find(v);
    return it == global_tables_.end() ? 0 : it->second;
  }

  int global_table_total() const { return global_table_total_; }

  const std::map<VertexId, int>& global_table_map() const { return global_tables_; }

  bool has_cluster(ClusterId k) const { return clusters_.count(k) != 0; }

  std::vector<ClusterId> cluster_ids() const {
    std::vector<ClusterId> ids;
    ids.reserve(clusters_.size());
    for (const auto& [k, _] : clusters_) ids.push_back(k);
    return ids;
  }

  int n_clusters() const { return static_cast<int>(clusters_.size()); }

  // Edges in cluster k; sender and recipient restaurants always agree.
  int cluster_edge_count(ClusterId k) const { return restaurant_total(k, Side::Sender); }

  const Restaurant& restaurant(ClusterId k, Side s) const {
    static const Restaurant empty;
    const Restaurant* r = find_restaurant(k, s);
    return r ? *r : empty;
  }

  // --- predictive probabilities ---------------------------------------

  // pH under the global table state; pass kNewVertex for the fresh-vertex mass.
  double base_prob(VertexId v, const Hyperparams& hp) const {
    const double denom = global_table_total_ + hp.gamma;
    if (v == kNewVertex) return hp.gamma / denom;
    return global_tables(v) / denom;
  }

  // One-draw predictive for a vertex in a cluster restaurant. Unknown
  // cluster ids denote empty restaurants, not errors.
  double vertex_predictive(VertexId v, ClusterId k, Side s, const Hyperparams& hp) const {
    const double tau = hp.tau_for(s);
    const double nv = (v == kNewVertex) ? 0.0 : count(k, s, v);
    return (nv + tau * base_prob(v, hp)) / (restaurant_total(k, s) + tau);
  }

  // Joint predictive of an edge's endpoints given a cluster; the two draws
  // are independent given the cluster. std::nullopt means a brand-new
  // cluster (both restaurants empty).
  double edge_predictive(VertexId s, VertexId r, std::optional<ClusterId> k,
                         const Hyperparams& hp) const {
    const ClusterId kk = k ? *k : empty_cluster_id();
    return vertex_predictive(s, kk, Side::Sender, hp) *
           vertex_predictive(r, kk, Side::Recipient, hp);
  }

  // --- mutation --------------------------------------------------------

  TableId fresh_table_id() { return next_table_id_++; }

  // Seats one customer at the given table, creating it if absent; a created
  // table registers globally.
  void seat(ClusterId k, Side s, VertexId v, TableId t) {
    Cell& cell = clusters_[k][side_index(s)].cells[v];
    auto [it, created] = cell.tables.try_emplace(t, 0);
    it->second += 1;
    cell.count += 1;
    clusters_[k][side_index(s)].total += 1;
    if (created) {
      global_tables_[v] += 1;
      global_table_total_ += 1;
    }
  }

  // Removes a customer; empty tables, cells and clusters are dropped.
  void unseat(ClusterId k, Side s, VertexId v, TableId t) {
    auto kit = clusters_.find(k);
    if (kit == clusters_.end()) throw std::logic_error("unseat: unknown cluster");
    Restaurant& rest = kit->second[side_index(s)];
    auto cit = rest.cells.find(v);
    if (cit == rest.cells.end()) throw std::logic_error("unseat: unknown vertex cell");
    Cell& cell = cit->second;
    auto tit = cell.tables.find(t);
    if (tit == cell.tables.end() || tit->second <= 0)
      throw std::logic_error("unseat: unknown table");
    tit->second -= 1;
    cell.count -= 1;
    rest.total -= 1;
    if (tit->second == 0) {
      cell.tables.erase(tit);
      auto git = global_tables_.find(v);
      git->second -= 1;
      if (git->second == 0) global_tables_.erase(git);
      global_table_total_ -= 1;
    }
    if (cell.count == 0) rest.cells.erase(cit);
    if (kit->second[0].total == 0 && kit->second[1].total == 0) clusters_.erase(kit);
  }

  // --- audits ----------------------------------------------------------

  void check_invariants() const {
    std::map<VertexId, int> global;
    int total = 0;
    for (const auto& [k, sides] : clusters_) {
      if (sides[0].total != sides[1].total)
        fail("cluster " + std::to_string(k) + ": sender/recipient totals differ");
      if (sides[0].total == 0) fail("empty cluster retained");
      for (int s = 0; s < 2; ++s) {
        int rest_total = 0;
        for (const auto& [v, cell] : sides[s].cells) {
          if (cell.count <= 0) fail("empty cell retained");
          if (cell.tables.empty()) fail("cell with customers but no tables");
          if (static_cast<int>(cell.tables.size()) > cell.count)
            fail("more tables than customers");
          int occ = 0;
          for (const auto& [t, o] : cell.tables) {
            if (o <= 0) fail("empty table retained");
            occ += o;
          }
          if (occ != cell.count) fail("table occupancies disagree with cell count");
          rest_total += cell.count;
          global[v] += static_cast<int>(cell.tables.size());
          total += static_cast<int>(cell.tables.size());
        }
        if (rest_total != sides[s].total) fail("restaurant total out of sync");
      }
    }
    if (global != global_tables_ || total != global_table_total_)
      fail("global table counts out of sync");
  }

  // Log probability of the full table configuration and dish draws given
  // the clustering: the product of per-restaurant seating patterns and the
  // global-level pattern over tables. Constant base-density factors for
  // distinct vertex labels are dropped throughout.
  double assignment_log_prob(const Hyperparams& hp) const {
    double lp = 0.0;
    for (const auto& [k, sides] : clusters_) {
      for (int s = 0; s < 2; ++s) {
        const double tau = hp.tau_for(static_cast<Side>(s));
        int n_tables = 0;
        for (const auto& [v, cell] : sides[s].cells) {
          n_tables += static_cast<int>(cell.tables.size());
          for (const auto& [t, occ] : cell.tables) lp += std::lgamma(occ);
        }
        lp += n_tables * std::log(tau) + std::lgamma(tau) - std::lgamma(tau + sides[s].total);
      }
    }
    for (const auto& [v, m] : global_tables_) lp += std::log(hp.gamma) + std::lgamma(m);
    lp += std::lgamma(hp.gamma) - std::lgamma(hp.gamma + global_table_total_);
    return lp;
  }

  bool operator==(const CollapsedCounts& o) const {
    return counts_equal(o) && tables_equal(o);
  }

  // Count-level comparison ignoring table ids (table multisets must match).
  bool equivalent(const CollapsedCounts& o) const {
    if (global_tables_ != o.global_tables_ || global_table_total_ != o.global_table_total_)
      return false;
    if (clusters_.size() != o.clusters_.size()) return false;
    auto a = clusters_.begin();
    auto b = o.clusters_.begin();
    for (; a != clusters_.end(); ++a, ++b) {
      if (a->first != b->first) return false;
      for (int s = 0; s < 2; ++s) {
        const Restaurant& ra = a->second[s];
        const Restaurant& rb = b->second[s];
        if (ra.total != rb.total || ra.cells.size() != rb.cells.size()) return false;
        auto ca = ra.cells.begin();
        auto cb = rb.cells.begin();
        for (; ca != ra.cells.end(); ++ca, ++cb) {
          if (ca->first != cb->first || ca->second.count != cb->second.count) return false;
          std::multiset<int> occ_a, occ_b;
          for (const auto& [t, o] : ca->second.tables) occ_a.insert(o);
          for (const auto& [t, o] : cb->second.tables) occ_b.insert(o);
          if (occ_a != occ_b) return false;
        }
      }
    }
    return true;
  }

  const std::map<ClusterId, std::array<Restaurant, 2>>& clusters() const { return clusters_; }

 private:
  static ClusterId empty_cluster_id() { return -1; }

  static void fail(const std::string& msg) {
    throw std::logic_error("CollapsedCounts invariant violated: " + msg);
  }

  const Restaurant* find_restaurant(ClusterId k, Side s) const {
    auto it = clusters_.find(k);
    return it == clusters_.end() ? nullptr : &it->second[side_index(s)];
  }

  const Cell* find_cell(ClusterId k, Side s, VertexId v) const {
    const Restaurant* r = find_restaurant(k, s);
    if (!r) return nullptr;
    auto it = r->cells.find(v);
    return it == r->cells.end() ? nullptr : &it->second;
  }

  bool counts_equal(const CollapsedCounts& o) const {
    return global_tables_ == o.global_tables_ && global_table_total_ == o.global_table_total_;
  }

  bool tables_equal(const CollapsedCounts& o) const {
    if (clusters_.size() != o.clusters_.size()) return false;
    auto a = clusters_.begin();
    auto b = o.clusters_.begin();
    for (; a != clusters_.end(); ++a, ++b) {
      if (a->first != b->first) return false;
      for (int s = 0; s < 2; ++s) {
        if (a->second[s].total != b->second[s].total) return false;
        if (a->second[s].cells.size() != b->second[s].cells.size()) return false;
        auto ca = a->second[s].cells.begin();
        auto cb = b->second[s].cells.begin();
        for (; ca != a->second[s].cells.end(); ++ca, ++cb) {
          if (ca->first != cb->first || ca->second.count != cb->second.count ||
              ca->second.tables != cb->second.tables)
            return false;
        }
      }
    }
    return true;
  }

  std::map<ClusterId, std::array<Restaurant, 2>> clusters_;
  std::map<VertexId, int> global_tables_;
  int global_table_total_ = 0;
  TableId next_table_id_ = 1;
};

}  // namespace dynmdnd
