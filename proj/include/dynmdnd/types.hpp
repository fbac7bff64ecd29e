#pragma once

// Core domain types for edge-clustered temporal multigraphs.
//
// An interaction network is an ordered sequence of timed directed edges.
// Each edge belongs to a latent cluster; clusters carry their own sender
// and recipient distributions, tied together by a global vertex popularity
// measure. Everything downstream (simulation, Gibbs inference, prediction)
// works on the types defined here.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynmdnd {

// Dense vertex label assigned at ingestion. kNewVertex stands for a
// previously unseen vertex (a fresh draw from the continuous base measure).
using VertexId = std::int32_t;
inline constexpr VertexId kNewVertex = -1;

enum class Side : int { Sender = 0, Recipient = 1 };

inline constexpr int side_index(Side s) { return static_cast<int>(s); }

// One interaction event.
struct TimedEdge {
  VertexId sender = 0;
  VertexId recipient = 0;
  double time = 0.0;

  VertexId vertex(Side s) const { return s == Side::Sender ? sender : recipient; }
};

// Ordered edge list, optionally partitioned into time slots.
// slot_boundaries[b] is the exclusive upper edge of slot b: an edge with
// time t belongs to the first slot whose boundary exceeds t; edges at or
// past the last boundary belong to the final slot.
struct EdgeSequence {
  std::vector<TimedEdge> edges;
  std::vector<double> slot_boundaries;

  std::size_t size() const { return edges.size(); }
  bool empty() const { return edges.empty(); }
  const TimedEdge& operator[](std::size_t i) const { return edges[i]; }

  bool sorted_by_time() const {
    return std::is_sorted(edges.begin(), edges.end(),
                          [](const TimedEdge& a, const TimedEdge& b) { return a.time < b.time; });
  }

  // Number of distinct slots. Without boundaries the whole sequence is one slot.
  int n_slots() const {
    return slot_boundaries.empty() ? 1 : static_cast<int>(slot_boundaries.size());
  }

  int slot_of(double t) const {
    if (slot_boundaries.empty()) return 0;
    auto it = std::upper_bound(slot_boundaries.begin(), slot_boundaries.end(), t);
    if (it == slot_boundaries.end()) return static_cast<int>(slot_boundaries.size()) - 1;
    return static_cast<int>(it - slot_boundaries.begin());
  }

  // Vertices are dense ids; the count is one past the largest id seen.
  int n_vertices() const {
    VertexId m = -1;
    for (const auto& e : edges) m = std::max({m, e.sender, e.recipient});
    return static_cast<int>(m + 1);
  }

  void validate() const {
    if (!sorted_by_time()) throw std::invalid_argument("EdgeSequence: edges not sorted by time");
    if (!std::is_sorted(slot_boundaries.begin(), slot_boundaries.end(),
                        [](double a, double b) { return a <= b; }))
      throw std::invalid_argument("EdgeSequence: slot boundaries not strictly increasing");
    for (const auto& e : edges) {
      if (!std::isfinite(e.time) || e.time < 0.0)
        throw std::invalid_argument("EdgeSequence: edge time must be finite and non-negative");
      if (e.sender < 0 || e.recipient < 0)
        throw std::invalid_argument("EdgeSequence: vertex ids must be non-negative");
    }
  }
};

enum class DecayKind { Identity, Exponential, Logistic, Window };

inline std::string to_string(DecayKind k) {
  switch (k) {
    case DecayKind::Identity: return "identity";
    case DecayKind::Exponential: return "exponential";
    case DecayKind::Logistic: return "logistic";
    case DecayKind::Window: return "window";
  }
  return "?";
}

inline DecayKind decay_kind_from_string(const std::string& s) {
  if (s == "identity" || s == "crp") return DecayKind::Identity;
  if (s == "exponential" || s == "exp") return DecayKind::Exponential;
  if (s == "logistic") return DecayKind::Logistic;
  if (s == "window") return DecayKind::Window;
  throw std::invalid_argument("unknown decay kind: " + s);
}

// Decay function selector. `scale` is the width parameter a; Identity
// ignores it and reduces the seating prior to the classic CRP.
struct DecaySpec {
  DecayKind kind = DecayKind::Identity;
  double scale = 1.0;

  void validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw std::invalid_argument("DecaySpec: scale must be positive and finite");
  }
};

// Scalar model knobs.
//   gamma: concentration of the global vertex popularity measure
//   tau:   concentration of each cluster's sender/recipient distribution
//   alpha: self-link mass in the seating prior
// tau_recipient, when set, gives recipient restaurants their own
// concentration; by default both sides share tau.
struct Hyperparams {
  double gamma = 1.0;
  double tau = 1.0;
  double alpha = 1.0;
  DecaySpec decay;
  std::optional<double> tau_recipient;

  double tau_for(Side s) const {
    return (s == Side::Recipient && tau_recipient) ? *tau_recipient : tau;
  }

  void validate() const {
    auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
    if (!positive(gamma)) throw std::invalid_argument("Hyperparams: gamma must be > 0");
    if (!positive(tau)) throw std::invalid_argument("Hyperparams: tau must be > 0");
    if (!positive(alpha)) throw std::invalid_argument("Hyperparams: alpha must be > 0");
    if (tau_recipient && !positive(*tau_recipient))
      throw std::invalid_argument("Hyperparams: tau_recipient must be > 0");
    decay.validate();
  }
};

}  // namespace dynmdnd
