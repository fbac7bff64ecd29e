#pragma once

// Ranking metrics over binarized edge sets. Multiplicity is ignored: the
// truth network is the set of distinct directed pairs.

#include <set>
#include <span>
#include <stdexcept>
#include <utility>

#include "dynmdnd/types.hpp"

namespace dynmdnd {

using EdgePairSet = std::set<std::pair<VertexId, VertexId>>;

inline EdgePairSet distinct_pairs(const EdgeSequence& seq) {
  EdgePairSet s;
  for (const auto& e : seq.edges) s.emplace(e.sender, e.recipient);
  return s;
}

inline double f1_score(const EdgePairSet& predicted, const EdgePairSet& truth) {
  if (truth.empty()) throw std::invalid_argument("f1_score: empty truth set");
  if (predicted.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& p : predicted) inter += truth.count(p);
  const double precision = static_cast<double>(inter) / predicted.size();
  const double recall = static_cast<double>(inter) / truth.size();
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

// Average precision over the top-k list, normalized by min(k, |truth|).
inline double map_at_k(std::span<const std::pair<VertexId, VertexId>> ranked,
                       const EdgePairSet& truth, int k) {
  if (k < 1) throw std::invalid_argument("map_at_k: k must be >= 1");
  if (truth.empty()) throw std::invalid_argument("map_at_k: empty truth set");
  const std::size_t cut = std::min<std::size_t>(k, ranked.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < cut; ++i) {
    if (truth.count(ranked[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / std::min<std::size_t>(k, truth.size());
}

enum class HitsMode {
  PrecisionAtK,  // |top-k ∩ truth| / k
  RecallStyle,   // |top-k ∩ truth| / |truth|
};

// Hit rate of the top-k ranked edges. The denominator stays k even when the
// ranked list is shorter; missing slots count as misses.
inline double hits_at_k(std::span<const std::pair<VertexId, VertexId>> ranked,
                        const EdgePairSet& truth, int k, HitsMode mode = HitsMode::PrecisionAtK) {
  if (k < 1) throw std::invalid_argument("hits_at_k: k must be >= 1");
  if (truth.empty()) throw std::invalid_argument("hits_at_k: empty truth set");
  const std::size_t cut = std::min<std::size_t>(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < cut; ++i) hits += truth.count(ranked[i]);
  const double denom = mode == HitsMode::PrecisionAtK ? static_cast<double>(k)
                                                      : static_cast<double>(truth.size());
  return static_cast<double>(hits) / denom;
}

}  // namespace dynmdnd
