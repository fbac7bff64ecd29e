#pragma once

// The distance-dependent seating prior over customer links.
//
// Customer i links to one customer c_i in {0..i} (itself included) with
// unnormalized weight f(t_i - t_j) for j < i and alpha for j = i. Links
// always point backward in sequence order, so the link graph is a forest
// whose roots are the self-linked customers; edge clusters are its
// connected components, labeled by their smallest member index (which is
// always the root, since links strictly decrease the index).

#include <span>
#include <stdexcept>
#include <vector>

#include "dynmdnd/decay.hpp"
#include "dynmdnd/numeric.hpp"
#include "dynmdnd/types.hpp"

namespace dynmdnd {

// Unnormalized log seating weights for customer i given arrival times
// t_0..t_i. Entry j < i is log f(t_i - t_j); entry i is log alpha.
inline std::vector<double> seating_log_weights(std::size_t i, std::span<const double> times,
                                               const Hyperparams& hp) {
  if (times.size() < i + 1) throw std::invalid_argument("seating_log_weights: times too short");
  for (std::size_t j = 0; j + 1 <= i; ++j)
    if (times[j] > times[j + 1])
      throw std::invalid_argument("seating_log_weights: times must be sorted");
  std::vector<double> w(i + 1);
  for (std::size_t j = 0; j < i; ++j) w[j] = log_decay_eval(hp.decay, times[i] - times[j]);
  w[i] = std::log(hp.alpha);
  return w;
}

// Connected-components labeling of a backward link vector; label = smallest
// member index. Single forward pass: the root of i's tree is already
// labeled when i is visited.
inline std::vector<int> links_to_clusters(std::span<const int> links) {
  std::vector<int> z(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    const int c = links[i];
    if (c < 0 || static_cast<std::size_t>(c) > i)
      throw std::invalid_argument("links_to_clusters: forward link at index " + std::to_string(i));
    z[i] = (static_cast<std::size_t>(c) == i) ? static_cast<int>(i) : z[c];
  }
  return z;
}

struct SeatingState {
  std::vector<int> links;
  std::vector<int> clusters;

  static SeatingState from_links(std::vector<int> links) {
    SeatingState s;
    s.clusters = links_to_clusters(links);
    s.links = std::move(links);
    return s;
  }
};

// Log prior probability of a full link vector under the seating process.
inline double seating_log_prior(std::span<const int> links, std::span<const double> times,
                                const Hyperparams& hp) {
  double lp = 0.0;
  for (std::size_t i = 0; i < links.size(); ++i) {
    auto w = seating_log_weights(i, times, hp);
    lp += w[links[i]] - log_sum_exp(w);
  }
  return lp;
}

}  // namespace dynmdnd
