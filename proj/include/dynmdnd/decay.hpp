#pragma once

// Decay functions for the distance-dependent seating prior.
//
// A decay f maps a non-negative time gap to [0, 1]; it is non-increasing
// and vanishes at infinity for every kind except Identity, which is
// constant 1 and recovers the classic CRP (f(inf) is still 0 so edges can
// never link forward in time).

#include <cmath>
#include <stdexcept>

#include "dynmdnd/numeric.hpp"
#include "dynmdnd/types.hpp"

namespace dynmdnd {

inline void check_decay_distance(double d) {
  if (std::isnan(d) || d < 0.0)
    throw std::invalid_argument("decay: distance must be non-negative");
}

// log f(d). Window decay outside its span and any decay at d = inf give -inf.
inline double log_decay_eval(const DecaySpec& spec, double d) {
  check_decay_distance(d);
  if (std::isinf(d)) return kNegInf;
  const double a = spec.scale;
  switch (spec.kind) {
    case DecayKind::Identity:
      return 0.0;
    case DecayKind::Exponential:
      return -d / a;
    case DecayKind::Logistic: {
      // log of exp(a-d) / (1 + exp(a-d)), stable on both tails
      const double x = a - d;
      return x <= 0.0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x));
    }
    case DecayKind::Window:
      return d < a ? 0.0 : kNegInf;
  }
  return kNegInf;
}

inline double decay_eval(const DecaySpec& spec, double d) {
  return std::exp(log_decay_eval(spec, d));
}

// Largest gap with f(d) >= floor, used to prune seating candidates.
// Identity never decays; Logistic and Exponential cross the floor at a
// closed-form point; Window is exact.
inline double decay_support_bound(const DecaySpec& spec, double floor) {
  const double a = spec.scale;
  switch (spec.kind) {
    case DecayKind::Identity:
      return std::numeric_limits<double>::infinity();
    case DecayKind::Exponential:
      return -a * std::log(floor);
    case DecayKind::Logistic:
      // f(d) <= exp(a - d), so a - log(floor) bounds the support
      return a - std::log(floor);
    case DecayKind::Window:
      return a;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace dynmdnd
