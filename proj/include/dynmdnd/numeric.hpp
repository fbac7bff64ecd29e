#pragma once

// Log-space numerics and the RNG used throughout.
//
// All probability arithmetic stays in log space until a normalized value is
// needed; categorical draws go through log_sum_exp so weights spanning many
// orders of magnitude stay usable. The RNG wraps a fixed engine and hand-
// rolled transforms so that a given seed produces the same stream on every
// build of the same binary.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace dynmdnd {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_i exp(x[i])); -inf entries are allowed and contribute nothing.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return kNegInf;
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Normalizes log weights into probabilities. Throws if all weights are -inf.
inline std::vector<double> normalize_log_weights(std::span<const double> log_w) {
  double z = log_sum_exp(log_w);
  if (z == kNegInf) throw std::domain_error("normalize_log_weights: all weights are zero");
  std::vector<double> p(log_w.size());
  for (std::size_t i = 0; i < log_w.size(); ++i) p[i] = std::exp(log_w[i] - z);
  return p;
}

// splitmix64, used to derive independent seeds for parallel streams.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log argument.
  double u01_open() { return 1.0 - u01(); }

  std::size_t uniform_index(std::size_t n) {
    // rejection-free enough for our n; modulo bias is irrelevant below 2^32
    return static_cast<std::size_t>(engine_() % n);
  }

  // Index draw from unnormalized non-negative weights.
  std::size_t categorical(std::span<const double> w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) throw std::domain_error("categorical: no mass");
    double r = u01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (r < acc) return i;
    }
    return w.size() - 1;
  }

  // Index draw from unnormalized log weights via log_sum_exp.
  std::size_t categorical_log(std::span<const double> log_w) {
    double z = log_sum_exp(log_w);
    if (z == kNegInf) throw std::domain_error("categorical_log: no mass");
    double r = u01();
    double acc = 0.0;
    for (std::size_t i = 0; i < log_w.size(); ++i) {
      acc += std::exp(log_w[i] - z);
      if (r < acc) return i;
    }
    return log_w.size() - 1;
  }

  // Marsaglia–Tsang; shape > 0, unit rate.
  double gamma(double shape) {
    if (shape < 1.0) {
      double u = u01_open();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = u01_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double exponential(double rate) { return -std::log(u01_open()) / rate; }

  double normal() {
    // Box–Muller, one value per call (cache intentionally omitted: keeps the
    // stream independent of call history)
    double u1 = u01_open();
    double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dynmdnd
