#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bpo {

using Vec = std::vector<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

/** Deterministic RNG. All draws are derived from raw mt19937_64 output with
 * fixed arithmetic so that a (seed, call sequence) pair gives the same stream
 * on every platform. */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; draws two uniforms per call, no cached state
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // index in [0, n)
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
    auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i >= n ? n - 1 : i;
  }

  // sample from a (not necessarily normalised) non-negative weight vector
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0 || !std::isfinite(w))
        throw std::invalid_argument("Rng::categorical: weights must be finite and non-negative");
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("Rng::categorical: weight sum must be positive");
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.size() - 1;
  }

  std::uint64_t raw() { return gen_(); }

  /** Derive an independent child stream; `salt` separates streams with the
   * same parent (e.g. eval vs. collection). */
  Rng child(std::uint64_t salt) {
    std::uint64_t x = gen_() ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    return Rng(x);
  }

 private:
  std::mt19937_64 gen_;
};

inline double symlog(double x) { return x >= 0.0 ? std::log(x + 1.0) : -std::log(-x + 1.0); }
inline double symexp(double x) { return x >= 0.0 ? std::exp(x) - 1.0 : -(std::exp(-x) - 1.0); }

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean_of: empty input");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// unbiased sample variance (n-1); zero for n == 1
inline double variance_of(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("variance_of: empty input");
  if (xs.size() == 1) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

inline double stderr_of(std::span<const double> xs) {
  return std::sqrt(variance_of(xs) / static_cast<double>(xs.size()));
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace bpo
