#ifndef SSDE_RNG_HPP
#define SSDE_RNG_HPP

#include <cstdint>
#include <random>
#include <span>

#include "ssde/linalg.hpp"

namespace ssde {

/// Seeded deterministic generator. One instance per chain; not thread-safe.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();
  Vec normal_vector(Eigen::Index n);
  /// Exponential(rate) by inverse CDF.
  double exponential(double rate);
  /// Gamma(shape, rate), mean shape / rate.
  double gamma(double shape, double rate);
  /// Index drawn with probability proportional to non-negative weights.
  int categorical(std::span<const double> weights);
  int categorical(const Vec& weights) { return categorical(std::span<const double>(weights.data(), weights.size())); }

  /// Independent stream for chain/stream `index`, derived from this generator's seed.
  Rng derive(std::uint64_t index) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// SplitMix64 finalizer, used for seed derivation.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace ssde

#endif  // SSDE_RNG_HPP
