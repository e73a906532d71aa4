#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace falmkit {

/// Seedable stream built on std::mt19937_64 (whose output sequence is fixed by the standard).
/// Distributions are implemented here rather than with <random>'s distribution classes, whose
/// algorithms vary between standard libraries, so draws are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream keyed by (seed, path...). Used to give every replicate, subject or
  /// image its own stream so results do not depend on evaluation order or worker count.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via the Marsaglia polar method.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finaliser; used for key mixing.
std::uint64_t mix64(std::uint64_t x);

}  // namespace falmkit
