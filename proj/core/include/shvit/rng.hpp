#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace shvit {

/// Mixes a base seed with stream identifiers (epoch, sample index, ...) so
/// that every consumer of randomness gets an independent, reproducible
/// stream regardless of the order in which streams are created.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

/// Seeded random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distribution helpers are implemented here rather than with
/// the <random> distributions, which are implementation-defined; this keeps
/// every draw bit-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n); rejection sampling, so exactly unbiased.
  std::size_t uniform_index(std::size_t n);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  bool bernoulli(double p);

  /// Independent child stream; does not advance this generator.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

  /// Engine state as text (std::mt19937_64 stream format) plus the cached
  /// normal variate, for checkpointing.
  std::string serialize() const;
  static Rng deserialize(const std::string& state);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace shvit
