#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <iterator>
#include <utility>

namespace relsem {

/// Mixes a 64-bit value (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of `text`; stable across platforms, used to key child streams.
std::uint64_t hash_string(std::string_view text) noexcept;

/// Derives an independent stream seed from a parent seed and a path of ids.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept;

/// Seeded random source. The engine is std::mt19937_64 (its output sequence is
/// fixed by the standard); all distributions are implemented here so results
/// do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal (Box-Muller).
  double normal();

  /// Fisher-Yates shuffle of any random-access range.
  template <typename Range>
  void shuffle(Range& items) {
    for (std::size_t i = std::size(items); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Child generator keyed on this generator's seed and a path of ids. It does
  /// not depend on (or advance) the parent's position in its stream.
  Rng child(std::initializer_list<std::uint64_t> path) const {
    return Rng(derive_seed(seed_, path));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace relsem
