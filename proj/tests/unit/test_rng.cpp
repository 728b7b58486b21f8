#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "relsem/rng.hpp"

using namespace relsem;

namespace {

// Pearson statistic against a uniform expectation.
double chi_square(const std::vector<long>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double expected = total / static_cast<double>(counts.size());
  double chi = 0.0;
  for (long c : counts) chi += (c - expected) * (c - expected) / expected;
  return chi;
}

}  // namespace

TEST_CASE("derive_seed is a pure function of seed and path") {
  CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
  CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
  CHECK(derive_seed(7, {1}) != derive_seed(8, {1}));
  CHECK(derive_seed(7, {1}) != derive_seed(7, {1, 0}));
}

TEST_CASE("child streams do not depend on the parent position") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) a.next_u64();
  Rng ca = a.child({3});
  Rng cb = b.child({3});
  for (int i = 0; i < 10; ++i) CHECK(ca.next_u64() == cb.next_u64());
}

TEST_CASE("hash_string is FNV-1a") {
  // Reference values of 64-bit FNV-1a.
  CHECK(hash_string("") == 0xcbf29ce484222325ULL);
  CHECK(hash_string("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("uniform_index passes a chi-square test") {
  Rng rng(1);
  std::vector<long> counts(10, 0);
  for (int i = 0; i < 100000; ++i) ++counts[rng.uniform_index(10)];
  // 9 degrees of freedom, p = 0.001 critical value.
  CHECK(chi_square(counts) < 27.88);
}

TEST_CASE("uniform_int covers both ends") {
  Rng rng(2);
  std::array<int, 3> seen{};
  for (int i = 0; i < 1000; ++i) ++seen[static_cast<std::size_t>(rng.uniform_int(1, 3) - 1)];
  for (int s : seen) CHECK(s > 0);
}

TEST_CASE("shuffle produces every ordering uniformly") {
  Rng rng(3);
  std::map<std::vector<int>, long> seen;
  for (int i = 0; i < 60000; ++i) {
    std::vector<int> v{0, 1, 2};
    rng.shuffle(v);
    ++seen[v];
  }
  REQUIRE(seen.size() == 6);
  std::vector<long> counts;
  for (const auto& [_, c] : seen) counts.push_back(c);
  // 5 degrees of freedom, p = 0.001.
  CHECK(chi_square(counts) < 20.52);
}

TEST_CASE("normal has unit variance") {
  Rng rng(4);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("bernoulli frequency matches p") {
  Rng rng(5);
  long hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.3);
  CHECK(std::abs(hits / static_cast<double>(n) - 0.3) < 0.005);
}
