#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include <convsense/rng.hpp>

using namespace convsense;

TEST_CASE("streams are deterministic per (seed, stream)") {
  RngStream a(123, 7), b(123, 7);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct streams of one seed differ") {
  RngStream a(123, 0), b(123, 1);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  REQUIRE(same == 0);
}

TEST_CASE("uniform ranges") {
  RngStream s(5, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double v = s.symmetric_uniform();
    REQUIRE(v >= -1.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("bounded integers cover the range without bias holes") {
  RngStream s(9, 0);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = s.below(6);
    REQUIRE(v < 6);
    seen.insert(v);
  }
  REQUIRE(seen.size() == 6);
  REQUIRE_THROWS_AS(s.below(0), InvalidArgument);
}

TEST_CASE("gaussian moments") {
  RngStream s(2024, 3);
  const int count = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < count; ++i) {
    const double g = s.gaussian();
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / count;
  const double var = sum_sq / count - mean * mean;
  REQUIRE(std::abs(mean) < 0.02);       // ~6 standard errors
  REQUIRE(std::abs(var - 1.0) < 0.03);  // ~6 standard errors
}

TEST_CASE("derived seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  REQUIRE(seen.size() == 1000);
}
