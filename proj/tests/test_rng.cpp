#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"

#include "cvar_mlmc/errors.hpp"
#include "cvar_mlmc/rng.hpp"

using namespace cvar_mlmc;

TEST_SUITE("rng") {

TEST_CASE("same tuple gives the same words") {
  SeedStream a(7, 0, 0, 0), b(7, 0, 0, 0);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("neighbouring sample indices differ") {
  SeedStream a(7, 0, 0, 0), b(7, 0, 1, 0);
  const bool same = a.next_u64() == b.next_u64() && a.next_u64() == b.next_u64();
  CHECK_FALSE(same);
}

TEST_CASE("every tuple component changes the stream") {
  std::set<std::uint64_t> first;
  first.insert(SeedStream(1, 2, 3, 4).next_u64());
  first.insert(SeedStream(9, 2, 3, 4).next_u64());
  first.insert(SeedStream(1, 9, 3, 4).next_u64());
  first.insert(SeedStream(1, 2, 9, 4).next_u64());
  first.insert(SeedStream(1, 2, 3, 9).next_u64());
  CHECK(first.size() == 5);
}

TEST_CASE("standard normal moments over 1e6 draws") {
  SeedStream s(11, 0, 0, 0);
  const auto x = draw(s, DrawSpec::normal(), 1'000'000);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size() - 1;
  CHECK(std::abs(mean) <= 4.0 / 1000.0);
  CHECK(std::abs(var - 1.0) <= 0.01);
}

TEST_CASE("empirical 0.7-quantile of 1e5 normals") {
  SeedStream s(3, 1, 0, 0);
  auto x = draw(s, DrawSpec::normal(), 100'000);
  std::sort(x.begin(), x.end());
  const double q = x[static_cast<std::size_t>(0.7 * x.size())];
  CHECK(std::abs(q - 0.5244) <= 0.02);
}

TEST_CASE("uniform draws respect their bounds") {
  SeedStream s(5, 0, 0, 0);
  const auto x = draw(s, DrawSpec::uniform(4.95, 5.05), 50'000);
  for (double v : x) {
    REQUIRE(v >= 4.95);
    REQUIRE(v <= 5.05);
  }
  CHECK(draw(s, DrawSpec::uniform(0, 1), 0).empty());
  CHECK_THROWS_AS(draw(s, DrawSpec::uniform(1.0, 1.0), 1), ParameterError);
  CHECK_THROWS_AS(draw(s, DrawSpec::uniform(2.0, 1.0), 1), ParameterError);
}

TEST_CASE("open unit interval and bounded integers") {
  SeedStream s(0, 0, 0, 0);
  for (int i = 0; i < 100'000; ++i) {
    const double u = s.next_open01();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70'000; ++i) ++counts[s.next_below(7)];
  for (int c : counts) CHECK(std::abs(c - 10'000) < 500);
}

TEST_CASE("sequential consumption matches one long draw") {
  SeedStream a(21, 3, 4, 0), b(21, 3, 4, 0);
  const auto whole = draw(a, DrawSpec::normal(), 9);
  auto head = draw(b, DrawSpec::normal(), 4);
  const auto tail = draw(b, DrawSpec::normal(), 5);
  head.insert(head.end(), tail.begin(), tail.end());
  CHECK(head == whole);
}

TEST_CASE("replica tag ranges are disjoint") {
  std::set<std::uint64_t> tags{0};
  for (std::uint64_t j = 0; j < 50; ++j) {
    tags.insert(iteration_tag(j));
    for (std::uint64_t k = 0; k < 5; ++k)
      for (std::uint64_t b = 0; b < 3; ++b) tags.insert(bootstrap_tag(j, k, b));
  }
  for (std::uint64_t i = 0; i < 10; ++i) tags.insert(reference_tag(i));
  CHECK(tags.size() == 1 + 50 + 50 * 15 + 10);
}

}
