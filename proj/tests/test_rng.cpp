#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "ctxlab/rng.hpp"

using namespace ctxlab;

TEST_CASE("splitmix64 matches the reference sequence") {
  // First outputs of splitmix64 seeded with 0: each step adds the golden
  // gamma before mixing, so mix64(k * gamma) reproduces the stream.
  CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(mix64(0x9e3779b97f4a7c15ULL) == 0x6e789e6aa1b965f4ULL);
}

TEST_CASE("fnv1a of known strings") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("derived seeds separate tags and indices") {
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
}

TEST_CASE("index stays in range and covers every value") {
  Rng rng(3);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const std::size_t v = rng.index(7);
    REQUIRE(v < 7);
    ++seen[v];
  }
  for (int c : seen) CHECK(c > 800);
}

TEST_CASE("uniform lies in [0, 1) and bernoulli honours its extremes") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK(rng.bernoulli(1.0));
  }
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> a(50);
  std::iota(a.begin(), a.end(), 0);
  std::vector<int> b = a;
  Rng r1(5), r2(5);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(50);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);
  CHECK(a != expect);
}
