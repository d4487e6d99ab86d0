#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "causalattr/rng.hpp"

using namespace causalattr;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 32; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("stream keys separate sequences") {
  Rng a = Rng::stream(7, 1);
  Rng b = Rng::stream(7, 2);
  bool any_diff = false;
  for (int i = 0; i < 8; ++i) any_diff |= (a.next_u64() != b.next_u64());
  CHECK(any_diff);
}

TEST_CASE("mix_key is order sensitive") {
  CHECK(mix_key(1, 2) != mix_key(2, 1));
  CHECK(mix_key(1, 2, 3) != mix_key(1, 3, 2));
  CHECK(mix_key(5) == mix_key(5));
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
  Rng rng(3);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("normal draws match first two moments") {
  Rng rng(11);
  const int n = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double m = sum / n;
  const double v = sq / n - m * m;
  CHECK(std::abs(m) < 0.005);
  CHECK(std::abs(v - 1.0) < 0.01);
}

TEST_CASE("uniform_int is bounded and roughly uniform") {
  Rng rng(5);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const uint64_t k = rng.uniform_int(10);
    REQUIRE(k < 10);
    ++counts[k];
  }
  for (int c : counts) CHECK(std::abs(c / double(n) - 0.1) < 0.02);
}

TEST_CASE("bernoulli frequency") {
  Rng rng(9);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.3) ? 1 : 0;
  CHECK(std::abs(hits / double(n) - 0.3) < 0.01);
}

TEST_CASE("shuffle permutes and is seed deterministic") {
  std::vector<int> v(10);
  std::iota(v.begin(), v.end(), 0);
  Rng a(17);
  a.shuffle(v);
  std::vector<int> w(10);
  std::iota(w.begin(), w.end(), 0);
  Rng b(17);
  b.shuffle(w);
  CHECK(v == w);
  std::sort(w.begin(), w.end());
  std::vector<int> identity(10);
  std::iota(identity.begin(), identity.end(), 0);
  CHECK(w == identity);
}
