#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "tcinn/rng.hpp"

using tcinn::Rng;

TEST_SUITE("rng") {

TEST_CASE("same seed and stream give identical sequences") {
  Rng a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different streams from one seed diverge") {
  Rng a(42, 0), b(42, 1), c(42, 1000);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 64; ++i) {
    const uint64_t va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
    same_ab += (va == vb);
    same_ac += (va == vc);
  }
  CHECK(same_ab == 0);
  CHECK(same_ac == 0);
}

TEST_CASE("different seeds diverge") {
  Rng a(1, 0), b(2, 0);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += (a.next_u64() == b.next_u64());
  CHECK(same == 0);
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
  Rng r(7, 0);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("bounded uniform respects its interval") {
  Rng r(7, 2);
  for (int i = 0; i < 5000; ++i) {
    const double u = r.uniform(-3.0, 5.0);
    CHECK(u >= -3.0);
    CHECK(u < 5.0);
  }
}

TEST_CASE("uniform_index covers all buckets") {
  Rng r(11, 0);
  std::array<int, 6> counts{};
  for (int i = 0; i < 6000; ++i) {
    const uint64_t k = r.uniform_index(6);
    REQUIRE(k < 6);
    ++counts[k];
  }
  for (int c : counts) CHECK(c > 700);  // ~1000 expected per bucket
}

TEST_CASE("normal draws are finite with sane moments") {
  Rng r(5, 0);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    REQUIRE(std::isfinite(x));
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("shuffle is a permutation and is reproducible") {
  std::vector<int> v(257);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;

  Rng a(9, 1);
  a.shuffle(v);
  Rng b(9, 1);
  b.shuffle(w);
  CHECK(v == w);
  CHECK(v != std::vector<int>(v.size()) /* not all zero */);

  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(v.size());
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);

  // A different stream produces a different order.
  std::vector<int> u(257);
  std::iota(u.begin(), u.end(), 0);
  Rng c(9, 2);
  c.shuffle(u);
  CHECK(u != v);
}

TEST_CASE("state round trip resumes the sequence exactly") {
  Rng r(123, 4);
  for (int i = 0; i < 17; ++i) r.next_u64();
  const auto snap = r.state();
  std::vector<uint64_t> tail;
  for (int i = 0; i < 50; ++i) tail.push_back(r.next_u64());

  Rng resumed;
  resumed.set_state(snap);
  for (int i = 0; i < 50; ++i) CHECK(resumed.next_u64() == tail[static_cast<size_t>(i)]);
}

}  // TEST_SUITE
