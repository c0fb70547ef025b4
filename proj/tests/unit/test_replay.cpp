#include <doctest.h>

#include <aoimix/replay.hpp>

#include <cmath>
#include <set>

using namespace aoimix;

TEST_CASE("full-size batch returns every element") {
  ReplayBuffer<int> b(8);
  for (int i = 0; i < 8; ++i) b.push(i);
  Rng rng(1);
  auto s = b.sample(8, rng);
  CHECK(std::set<int>(s.begin(), s.end()) == std::set<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("underfilled buffer yields nothing") {
  ReplayBuffer<int> b(8);
  b.push(1);
  Rng rng(1);
  CHECK(b.sample(2, rng).empty());
}

TEST_CASE("same seed, same batch") {
  ReplayBuffer<int> b(100);
  for (int i = 0; i < 100; ++i) b.push(i);
  Rng r1(9), r2(9);
  CHECK(b.sample(16, r1) == b.sample(16, r2));
}

TEST_CASE("indices are distinct") {
  ReplayBuffer<int> b(50);
  for (int i = 0; i < 50; ++i) b.push(i);
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const auto idx = b.sample_indices(20, rng);
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 20);
  }
}

TEST_CASE("ring overwrites the oldest entry") {
  ReplayBuffer<int> b(3);
  for (int i = 0; i < 5; ++i) b.push(i);
  std::set<int> kept{b[0], b[1], b[2]};
  CHECK(kept == std::set<int>{2, 3, 4});
}

TEST_CASE("singleton draws are uniform") {
  ReplayBuffer<int> b(10);
  for (int i = 0; i < 10; ++i) b.push(i);
  Rng rng(5);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[b.sample(1, rng)[0]];
  const double p = 0.1, sigma = std::sqrt(n * p * (1 - p));
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c - n * p) < 3 * sigma);
    chi2 += (c - n * p) * (c - n * p) / (n * p);
  }
  // 9 degrees of freedom; 27.88 is the 0.999 quantile.
  CHECK(chi2 < 27.88);
}

TEST_CASE("zero capacity is rejected") { CHECK_THROWS(ReplayBuffer<int>(0)); }
