#include <doctest.h>

#include "helpers.hpp"

#include <aoimix/random.hpp>
#include <aoimix/selector.hpp>

using namespace aoimix;

namespace {

SelectionProblem problem(std::vector<double> c1, int budget) {
  SelectionProblem p;
  p.c2.assign(c1.size(), 0.0);
  p.has_request.assign(c1.size(), 1);
  p.c1 = std::move(c1);
  p.rb_budget = budget;
  return p;
}

SelectionProblem random_problem(Rng& rng) {
  std::uniform_int_distribution<int> mi(1, 12), ii(1, 6), coin(0, 3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const int m = mi(rng);
  SelectionProblem p;
  p.rb_budget = ii(rng);
  for (int i = 0; i < m; ++i) {
    p.c1.push_back(u(rng));
    p.c2.push_back(u(rng));
    p.has_request.push_back(coin(rng) != 0);
  }
  return p;
}

bool feasible(const SelectionProblem& p, const BitVector& u) {
  int n = 0;
  for (std::size_t m = 0; m < u.size(); ++m) {
    if (u[m] && !p.has_request[m]) return false;
    n += u[m];
  }
  return n <= p.rb_budget;
}

}  // namespace

TEST_CASE("coefficients") {
  CostWeights w;
  SUBCASE("fresh sample against a stale BS copy") {
    const auto c = coefficients(0.0, 4.0, true, 0.0, 1.0, w);
    CHECK(c.c1 == -2.5);
  }
  SUBCASE("indifference boundary") {
    const auto c = coefficients(3.0, 2.0, false, 0.0, 1.0, w);
    CHECK(c.c1 == 0.0);
  }
  SUBCASE("hand evaluation") {
    const double phi = 0.7, prev = 3.1, el = 2.3e-4, tau = 1.0;
    const auto c = coefficients(phi, prev, true, el, tau, w);
    CHECK(c.c1 == doctest::Approx(0.5 * (el + phi - prev - tau) + 0.5 * 0.5 * el).epsilon(1e-15));
    CHECK(c.c2 == doctest::Approx(0.5 * 0.5e-3 + 0.5 * (prev + tau)).epsilon(1e-15));
    const auto idle = coefficients(phi, prev, false, el, tau, w);
    CHECK(idle.c2 == doctest::Approx(0.5 * (prev + tau)).epsilon(1e-15));
  }
}

TEST_CASE("select") {
  SUBCASE("nothing worth sending") {
    CHECK(select(problem({0.0, 1.0, 2.0}, 2)) == BitVector{0, 0, 0});
  }
  SUBCASE("two most negative") {
    CHECK(select(problem({-3.0, -1.0, -2.0}, 2)) == BitVector{1, 0, 1});
  }
  SUBCASE("single device") { CHECK(select(problem({-0.1}, 1)) == BitVector{1}); }
  SUBCASE("ties go to the lower index") {
    CHECK(select(problem({-1.0, -1.0, -1.0, -1.0}, 2)) == BitVector{1, 1, 0, 0});
  }
  SUBCASE("devices without a request are never chosen") {
    auto p = problem({-5.0, -1.0}, 2);
    p.has_request = {0, 1};
    CHECK(select(p) == BitVector{0, 1});
  }
  SUBCASE("a budget below one RB is rejected") { CHECK_THROWS(select(problem({-1.0, -2.0}, 0))); }
}

TEST_CASE("objective equals exhaustive minimum on random instances") {
  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_problem(rng);
    const auto u = select(p);
    const auto best = brute_force_select(p);
    CHECK(feasible(p, u));
    CHECK(selection_objective(p, u) == selection_objective(p, best));
  }
}

TEST_CASE("no random feasible vector beats the selection") {
  Rng rng(77);
  std::uniform_int_distribution<int> bit(0, 1);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_problem(rng);
    const double mine = selection_objective(p, select(p));
    for (int k = 0; k < 100; ++k) {
      BitVector v(p.size());
      for (auto& b : v) b = bit(rng);
      if (!feasible(p, v)) continue;
      CHECK(mine <= selection_objective(p, v));
    }
  }
}

TEST_CASE("brute force refuses oversized problems") {
  auto p = problem(std::vector<double>(kBruteForceLimit + 1, -1.0), 3);
  CHECK_THROWS(brute_force_select(p));
}
