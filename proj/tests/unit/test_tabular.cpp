#include <doctest.h>

#include <aoimix/error.hpp>
#include <aoimix/tabular.hpp>

using namespace aoimix;

namespace {

Matrix random_q(Rng& rng, int s, int a) {
  std::uniform_real_distribution<double> u(-10, 10);
  Matrix q(s, a);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < a; ++j) q(i, j) = u(rng);
  return q;
}

}  // namespace

TEST_CASE("no discount gives the expected reward") {
  Rng rng(1);
  TabularMDP mdp = random_mdp(rng, 6, 3, 0.0);
  const Matrix h = bellman_apply(mdp, random_q(rng, 6, 3));
  // With R(o, a) independent of o', the expectation is R itself.
  CHECK((h - mdp.rewards).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("one state, one action: geometric series") {
  TabularMDP mdp;
  mdp.transitions = {Matrix::Ones(1, 1)};
  mdp.rewards = Matrix::Ones(1, 1);
  mdp.discount = 0.9;
  const auto r = value_iteration(mdp, Matrix::Zero(1, 1), 1e-13, 10000);
  CHECK(r.converged);
  CHECK(r.q(0, 0) == doctest::Approx(10.0).epsilon(1e-11));
}

TEST_CASE("contraction on random MDPs") {
  Rng rng(2);
  std::uniform_int_distribution<int> s(1, 20), a(1, 4);
  for (int i = 0; i < 300; ++i) {
    const int ns = s(rng), na = a(rng);
    TabularMDP mdp = random_mdp(rng, ns, na, 0.9);
    validate(mdp);
    const Matrix q1 = random_q(rng, ns, na), q2 = random_q(rng, ns, na);
    const double lhs = (bellman_apply(mdp, q1) - bellman_apply(mdp, q2)).lpNorm<Eigen::Infinity>();
    CHECK(lhs <= 0.9 * (q1 - q2).lpNorm<Eigen::Infinity>() + 1e-12);
  }
}

TEST_CASE("value iteration residuals shrink geometrically") {
  Rng rng(3);
  TabularMDP mdp = random_mdp(rng, 10, 3, 0.9);
  const auto r = value_iteration(mdp, Matrix::Zero(10, 3), 1e-12, 5000);
  REQUIRE(r.converged);
  for (std::size_t k = 1; k < r.residuals.size(); ++k)
    CHECK(r.residuals[k] <= 0.9 * r.residuals[k - 1] + 1e-12);
  CHECK((bellman_apply(mdp, r.q) - r.q).lpNorm<Eigen::Infinity>() < 1e-11);
}

TEST_CASE("validation") {
  TabularMDP mdp;
  mdp.transitions = {Matrix::Constant(2, 2, 0.6)};
  mdp.rewards = Matrix::Zero(2, 1);
  CHECK_THROWS_AS(validate(mdp), ContractViolation);
  mdp.transitions = {Matrix::Constant(2, 2, 0.5)};
  mdp.discount = 1.0;
  CHECK_THROWS_AS(validate(mdp), ContractViolation);
}
