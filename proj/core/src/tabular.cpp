#include "aoimix/tabular.hpp"

#include "aoimix/error.hpp"

#include <cmath>
#include <string>

namespace aoimix {

void validate(const TabularMDP& mdp) {
  if (!(mdp.discount >= 0.0 && mdp.discount < 1.0))
    throw ContractViolation("tabular mdp: discount must lie in [0, 1)");
  const int n = mdp.states();
  if (n < 1 || mdp.actions() < 1) throw ContractViolation("tabular mdp: empty state or action set");
  if (static_cast<int>(mdp.transitions.size()) != mdp.actions())
    throw ContractViolation("tabular mdp: one transition matrix per action required");
  for (int a = 0; a < mdp.actions(); ++a) {
    const auto& p = mdp.transitions[a];
    if (p.rows() != n || p.cols() != n)
      throw ContractViolation("tabular mdp: transition matrix " + std::to_string(a) +
                              " is not states x states");
    if ((p.array() < 0.0).any())
      throw ContractViolation("tabular mdp: negative transition probability");
    for (int o = 0; o < n; ++o)
      if (std::abs(p.row(o).sum() - 1.0) > 1e-12)
        throw ContractViolation("tabular mdp: row " + std::to_string(o) + " of action " +
                                std::to_string(a) + " does not sum to 1");
  }
}

Matrix bellman_apply(const TabularMDP& mdp, const Matrix& q) {
  if (q.rows() != mdp.states() || q.cols() != mdp.actions())
    throw ContractViolation("bellman_apply: Q table shape differs from the MDP");
  const Vector best = q.rowwise().maxCoeff();
  Matrix out(mdp.states(), mdp.actions());
  for (int a = 0; a < mdp.actions(); ++a) {
    const Vector expected_next = mdp.transitions[a] * best;
    const Vector row_mass = mdp.transitions[a].rowwise().sum();
    out.col(a) = mdp.rewards.col(a).cwiseProduct(row_mass) + mdp.discount * expected_next;
  }
  return out;
}

ValueIterationResult value_iteration(const TabularMDP& mdp, const Matrix& q0, double tolerance,
                                     int max_iterations) {
  ValueIterationResult r;
  r.q = q0;
  for (int k = 0; k < max_iterations; ++k) {
    Matrix next = bellman_apply(mdp, r.q);
    const double step = (next - r.q).cwiseAbs().maxCoeff();
    r.q = std::move(next);
    r.residuals.push_back(step);
    r.iterations = k + 1;
    if (step < tolerance) {
      r.converged = true;
      break;
    }
  }
  return r;
}

TabularMDP random_mdp(Rng& rng, int states, int actions, double discount) {
  if (states < 1 || actions < 1) throw ContractViolation("random_mdp: sizes must be positive");
  std::exponential_distribution<double> gamma1(1.0);
  std::uniform_real_distribution<double> reward(-1.0, 1.0);
  TabularMDP mdp;
  mdp.discount = discount;
  for (int a = 0; a < actions; ++a) {
    Matrix p(states, states);
    for (int o = 0; o < states; ++o) {
      for (int j = 0; j < states; ++j) p(o, j) = gamma1(rng);
      p.row(o) /= p.row(o).sum();
    }
    mdp.transitions.push_back(std::move(p));
  }
  mdp.rewards.resize(states, actions);
  for (int o = 0; o < states; ++o)
    for (int a = 0; a < actions; ++a) mdp.rewards(o, a) = reward(rng);
  return mdp;
}

}  // namespace aoimix
