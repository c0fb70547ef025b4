#pragma once

#include "aoimix/random.hpp"
#include "aoimix/types.hpp"

#include <vector>

namespace aoimix {

/// Finite MDP with transition matrices P_a (states x states, rows sum to 1),
/// rewards R (states x actions) and a discount.
struct TabularMDP {
  std::vector<Matrix> transitions;  ///< one per action
  Matrix rewards;
  double discount = 0.9;

  int states() const { return static_cast<int>(rewards.rows()); }
  int actions() const { return static_cast<int>(rewards.cols()); }
};

/// Throws ContractViolation on bad shapes, negative or non-normalized rows
/// (tolerance 1e-12), or a discount outside [0, 1).
void validate(const TabularMDP& mdp);

/// (HQ)(o, a) = sum_o' P_a(o, o') [R(o, a) + discount * max_a' Q(o', a')].
Matrix bellman_apply(const TabularMDP& mdp, const Matrix& q);

struct ValueIterationResult {
  Matrix q;
  int iterations = 0;
  std::vector<double> residuals;  ///< |Q_{k+1} - Q_k|_inf per iteration
  bool converged = false;
};

/// Iterates H from `q0` until the sup-norm step falls below `tolerance`.
ValueIterationResult value_iteration(const TabularMDP& mdp, const Matrix& q0, double tolerance,
                                     int max_iterations);

/// Random MDP: Dirichlet(1) transition rows, rewards uniform in [-1, 1].
TabularMDP random_mdp(Rng& rng, int states, int actions, double discount);

}  // namespace aoimix
