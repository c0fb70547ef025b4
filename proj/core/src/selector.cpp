#include "aoimix/selector.hpp"

#include "aoimix/error.hpp"

#include <algorithm>
#include <cstdint>
#include <bit>
#include <numeric>

namespace aoimix {
namespace {

void check_shape(const SelectionProblem& p) {
  if (p.c2.size() != p.c1.size() || p.has_request.size() != p.c1.size())
    throw ContractViolation("selection problem: c1, c2 and request flags differ in length");
  if (p.rb_budget < 1) throw ContractViolation("selection problem: rb_budget must be >= 1");
}

}  // namespace

SelectionCoefficients coefficients(double device_aoi, double previous_bs_aoi, bool sampled,
                                   double expected_delay_s, double slot_duration_s,
                                   const CostWeights& w) {
  SelectionCoefficients c;
  c.c1 = w.gamma_a * (expected_delay_s + device_aoi - previous_bs_aoi - slot_duration_s) +
         w.gamma_e * w.tx_power_w * expected_delay_s;
  c.c2 = w.gamma_e * (sampled ? w.sampling_cost_j : 0.0) +
         w.gamma_a * (previous_bs_aoi + slot_duration_s);
  return c;
}

double selection_objective(const SelectionProblem& problem, const BitVector& selection) {
  check_shape(problem);
  if (selection.size() != problem.size())
    throw ContractViolation("selection_objective: selection length mismatch");
  double total = 0.0;
  for (std::size_t m = 0; m < problem.size(); ++m)
    total += (selection[m] ? problem.c1[m] : 0.0) + problem.c2[m];
  return total;
}

BitVector select(const SelectionProblem& problem) {
  check_shape(problem);
  std::vector<std::size_t> negative;
  for (std::size_t m = 0; m < problem.size(); ++m)
    if (problem.has_request[m] && problem.c1[m] < 0.0) negative.push_back(m);

  const auto budget = static_cast<std::size_t>(problem.rb_budget);
  if (negative.size() > budget) {
    std::stable_sort(negative.begin(), negative.end(), [&](std::size_t a, std::size_t b) {
      return problem.c1[a] < problem.c1[b];
    });
    negative.resize(budget);
  }
  BitVector u(problem.size(), 0);
  for (auto m : negative) u[m] = 1;
  return u;
}

BitVector brute_force_select(const SelectionProblem& problem) {
  check_shape(problem);
  const std::size_t n = problem.size();
  if (n > kBruteForceLimit)
    throw ContractViolation("brute_force_select: refusing to enumerate more than 20 devices");

  std::uint32_t request_mask = 0;
  for (std::size_t m = 0; m < n; ++m)
    if (problem.has_request[m]) request_mask |= 1u << m;

  // Bit m of a mask is device m. Lexicographic order with earlier 1s first
  // is the order of the bit-reversed mask, descending.
  auto lex_key = [n](std::uint32_t mask) {
    std::uint32_t key = 0;
    for (std::size_t m = 0; m < n; ++m)
      if (mask & (1u << m)) key |= 1u << (n - 1 - m);
    return key;
  };

  BitVector candidate(n, 0);
  std::uint32_t best_mask = 0;
  double best = selection_objective(problem, candidate);
  const std::uint32_t end = n == 32 ? 0 : (1u << n);
  for (std::uint32_t mask = 1; mask != end; ++mask) {
    if ((mask & ~request_mask) != 0) continue;
    if (std::popcount(mask) > problem.rb_budget) continue;
    for (std::size_t m = 0; m < n; ++m) candidate[m] = (mask >> m) & 1u;
    const double value = selection_objective(problem, candidate);
    if (value < best || (value == best && lex_key(mask) > lex_key(best_mask))) {
      best = value;
      best_mask = mask;
    }
  }
  BitVector u(n, 0);
  for (std::size_t m = 0; m < n; ++m) u[m] = (best_mask >> m) & 1u;
  return u;
}

}  // namespace aoimix
