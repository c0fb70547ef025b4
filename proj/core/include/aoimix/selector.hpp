#pragma once

#include "aoimix/metrics.hpp"
#include "aoimix/types.hpp"

#include <utility>
#include <vector>

namespace aoimix {

/// Per-slot device selection problem: minimize sum_m (c1_m u_m + c2_m)
/// subject to sum u <= rb_budget and u_m <= has_request_m.
struct SelectionProblem {
  std::vector<double> c1;
  std::vector<double> c2;
  int rb_budget = 1;
  BitVector has_request;  ///< devices with a pending packet

  std::size_t size() const { return c1.size(); }
};

struct SelectionCoefficients {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// c1 = gA (E[l] + phi - Phi_prev - tau) + gE P_T E[l];
/// c2 = gE s C_S + gA (Phi_prev + tau).
SelectionCoefficients coefficients(double device_aoi, double previous_bs_aoi, bool sampled,
                                   double expected_delay_s, double slot_duration_s,
                                   const CostWeights& weights);

/// Objective value of a selection, summed in device order.
double selection_objective(const SelectionProblem& problem, const BitVector& selection);

/// Closed-form optimum: devices with a request and c1 < 0; when more than
/// rb_budget qualify, the rb_budget most negative c1 win (lower index on ties).
BitVector select(const SelectionProblem& problem);

/// Exhaustive search over all feasible selections (at most 20 devices).
/// Among equal objectives the lexicographically first vector wins, where a
/// 1 in an earlier position sorts first.
BitVector brute_force_select(const SelectionProblem& problem);

constexpr std::size_t kBruteForceLimit = 20;

}  // namespace aoimix
