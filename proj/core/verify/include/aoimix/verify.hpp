#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aoimix::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Random selection problems (M <= 12, I <= 6, half on a dyadic grid so that
/// ties and zero coefficients occur): closed form vs exhaustive search,
/// objective compared exactly; also feasibility and the sign rule.
CheckResult selector_optimality(std::uint64_t seed, int instances = 1000);

/// Random networks (depth <= 4, every activation kind): reverse-mode
/// gradients vs central differences with h = 1e-5.
CheckResult gradient_exactness(std::uint64_t seed, int networks = 100);

/// Random hypernetworks and states: finite-difference dQ_tot/dQ_m >= -1e-9;
/// per-device max vs exhaustive joint-action max for M <= 4.
CheckResult mixing_monotonicity(std::uint64_t seed, int probes = 1000);

/// Random tabular MDPs: sup-norm contraction of the Bellman operator and
/// geometric convergence of value iteration.
CheckResult bellman_contraction(std::uint64_t seed, int mdps = 1000);

/// Frequency and AoI semantics: Omega monotone in |y| and in the disturbance
/// bound, Delta * F = 1, device AoI reset, BS AoI clamp, energy additivity.
CheckResult nyquist_semantics(std::uint64_t seed, int draws = 1000);

std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace aoimix::verify
