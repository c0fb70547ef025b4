#pragma once

#include "aoimix/random.hpp"
#include "aoimix/types.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace aoimix {

// Nonlinear maps f with f(0) = 0 and closed-form Jacobians.

struct ZeroMap {};

/// f(x) = gain * tanh(x), elementwise tanh.
struct TanhMap {
  Matrix gain;
};

/// f(x) = -coefficient * x^3, elementwise.
struct CubicDamping {
  double coefficient = 0.0;
};

using Nonlinearity = std::variant<ZeroMap, TanhMap, CubicDamping>;

enum class NonlinearityKind { kZero, kTanh, kCubic };

NonlinearityKind kind_of(const Nonlinearity& f);
std::string to_string(NonlinearityKind kind);
NonlinearityKind parse_nonlinearity_kind(const std::string& name);

Vector evaluate(const Nonlinearity& f, const Vector& x);
Matrix jacobian_of(const Nonlinearity& f, const Vector& x);

/// Deterministic part of the process: x' = A x + f(x).
struct ProcessModel {
  Matrix a_matrix;
  Nonlinearity nonlinearity = ZeroMap{};

  Eigen::Index dim() const { return a_matrix.rows(); }
  Vector step(const Vector& x) const { return a_matrix * x + evaluate(nonlinearity, x); }
};

/// A state vector observed at a given slot.
struct TimedSample {
  Vector state;
  Slot slot = 0;
};

/// One monitored nonlinear process plus the device's latest sample of it.
struct PhysicalProcess {
  ProcessModel model;
  double disturbance_bound = 0.0;
  double min_frequency_hz = 10.0;  ///< xi_m
  Vector true_state;
  Slot current_slot = 0;
  std::optional<TimedSample> latest_sample;
  int device = 0;  ///< used in error messages only

  Eigen::Index dim() const { return model.dim(); }

  /// Records the current true state as the latest sample.
  void take_sample() { latest_sample = TimedSample{true_state, current_slot}; }
};

/// Throws ContractViolation unless shapes chain, f(0) = 0 and the bound is
/// nonnegative.
void validate(const PhysicalProcess& p);

/// Advances one slot: x <- A x + f(x) + eps, eps uniform in the disturbance ball.
/// Throws DivergenceError naming device and slot if the state stops being finite.
const Vector& step_process(PhysicalProcess& p, Rng& rng);

/// Noiseless estimate of the state at `now` from `sample`:
/// A^d x_s + sum_{q=1..d} A^{q-1} f(xhat_{now-q}), with the intermediate states
/// taken from the noiseless forward rollout of the sample.
Vector estimate_state(const ProcessModel& model, const TimedSample& sample, Slot now);

/// Estimate from the process's own latest sample.
Vector estimate_state(const PhysicalProcess& p, Slot now);

/// xhat - x at the process's current slot.
Vector estimation_error(const PhysicalProcess& p, Slot now);

/// A + J_f(x).
Matrix jacobian(const PhysicalProcess& p, const Vector& x);
Matrix jacobian(const ProcessModel& model, const Vector& x);

struct FrequencyAnalysis {
  std::vector<Complex> eigenvalues;
  double max_variation_frequency = 0.0;  ///< Omega, rad/s
  double sampling_frequency = 0.0;       ///< F = Omega / pi, Hz
  double max_sampling_interval = 0.0;    ///< Delta = pi / Omega, s
};

/// Omega from a spectrum and the error energy:
/// max|Im mu| + sqrt(max(0, (|y|^2 + |eps|^2)/xi^2 - min (Re mu)^2)).
double variation_frequency(const std::vector<Complex>& spectrum, double error_norm,
                           double disturbance_norm, double min_frequency_hz);

/// Completes Omega into (F, Delta). Omega == 0 maps to Delta = interval_cap.
FrequencyAnalysis frequency_analysis(std::vector<Complex> spectrum, double omega,
                                     double interval_cap);

/// Full pipeline at slot `now`: estimate, error, Jacobian at the estimate,
/// eigenvalues, Omega, F and Delta. The disturbance bound stands in for the
/// unobservable realized disturbance norm.
FrequencyAnalysis max_variation_frequency(const PhysicalProcess& p, Slot now,
                                          double interval_cap);

}  // namespace aoimix
