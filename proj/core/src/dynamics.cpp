#include "aoimix/dynamics.hpp"

#include "aoimix/error.hpp"
#include "aoimix/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace aoimix {

NonlinearityKind kind_of(const Nonlinearity& f) {
  return static_cast<NonlinearityKind>(f.index());
}

std::string to_string(NonlinearityKind kind) {
  switch (kind) {
    case NonlinearityKind::kZero:
      return "zero";
    case NonlinearityKind::kTanh:
      return "tanh";
    case NonlinearityKind::kCubic:
      return "cubic";
  }
  return "?";
}

NonlinearityKind parse_nonlinearity_kind(const std::string& name) {
  if (name == "zero" || name == "linear") return NonlinearityKind::kZero;
  if (name == "tanh") return NonlinearityKind::kTanh;
  if (name == "cubic") return NonlinearityKind::kCubic;
  throw ConfigError("unknown nonlinearity kind '" + name + "' (expected zero, tanh or cubic)");
}

Vector evaluate(const Nonlinearity& f, const Vector& x) {
  struct Visitor {
    const Vector& x;
    Vector operator()(const ZeroMap&) const { return Vector::Zero(x.size()); }
    Vector operator()(const TanhMap& m) const { return m.gain * x.array().tanh().matrix(); }
    Vector operator()(const CubicDamping& m) const {
      return (-m.coefficient * x.array().cube()).matrix();
    }
  };
  return std::visit(Visitor{x}, f);
}

Matrix jacobian_of(const Nonlinearity& f, const Vector& x) {
  struct Visitor {
    const Vector& x;
    Matrix operator()(const ZeroMap&) const { return Matrix::Zero(x.size(), x.size()); }
    Matrix operator()(const TanhMap& m) const {
      const Vector sech2 = (1.0 - x.array().tanh().square()).matrix();
      return m.gain * sech2.asDiagonal();
    }
    Matrix operator()(const CubicDamping& m) const {
      const Vector d = (-3.0 * m.coefficient * x.array().square()).matrix();
      return d.asDiagonal();
    }
  };
  return std::visit(Visitor{x}, f);
}

void validate(const PhysicalProcess& p) {
  const auto d = p.model.a_matrix.rows();
  if (d < 1 || p.model.a_matrix.cols() != d)
    throw ContractViolation("process: A must be a nonempty square matrix");
  if (const auto* t = std::get_if<TanhMap>(&p.model.nonlinearity);
      t && (t->gain.rows() != d || t->gain.cols() != d))
    throw ContractViolation("process: tanh gain must match the state dimension");
  if (p.true_state.size() != d) throw ContractViolation("process: state dimension mismatch");
  if (!(p.disturbance_bound >= 0.0)) throw ContractViolation("process: disturbance bound < 0");
  if (!(p.min_frequency_hz > 0.0)) throw ContractViolation("process: min frequency must be > 0");
  if (evaluate(p.model.nonlinearity, Vector::Zero(d)).cwiseAbs().maxCoeff() != 0.0)
    throw ContractViolation("process: nonlinearity must vanish at zero");
  if (p.latest_sample && p.latest_sample->slot > p.current_slot)
    throw ContractViolation("process: latest sample lies in the future");
}

const Vector& step_process(PhysicalProcess& p, Rng& rng) {
  Vector next = p.model.step(p.true_state);
  if (p.disturbance_bound > 0.0) next += sample_ball(rng, p.dim(), p.disturbance_bound);
  if (!next.allFinite()) {
    throw DivergenceError("process of device " + std::to_string(p.device) +
                          " diverged at slot " + std::to_string(p.current_slot + 1));
  }
  p.true_state = std::move(next);
  ++p.current_slot;
  return p.true_state;
}

Vector estimate_state(const ProcessModel& model, const TimedSample& sample, Slot now) {
  const Slot elapsed = now - sample.slot;
  if (elapsed < 0) throw ContractViolation("estimate_state: sample is newer than the query slot");
  if (elapsed == 0) return sample.state;

  // Noiseless rollout xhat_{s}, xhat_{s+1}, ..., xhat_{now-1}; accumulate
  // sum_{q=1..d} A^{q-1} f(xhat_{now-q}) Horner-style while rolling forward.
  Vector rolled = sample.state;
  Vector forced = evaluate(model.nonlinearity, rolled);
  for (Slot j = 1; j < elapsed; ++j) {
    rolled = model.step(rolled);
    forced = model.a_matrix * forced + evaluate(model.nonlinearity, rolled);
  }
  Vector estimate = matrix_power(model.a_matrix, elapsed) * sample.state + forced;
  if (!estimate.allFinite()) throw DivergenceError("estimate_state: estimate overflowed");
  return estimate;
}

Vector estimate_state(const PhysicalProcess& p, Slot now) {
  if (!p.latest_sample) {
    throw ContractViolation("estimate_state: device " + std::to_string(p.device) +
                            " has no sample yet");
  }
  return estimate_state(p.model, *p.latest_sample, now);
}

Vector estimation_error(const PhysicalProcess& p, Slot now) {
  return estimate_state(p, now) - p.true_state;
}

Matrix jacobian(const ProcessModel& model, const Vector& x) {
  return model.a_matrix + jacobian_of(model.nonlinearity, x);
}

Matrix jacobian(const PhysicalProcess& p, const Vector& x) { return jacobian(p.model, x); }

double variation_frequency(const std::vector<Complex>& spectrum, double error_norm,
                           double disturbance_norm, double min_frequency_hz) {
  double max_imag = 0.0;
  double min_real_sq = spectrum.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (const auto& mu : spectrum) {
    max_imag = std::max(max_imag, std::fabs(mu.imag()));
    min_real_sq = std::min(min_real_sq, mu.real() * mu.real());
  }
  const double energy = (error_norm * error_norm + disturbance_norm * disturbance_norm) /
                        (min_frequency_hz * min_frequency_hz);
  return max_imag + std::sqrt(std::max(0.0, energy - min_real_sq));
}

FrequencyAnalysis frequency_analysis(std::vector<Complex> spectrum, double omega,
                                     double interval_cap) {
  FrequencyAnalysis out;
  out.eigenvalues = std::move(spectrum);
  out.max_variation_frequency = omega;
  if (omega > 0.0) {
    out.max_sampling_interval = std::numbers::pi / omega;
    out.sampling_frequency = omega / std::numbers::pi;
  } else {
    out.max_sampling_interval = interval_cap;
    out.sampling_frequency = 1.0 / interval_cap;
  }
  return out;
}

FrequencyAnalysis max_variation_frequency(const PhysicalProcess& p, Slot now,
                                          double interval_cap) {
  const Vector estimate = estimate_state(p, now);
  const double error_norm = (estimate - p.true_state).norm();
  auto spectrum = eigenvalues(jacobian(p.model, estimate));
  const double omega =
      variation_frequency(spectrum, error_norm, p.disturbance_bound, p.min_frequency_hz);
  return frequency_analysis(std::move(spectrum), omega, interval_cap);
}

}  // namespace aoimix
