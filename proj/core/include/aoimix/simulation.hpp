#pragma once

#include "aoimix/dynamics.hpp"
#include "aoimix/marl.hpp"
#include "aoimix/metrics.hpp"
#include "aoimix/radio.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace aoimix {

/// Recipe for the per-device processes. Device m gets
/// A = spectral_radius * R(theta_m) on each 2x2 diagonal block (plain
/// spectral_radius on an odd trailing entry), theta_m drawn uniformly from
/// [rotation_min, rotation_max], and nonlinearity kinds[m % kinds.size()].
struct DynamicsCatalog {
  int state_dim = 2;
  double spectral_radius = 0.95;
  double rotation_min = 0.6;
  double rotation_max = 1.2;
  std::vector<NonlinearityKind> kinds{NonlinearityKind::kTanh, NonlinearityKind::kCubic,
                                      NonlinearityKind::kZero};
  double tanh_gain = 0.1;           ///< B = tanh_gain * I
  double cubic_coefficient = 0.2;
  double disturbance_bound = 0.05;
  double min_frequency_hz = 10.0;   ///< xi
  double initial_state_radius = 1.0;

  void validate() const;
};

struct SystemConfig {
  int devices = 20;
  int rb_count = 10;
  double cell_radius_m = 100.0;
  double min_distance_m = 1.0;  ///< placement floor; keeps d^-alpha bounded
  AoiParams aoi;
  CostWeights cost;
  double bandwidth_hz = 180e3;
  double noise_dbm = -95.0;
  double pathloss_exponent = 3.0;
  double edge_snr_db = 20.0;  ///< median SNR at the cell edge
  int payload_bits = 10;
  int expected_delay_samples = 4096;
  bool rayleigh_fading = true;  ///< false pins g = 1
  DynamicsCatalog dynamics;

  void validate() const;
};

/// Processes, radio and device placement for one seed.
struct System {
  SystemConfig config;
  std::vector<PhysicalProcess> processes;
  std::vector<double> distances_m;
  RadioModel radio;

  static System build(const SystemConfig& cfg, std::uint64_t seed);
};

struct LossRecord {
  std::uint64_t iteration = 0;
  double loss = 0.0;
  double mean_reward = 0.0;
  double epsilon = 0.0;
};

struct EpisodeOptions {
  TrainerMode mode = TrainerMode::kQmixPartial;
  TrainerConfig trainer;
  Slot slots = 20000;      ///< total, evaluation included
  Slot eval_slots = 5000;  ///< trailing greedy slots without training
  std::uint64_t seed = 1;
};

struct EpisodeCounters {
  std::uint64_t delay_truncations = 0;
  std::uint64_t packet_overwrites = 0;
  std::uint64_t samples = 0;
  std::uint64_t deliveries = 0;
  std::uint64_t train_steps = 0;
  std::uint64_t skipped_updates = 0;
  std::uint64_t target_syncs = 0;
};

/// Per-slot means over an evaluation window.
struct EvalSummary {
  Slot from_slot = 0;
  Slot slots = 0;
  double weighted_cost = 0.0;
  double sum_aoi = 0.0;
  double sum_energy_j = 0.0;
  double mean_sample_interval_s = 0.0;  ///< window length when nothing was sampled
  double mean_queue_delay_s = 0.0;      ///< 0 when nothing was delivered
  double mean_recon_err = 0.0;
};

/// Window summary recomputed from ledger records with slot >= from_slot.
EvalSummary summarize(const CostLedger& ledger, Slot from_slot, double slot_duration_s);

struct EpisodeResult {
  CostLedger ledger;
  std::vector<LossRecord> loss;
  EvalSummary eval;
  EpisodeCounters counters;
  /// Hash of every disturbance-driven state and fading draw. Equal across
  /// trainer modes for one seed.
  std::uint64_t env_fingerprint = 0;
  std::vector<DenseNet> device_nets;  ///< empty for the uniform policy
  std::optional<MixingNetwork> mixer;
};

/// Slot-by-slot driver. Each slot: advance processes, frequency analysis,
/// sampling decisions, requests and selection, transmission, AoI and energy
/// update, experience storage and training.
class Simulation {
 public:
  Simulation(System system, EpisodeOptions options);
  ~Simulation();
  Simulation(Simulation&&) noexcept;

  /// Runs one slot. Returns false once the slot budget is spent.
  bool step();
  void run();

  Slot current_slot() const;
  const System& system() const;
  const std::vector<DeviceState>& devices() const;
  const CostLedger& ledger() const;

  /// Moves results out; call after run().
  EpisodeResult finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Builds the system for options.seed and runs the whole episode.
EpisodeResult run_episode(const SystemConfig& cfg, const EpisodeOptions& options);

}  // namespace aoimix
