#pragma once

#include "aoimix/dynamics.hpp"
#include "aoimix/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace aoimix {

struct AoiParams {
  double slot_duration_s = 1.0;  ///< tau
  double device_aoi_cap = 5.0;   ///< phi_max
  double bs_aoi_cap = 5.0;       ///< Phi_max
};

struct CostWeights {
  double gamma_a = 0.5;
  double gamma_e = 0.5;
  double sampling_cost_j = 0.5e-3;  ///< C_S
  double tx_power_w = 0.5;          ///< P_T
};

struct Packet {
  Vector state;
  Slot generated = 0;
};

/// Per-device AoI bookkeeping; also the source of the local observation
/// o_m = [phi, F, s_{t-1}, u_{t-1}].
struct DeviceState {
  double device_aoi = 0.0;          ///< phi
  double bs_aoi = 0.0;              ///< Phi
  double sampling_frequency = 0.0;  ///< F, copied from the frequency analysis
  std::uint8_t last_sample_action = 0;
  std::uint8_t last_selection = 0;
  std::optional<Packet> pending_packet;  ///< one-deep queue
  Slot last_sample_slot = 0;

  static constexpr int kObservationSize = 4;
  Vector observation() const;
};

/// phi update. Sampled: max(0, elapsed - Delta). Otherwise min(phi + tau, phi_max).
double update_device_aoi(DeviceState& d, bool sampled, double elapsed_s, double max_interval_s,
                         const AoiParams& params);

/// Phi update. Selected: phi + delay. Otherwise min(Phi + tau, Phi_max).
double update_bs_aoi(DeviceState& d, bool selected, double device_aoi,
                     std::optional<double> delay_s, const AoiParams& params);

/// s*C_S + P_T*l*[u = 1].
double slot_energy(bool sampled, bool selected, double delay_s, const CostWeights& weights);

/// Seconds a packet spent queued before upload.
double queue_delay(Slot generated, Slot uploaded, double slot_duration_s);

/// |xhat - x| per device, where xhat rolls each BS-held sample forward to `now`.
std::vector<double> reconstruction_error(const std::vector<PhysicalProcess>& processes,
                                         const std::vector<TimedSample>& bs_samples, Slot now);

struct DeviceSlotRecord {
  int device = 0;
  double phi = 0.0;
  double bs_aoi = 0.0;
  double energy_j = 0.0;
  std::optional<double> queue_delay_s;  ///< set only when a packet was delivered
  double recon_err = 0.0;
  std::uint8_t sampled = 0;
  std::uint8_t selected = 0;
};

struct SlotRecord {
  Slot slot = 0;
  std::vector<DeviceSlotRecord> devices;
};

/// Append-only per-slot ledger with running averages of the sum AoI and the
/// sum energy.
class CostLedger {
 public:
  CostLedger() = default;
  explicit CostLedger(CostWeights weights) : weights_(weights) {}

  const CostWeights& weights() const { return weights_; }
  void append(SlotRecord record);

  const std::vector<SlotRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }

  double sum_aoi_running() const { return sum_aoi_running_; }
  double sum_energy_running() const { return sum_energy_running_; }
  double weighted_running() const {
    return weights_.gamma_a * sum_aoi_running_ + weights_.gamma_e * sum_energy_running_;
  }

  /// gamma_A * sum Phi + gamma_E * sum e for the record with this slot.
  double weighted_cost(Slot slot) const;

  /// Columns: slot,device,phi,Phi,energy_j,queue_delay_s,recon_err.
  /// An empty queue_delay_s field means nothing was delivered that slot.
  void write_csv(std::ostream& out) const;
  void write_csv(const std::string& path) const;
  static CostLedger read_csv(std::istream& in, CostWeights weights);

  static const char* csv_header();

 private:
  CostWeights weights_;
  std::vector<SlotRecord> records_;
  double sum_aoi_running_ = 0.0;
  double sum_energy_running_ = 0.0;
};

double weighted_cost(const SlotRecord& record, const CostWeights& weights);

}  // namespace aoimix
