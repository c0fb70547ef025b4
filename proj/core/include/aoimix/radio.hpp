#pragma once

#include "aoimix/random.hpp"
#include "aoimix/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace aoimix {

/// 10^((dBm - 30) / 10).
double dbm_to_watts(double dbm);

/// Reference gain at 1 m that puts the median SNR at `distance_m` at
/// `target_snr_db`, for unit-mean exponential fading (median ln 2).
double calibrate_reference_gain(double tx_power_w, double noise_w, double distance_m,
                                double pathloss_exponent, double target_snr_db);

/// OFDMA uplink with power-law path loss and Rayleigh (unit-mean exponential
/// power) fading. One RB per selected device.
class RadioModel {
 public:
  struct Params {
    double bandwidth_hz = 180e3;
    double tx_power_w = 0.5;
    double noise_w = dbm_to_watts(-95.0);
    int rb_count = 10;
    double pathloss_exponent = 3.0;
    double reference_gain = 1.0;
    double slot_duration_s = 1.0;  ///< delay truncation cap
  };

  RadioModel(Params params, std::vector<double> distances_m, std::vector<int> payload_bits);

  const Params& params() const { return params_; }
  std::size_t device_count() const { return distances_.size(); }
  double distance(std::size_t m) const { return distances_.at(m); }
  int payload_bits(std::size_t m) const { return payload_bits_.at(m); }
  double fading(std::size_t m) const { return fading_.at(m); }
  double path_gain(std::size_t m) const;

  /// h = reference_gain * d^-alpha * g.
  double channel_gain(std::size_t m) const { return path_gain(m) * fading_.at(m); }

  /// One fresh g per device, each from its own stream.
  void draw_fading(std::vector<Rng>& per_device_rngs);
  void draw_fading(Rng& rng);
  void set_fading(std::size_t m, double g);

  /// Shannon rate with the given channel gain; 0 when not selected.
  double rate_with_gain(double channel_gain, bool selected) const;
  double rate(std::size_t m, bool selected) const {
    return rate_with_gain(channel_gain(m), selected);
  }

  /// Z/rate for a selected device, capped at the slot duration (each cap
  /// increments truncation_count). nullopt when not selected.
  std::optional<double> delay(std::size_t m, bool selected);
  std::optional<double> delay_with_gain(std::size_t m, double channel_gain, bool selected);

  /// Monte-Carlo mean delay over fresh fading draws (cap applied per draw,
  /// not counted). Cached per (device, slot).
  double expected_delay(std::size_t m, int mc_samples, Rng& rng, Slot slot);

  /// Uncached variant; `degenerate_fading` pins g = 1.
  double expected_delay_uncached(std::size_t m, int mc_samples, Rng& rng,
                                 bool degenerate_fading = false) const;

  std::uint64_t truncation_count() const { return truncations_; }

 private:
  double capped_delay(std::size_t m, double channel_gain) const;

  Params params_;
  std::vector<double> distances_;
  std::vector<int> payload_bits_;
  std::vector<double> fading_;
  std::map<std::pair<std::size_t, Slot>, double> expected_cache_;
  std::uint64_t truncations_ = 0;
};

}  // namespace aoimix
