#include "aoimix/radio.hpp"

#include "aoimix/error.hpp"

#include <cmath>

namespace aoimix {

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double calibrate_reference_gain(double tx_power_w, double noise_w, double distance_m,
                                double pathloss_exponent, double target_snr_db) {
  const double snr = std::pow(10.0, target_snr_db / 10.0);
  return snr * noise_w * std::pow(distance_m, pathloss_exponent) / (tx_power_w * std::log(2.0));
}

RadioModel::RadioModel(Params params, std::vector<double> distances_m,
                       std::vector<int> payload_bits)
    : params_(params),
      distances_(std::move(distances_m)),
      payload_bits_(std::move(payload_bits)),
      fading_(distances_.size(), 1.0) {
  if (payload_bits_.size() != distances_.size())
    throw ContractViolation("radio: payload and distance lists differ in length");
  if (!(params_.bandwidth_hz > 0 && params_.tx_power_w > 0 && params_.noise_w > 0 &&
        params_.reference_gain > 0 && params_.pathloss_exponent > 0 &&
        params_.slot_duration_s > 0 && params_.rb_count >= 1))
    throw ContractViolation("radio: powers, gains, bandwidth and RB count must be positive");
  for (double d : distances_)
    if (!(d > 0)) throw ContractViolation("radio: device distances must be positive");
  for (int z : payload_bits_)
    if (z <= 0) throw ContractViolation("radio: payload sizes must be positive");
}

double RadioModel::path_gain(std::size_t m) const {
  return params_.reference_gain * std::pow(distances_.at(m), -params_.pathloss_exponent);
}

void RadioModel::draw_fading(std::vector<Rng>& per_device_rngs) {
  if (per_device_rngs.size() != fading_.size())
    throw ContractViolation("radio: one fading stream per device required");
  std::exponential_distribution<double> unit_mean(1.0);
  for (std::size_t m = 0; m < fading_.size(); ++m) {
    double g = 0.0;
    while (g <= 0.0) g = unit_mean(per_device_rngs[m]);
    fading_[m] = g;
  }
}

void RadioModel::draw_fading(Rng& rng) {
  std::exponential_distribution<double> unit_mean(1.0);
  for (auto& g : fading_) {
    g = 0.0;
    while (g <= 0.0) g = unit_mean(rng);
  }
}

void RadioModel::set_fading(std::size_t m, double g) {
  if (!(g > 0.0)) throw ContractViolation("radio: fading must be positive");
  fading_.at(m) = g;
}

double RadioModel::rate_with_gain(double channel_gain, bool selected) const {
  if (!selected) return 0.0;
  return params_.bandwidth_hz *
         std::log2(1.0 + params_.tx_power_w * channel_gain / params_.noise_w);
}

double RadioModel::capped_delay(std::size_t m, double channel_gain) const {
  const double r = rate_with_gain(channel_gain, true);
  const double l = r > 0.0 ? payload_bits_[m] / r : params_.slot_duration_s;
  return std::min(l, params_.slot_duration_s);
}

std::optional<double> RadioModel::delay_with_gain(std::size_t m, double channel_gain,
                                                  bool selected) {
  if (!selected) return std::nullopt;
  const double r = rate_with_gain(channel_gain, true);
  if (!(r > 0.0) || payload_bits_.at(m) / r > params_.slot_duration_s) {
    ++truncations_;
    return params_.slot_duration_s;
  }
  return payload_bits_[m] / r;
}

std::optional<double> RadioModel::delay(std::size_t m, bool selected) {
  return delay_with_gain(m, channel_gain(m), selected);
}

double RadioModel::expected_delay_uncached(std::size_t m, int mc_samples, Rng& rng,
                                           bool degenerate_fading) const {
  if (mc_samples < 1) throw ContractViolation("expected_delay: need at least one sample");
  const double pg = path_gain(m);
  if (degenerate_fading) return capped_delay(m, pg);
  std::exponential_distribution<double> unit_mean(1.0);
  double sum = 0.0;
  for (int i = 0; i < mc_samples; ++i) sum += capped_delay(m, pg * unit_mean(rng));
  return sum / mc_samples;
}

double RadioModel::expected_delay(std::size_t m, int mc_samples, Rng& rng, Slot slot) {
  const auto key = std::make_pair(m, slot);
  if (auto it = expected_cache_.find(key); it != expected_cache_.end()) return it->second;
  const double value = expected_delay_uncached(m, mc_samples, rng);
  expected_cache_.emplace(key, value);
  return value;
}

}  // namespace aoimix
