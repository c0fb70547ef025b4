#include "aoimix/metrics.hpp"

#include "aoimix/error.hpp"
#include "aoimix/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace aoimix {

Vector DeviceState::observation() const {
  Vector o(kObservationSize);
  o << device_aoi, sampling_frequency, static_cast<double>(last_sample_action),
      static_cast<double>(last_selection);
  return o;
}

double update_device_aoi(DeviceState& d, bool sampled, double elapsed_s, double max_interval_s,
                         const AoiParams& params) {
  if (sampled) {
    if (elapsed_s < 0.0) throw ContractViolation("update_device_aoi: negative elapsed time");
    if (!(max_interval_s > 0.0))
      throw ContractViolation("update_device_aoi: sampling interval must be positive");
    d.device_aoi = std::max(0.0, elapsed_s - max_interval_s);
  } else {
    d.device_aoi = std::min(d.device_aoi + params.slot_duration_s, params.device_aoi_cap);
  }
  return d.device_aoi;
}

double update_bs_aoi(DeviceState& d, bool selected, double device_aoi,
                     std::optional<double> delay_s, const AoiParams& params) {
  if (selected) {
    if (!delay_s || !std::isfinite(*delay_s))
      throw ContractViolation("update_bs_aoi: selected device needs a finite delay");
    d.bs_aoi = device_aoi + *delay_s;
  } else {
    d.bs_aoi = std::min(d.bs_aoi + params.slot_duration_s, params.bs_aoi_cap);
  }
  return d.bs_aoi;
}

double slot_energy(bool sampled, bool selected, double delay_s, const CostWeights& weights) {
  const double sampling = sampled ? weights.sampling_cost_j : 0.0;
  const double transmit = selected ? weights.tx_power_w * delay_s : 0.0;
  return sampling + transmit;
}

double queue_delay(Slot generated, Slot uploaded, double slot_duration_s) {
  if (uploaded < generated) throw ContractViolation("queue_delay: upload precedes generation");
  return static_cast<double>(uploaded - generated) * slot_duration_s;
}

std::vector<double> reconstruction_error(const std::vector<PhysicalProcess>& processes,
                                         const std::vector<TimedSample>& bs_samples, Slot now) {
  if (processes.size() != bs_samples.size())
    throw ContractViolation("reconstruction_error: one BS sample per process required");
  std::vector<double> out(processes.size());
  for (std::size_t m = 0; m < processes.size(); ++m) {
    const Vector estimate = estimate_state(processes[m].model, bs_samples[m], now);
    out[m] = (estimate - processes[m].true_state).norm();
  }
  return out;
}

double weighted_cost(const SlotRecord& record, const CostWeights& weights) {
  double aoi = 0.0;
  double energy = 0.0;
  for (const auto& d : record.devices) {
    aoi += d.bs_aoi;
    energy += d.energy_j;
  }
  return weights.gamma_a * aoi + weights.gamma_e * energy;
}

void CostLedger::append(SlotRecord record) {
  if (!records_.empty() && record.slot <= records_.back().slot)
    throw ContractViolation("ledger: slots must be appended in increasing order");
  double aoi = 0.0;
  double energy = 0.0;
  for (const auto& d : record.devices) {
    aoi += d.bs_aoi;
    energy += d.energy_j;
  }
  records_.push_back(std::move(record));
  const double n = static_cast<double>(records_.size());
  sum_aoi_running_ += (aoi - sum_aoi_running_) / n;
  sum_energy_running_ += (energy - sum_energy_running_) / n;
}

double CostLedger::weighted_cost(Slot slot) const {
  auto it = std::lower_bound(records_.begin(), records_.end(), slot,
                             [](const SlotRecord& r, Slot s) { return r.slot < s; });
  if (it == records_.end() || it->slot != slot)
    throw ContractViolation("ledger: slot " + std::to_string(slot) + " not recorded");
  return aoimix::weighted_cost(*it, weights_);
}

const char* CostLedger::csv_header() {
  return "slot,device,phi,Phi,energy_j,queue_delay_s,recon_err";
}

void CostLedger::write_csv(std::ostream& out) const {
  out << csv_header() << '\n';
  for (const auto& r : records_) {
    for (const auto& d : r.devices) {
      out << r.slot << ',' << d.device << ',' << format_double(d.phi) << ','
          << format_double(d.bs_aoi) << ',' << format_double(d.energy_j) << ',';
      if (d.queue_delay_s) out << format_double(*d.queue_delay_s);
      out << ',' << format_double(d.recon_err) << '\n';
    }
  }
}

void CostLedger::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_csv(out);
}

CostLedger CostLedger::read_csv(std::istream& in, CostWeights weights) {
  std::string line;
  if (!std::getline(in, line) || line != csv_header())
    throw ContractViolation("ledger csv: unexpected header");
  CostLedger ledger(weights);
  SlotRecord current;
  bool have = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 7)
      throw ContractViolation("ledger csv line " + std::to_string(line_no) + ": expected 7 fields");
    const Slot slot = std::stoll(fields[0]);
    if (have && slot != current.slot) {
      ledger.append(std::move(current));
      current = SlotRecord{};
    }
    current.slot = slot;
    have = true;
    DeviceSlotRecord d;
    d.device = std::stoi(fields[1]);
    d.phi = parse_double(fields[2]);
    d.bs_aoi = parse_double(fields[3]);
    d.energy_j = parse_double(fields[4]);
    if (!fields[5].empty()) d.queue_delay_s = parse_double(fields[5]);
    d.recon_err = parse_double(fields[6]);
    current.devices.push_back(d);
  }
  if (have) ledger.append(std::move(current));
  return ledger;
}

}  // namespace aoimix
