#pragma once

#include "aoimix/marl.hpp"
#include "aoimix/simulation.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace aoimix {

/// Everything one experiment needs. Defaults follow the reference system:
/// 20 devices, 10 RBs, 180 kHz per RB, 0.5 W, 0.5 mJ per sample, 1 s slots,
/// -95 dBm noise, xi = 10 Hz, gamma_A = gamma_E = 0.5, AoI caps of 5 s,
/// 10-bit packets and a 100 m cell.
struct ExperimentConfig {
  SystemConfig system;
  TrainerConfig trainer;
  TrainerMode mode = TrainerMode::kQmixPartial;
  std::vector<TrainerMode> modes{TrainerMode::kQmixPartial, TrainerMode::kDqn,
                                 TrainerMode::kUniform};  ///< compared by sweep and pareto
  std::vector<std::uint64_t> seeds{1};
  Slot slots = 20000;
  Slot eval_slots = 5000;
  std::string output_dir = "out";

  void validate() const;
  EpisodeOptions episode(TrainerMode m, std::uint64_t seed) const;
};

/// YAML with sections system, radio, cost, dynamics, trainer, experiment.
/// Omitted keys keep their defaults; unknown keys and bad values raise
/// ConfigError naming the file and line.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<string>");

/// Applies "section.key=value" on top of an existing config (value is parsed
/// as YAML). Used for command-line overrides, which win over the file. Does
/// not validate, so several overrides can be applied before validate().
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

std::string to_yaml(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::string& path);

/// Sorted-key JSON of every field except experiment.output_dir.
std::string canonical_json(const ExperimentConfig& cfg);

/// FNV-1a 64 of canonical_json.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string hash_hex(std::uint64_t h);

}  // namespace aoimix
