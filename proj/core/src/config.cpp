#include "aoimix/config.hpp"

#include "aoimix/error.hpp"
#include "aoimix/format.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace aoimix {
namespace {

// Walks every configurable field as (section, key, reference). Loading,
// saving, hashing and key validation all go through this one list.
template <typename V>
void visit_fields(ExperimentConfig& c, V&& v) {
  auto& s = c.system;
  v("system", "devices", s.devices);
  v("system", "rb_count", s.rb_count);
  v("system", "cell_radius_m", s.cell_radius_m);
  v("system", "min_distance_m", s.min_distance_m);
  v("system", "slot_duration_s", s.aoi.slot_duration_s);
  v("system", "device_aoi_cap", s.aoi.device_aoi_cap);
  v("system", "bs_aoi_cap", s.aoi.bs_aoi_cap);

  v("radio", "bandwidth_hz", s.bandwidth_hz);
  v("radio", "tx_power_w", s.cost.tx_power_w);
  v("radio", "noise_dbm", s.noise_dbm);
  v("radio", "pathloss_exponent", s.pathloss_exponent);
  v("radio", "edge_snr_db", s.edge_snr_db);
  v("radio", "payload_bits", s.payload_bits);
  v("radio", "expected_delay_samples", s.expected_delay_samples);
  v("radio", "rayleigh_fading", s.rayleigh_fading);

  v("cost", "gamma_a", s.cost.gamma_a);
  v("cost", "gamma_e", s.cost.gamma_e);
  v("cost", "sampling_cost_j", s.cost.sampling_cost_j);

  auto& d = s.dynamics;
  v("dynamics", "state_dim", d.state_dim);
  v("dynamics", "spectral_radius", d.spectral_radius);
  v("dynamics", "rotation_min", d.rotation_min);
  v("dynamics", "rotation_max", d.rotation_max);
  v("dynamics", "kinds", d.kinds);
  v("dynamics", "tanh_gain", d.tanh_gain);
  v("dynamics", "cubic_coefficient", d.cubic_coefficient);
  v("dynamics", "disturbance_bound", d.disturbance_bound);
  v("dynamics", "min_frequency_hz", d.min_frequency_hz);
  v("dynamics", "initial_state_radius", d.initial_state_radius);

  auto& t = c.trainer;
  v("trainer", "discount", t.discount);
  v("trainer", "epsilon_start", t.epsilon_start);
  v("trainer", "epsilon_end", t.epsilon_end);
  v("trainer", "anneal_fraction", t.anneal_fraction);
  v("trainer", "device_learning_rate", t.device_learning_rate);
  v("trainer", "mixer_learning_rate", t.mixer_learning_rate);
  v("trainer", "momentum", t.momentum);
  v("trainer", "max_gradient_norm", t.max_gradient_norm);
  v("trainer", "replay_capacity", t.replay_capacity);
  v("trainer", "batch_size", t.batch_size);
  v("trainer", "target_sync_period", t.target_sync_period);
  v("trainer", "train_every", t.train_every);
  v("trainer", "device_hidden", t.device_hidden);
  v("trainer", "mixer_hidden", t.mixer_hidden);
  v("trainer", "reward_scope", t.reward_scope);
  v("trainer", "state_value", t.state_value);

  v("experiment", "mode", c.mode);
  v("experiment", "modes", c.modes);
  v("experiment", "seeds", c.seeds);
  v("experiment", "slots", c.slots);
  v("experiment", "eval_slots", c.eval_slots);
  v("experiment", "output_dir", c.output_dir);
}

std::string where(const std::string& source, const YAML::Mark& mark) {
  if (mark.is_null()) return source;
  return source + ":" + std::to_string(mark.line + 1);
}

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seeds share the size_t converters");

// Scalar conversions to and from text.
std::string text_of(int v) { return std::to_string(v); }
std::string text_of(double v) { return format_double(v); }
std::string text_of(bool v) { return v ? "true" : "false"; }
std::string text_of(std::size_t v) { return std::to_string(v); }
std::string text_of(Slot v) { return std::to_string(v); }
std::string text_of(const std::string& v) { return v; }
std::string text_of(NonlinearityKind v) { return to_string(v); }
std::string text_of(TrainerMode v) { return to_string(v); }
std::string text_of(RewardScope v) { return to_string(v); }

void parse_into(const YAML::Node& n, int& out) { out = n.as<int>(); }
void parse_into(const YAML::Node& n, double& out) { out = n.as<double>(); }
void parse_into(const YAML::Node& n, bool& out) { out = n.as<bool>(); }
void parse_into(const YAML::Node& n, std::size_t& out) {
  const auto v = n.as<long long>();
  if (v < 0) throw ConfigError("expected a nonnegative integer");
  out = static_cast<std::size_t>(v);
}
void parse_into(const YAML::Node& n, Slot& out) { out = n.as<Slot>(); }
void parse_into(const YAML::Node& n, std::string& out) { out = n.as<std::string>(); }
void parse_into(const YAML::Node& n, NonlinearityKind& out) {
  try {
    out = parse_nonlinearity_kind(n.as<std::string>());
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}
void parse_into(const YAML::Node& n, TrainerMode& out) {
  out = parse_trainer_mode(n.as<std::string>());
}
void parse_into(const YAML::Node& n, RewardScope& out) {
  out = parse_reward_scope(n.as<std::string>());
}
template <typename T>
void parse_into(const YAML::Node& n, std::vector<T>& out) {
  if (!n.IsSequence()) throw ConfigError("expected a list");
  std::vector<T> values;
  for (const auto& item : n) {
    T value{};
    parse_into(item, value);
    values.push_back(value);
  }
  out = std::move(values);
}

template <typename T>
nlohmann::json json_of(const T& v) {
  if constexpr (std::is_same_v<T, NonlinearityKind> || std::is_same_v<T, TrainerMode> ||
                std::is_same_v<T, RewardScope>) {
    return to_string(v);
  } else {
    return v;
  }
}
template <typename T>
nlohmann::json json_of(const std::vector<T>& v) {
  auto arr = nlohmann::json::array();
  for (const auto& x : v) arr.push_back(json_of(x));
  return arr;
}

template <typename T>
void emit(YAML::Emitter& out, const T& v) {
  out << text_of(v);
}
template <typename T>
void emit(YAML::Emitter& out, const std::vector<T>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (const auto& x : v) out << text_of(x);
  out << YAML::EndSeq;
}

void apply_yaml(ExperimentConfig& cfg, const YAML::Node& root, const std::string& source) {
  if (!root || root.IsNull()) return;
  if (!root.IsMap()) throw ConfigError(where(source, root.Mark()) + ": expected a mapping of sections");

  std::map<std::string, std::set<std::string>> known;
  visit_fields(cfg, [&](const char* sec, const char* key, auto&) { known[sec].insert(key); });
  for (const auto& sec : root) {
    const auto name = sec.first.as<std::string>();
    if (!known.count(name))
      throw ConfigError(where(source, sec.first.Mark()) + ": unknown section '" + name + "'");
    if (sec.second.IsNull()) continue;
    if (!sec.second.IsMap())
      throw ConfigError(where(source, sec.second.Mark()) + ": section '" + name +
                        "' must be a mapping");
    for (const auto& kv : sec.second) {
      const auto key = kv.first.as<std::string>();
      if (!known[name].count(key))
        throw ConfigError(where(source, kv.first.Mark()) + ": unknown key '" + name + "." + key +
                          "'");
    }
  }
  visit_fields(cfg, [&](const char* sec, const char* key, auto& field) {
    const YAML::Node section = root[sec];
    if (!section || !section.IsMap()) return;
    const YAML::Node value = section[key];
    if (!value) return;
    try {
      parse_into(value, field);
    } catch (const YAML::Exception&) {
      throw ConfigError(where(source, value.Mark()) + ": " + sec + "." + key +
                        ": value has the wrong type");
    } catch (const ConfigError& e) {
      throw ConfigError(where(source, value.Mark()) + ": " + sec + "." + key + ": " + e.what());
    }
  });
}

}  // namespace

void ExperimentConfig::validate() const {
  system.validate();
  trainer.validate();
  if (seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  if (modes.empty()) throw ConfigError("experiment.modes must not be empty");
  if (slots < 0 || eval_slots < 0 || eval_slots > slots)
    throw ConfigError("experiment needs 0 <= eval_slots <= slots");
}

EpisodeOptions ExperimentConfig::episode(TrainerMode m, std::uint64_t seed) const {
  EpisodeOptions o;
  o.mode = m;
  o.trainer = trainer;
  o.slots = slots;
  o.eval_slots = eval_slots;
  o.seed = seed;
  return o;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(source, e.mark) + ": " + e.msg);
  }
  ExperimentConfig cfg;
  apply_yaml(cfg, root, source);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::ParserException& e) {
    throw ConfigError("override '" + assignment + "': " + e.msg);
  }
  YAML::Node root;
  root[section][key] = value;
  apply_yaml(cfg, root, "override '" + assignment + "'");
}

std::string to_yaml(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  YAML::Emitter out;
  out << YAML::BeginMap;
  std::string open;
  visit_fields(cfg, [&](const char* sec, const char* key, auto& field) {
    if (open != sec) {
      if (!open.empty()) out << YAML::EndMap;
      out << YAML::Key << sec << YAML::Value << YAML::BeginMap;
      open = sec;
    }
    out << YAML::Key << key << YAML::Value;
    emit(out, field);
  });
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_yaml(cfg);
}

std::string canonical_json(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  nlohmann::json j = nlohmann::json::object();
  visit_fields(cfg, [&](const char* sec, const char* key, auto& field) {
    if (std::string(sec) == "experiment" && std::string(key) == "output_dir") return;
    j[sec][key] = json_of(field);
  });
  return j.dump();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_json(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aoimix
