#pragma once

#include "aoimix/metrics.hpp"
#include "aoimix/neural.hpp"
#include "aoimix/random.hpp"
#include "aoimix/replay.hpp"
#include "aoimix/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aoimix {

/// Which device Q values enter Q_tot.
///   partial: selected devices only; global: all devices; vdn: selected
///   devices with w = 1, b = 0.
enum class MixMode { kPartial, kGlobal, kVdn };

enum class TrainerMode { kQmixPartial, kQmixGlobal, kVdn, kDqn, kUniform };

/// Devices whose per-slot reward is summed into the team reward.
enum class RewardScope { kSelected, kAll };

std::string to_string(MixMode m);
std::string to_string(TrainerMode m);
std::string to_string(RewardScope s);
TrainerMode parse_trainer_mode(const std::string& name);
RewardScope parse_reward_scope(const std::string& name);
bool is_learning(TrainerMode m);
MixMode mix_mode_of(TrainerMode m);

struct TrainerConfig {
  double discount = 0.9;
  /// Exploitation probability: act greedily with probability epsilon.
  double epsilon_start = 0.05;
  double epsilon_end = 0.95;
  double anneal_fraction = 0.5;  ///< share of the training slots spent annealing
  double device_learning_rate = 1e-3;
  double mixer_learning_rate = 1e-3;
  double momentum = 0.0;
  double max_gradient_norm = 0.0;  ///< per network; 0 disables clipping
  std::size_t replay_capacity = 10000;
  std::size_t batch_size = 64;
  int target_sync_period = 200;  ///< train steps between hard target syncs
  int train_every = 1;           ///< slots between train steps
  std::vector<int> device_hidden{64, 64};
  int mixer_hidden = 32;
  RewardScope reward_scope = RewardScope::kAll;
  /// Adds an unmasked state-value term V(s) to Q_tot (not used in vdn mode).
  bool state_value = true;

  void validate() const;
};

/// Linear schedule from epsilon_start to epsilon_end over the first
/// anneal_fraction of `training_slots`, constant afterwards.
double exploitation_probability(const TrainerConfig& cfg, Slot slot, Slot training_slots);

/// Greedy action with ties going to 0 (do not sample).
int greedy_action(const Vector& q_values);

/// With probability epsilon the greedy action, otherwise a uniform draw from {0, 1}.
int act(const DenseNet& q_net, const Vector& observation, double epsilon, Rng& rng);

/// -(gamma_A * Phi + gamma_E * e).
double reward(double bs_aoi, double energy_j, const CostWeights& weights);

/// Sum of per-device rewards under the given scope.
double team_reward(const Vector& device_rewards, const BitVector& selection, RewardScope scope);

/// Device network layout: observation -> hidden relu layers -> one Q per action.
std::vector<LayerSpec> device_net_specs(const std::vector<int>& hidden);

/// State-conditioned linear mixer. Q_tot = sum_m u_m (w_m(s) Q_m + b_m(s)),
/// with w = |hyper_w(s)| so that Q_tot is monotone in every Q_m. With
/// `state_value` a term V(s) that ignores the mask is added, so Q_tot can be
/// nonzero in slots where no device is selected.
class MixingNetwork {
 public:
  MixingNetwork() = default;
  MixingNetwork(int devices, int state_size, int hidden, MixMode mode, Rng& rng,
                bool state_value = false);

  MixMode mode() const { return mode_; }
  int devices() const { return devices_; }
  int state_size() const { return state_size_; }

  DenseNet hyper_w;
  DenseNet hyper_b;
  std::optional<DenseNet> hyper_v;

  bool has_state_value() const { return hyper_v.has_value(); }
  double state_value(const Vector& global_state) const;

  struct Coefficients {
    Vector w;
    Vector b;
  };
  Coefficients coefficients(const Vector& global_state) const;

  /// The mask actually applied: all ones in global mode, `selection` otherwise.
  BitVector effective_mask(const BitVector& selection) const;

  /// Q_tot. Q values of unselected devices are ignored and may be NaN; a
  /// non-finite Q for a device in the mask is a contract violation.
  double mix(const Vector& q_values, const BitVector& selection, const Vector& global_state) const;

 private:
  MixMode mode_ = MixMode::kPartial;
  int devices_ = 0;
  int state_size_ = 0;
};

/// Concatenation of the per-device observations (device-major).
Vector global_state(const Matrix& observations);

/// R + discount * max_a' Q_tot(o', a'), evaluated per device because the
/// mixing weights are nonnegative. `next_observations` is obs_size x M.
double td_target(const MixingNetwork& target_mixer, const std::vector<DenseNet>& target_nets,
                 double reward, const Matrix& next_observations, const BitVector& mask,
                 double discount);

/// One slot of joint experience; observations are obs_size x M.
struct JointTransition {
  Matrix observations;
  Matrix next_observations;
  std::vector<std::uint8_t> actions;
  BitVector selection;
  /// Selection made in the next slot; masks the bootstrap term in partial mode.
  BitVector next_selection;
  Vector device_rewards;
  double team_reward = 0.0;
};

/// One device's own experience, used by the independent DQN baseline.
struct Experience {
  Vector observation;
  int action = 0;
  double reward = 0.0;
  Vector next_observation;
  std::uint8_t selected = 0;
};

struct TrainResult {
  double loss = 0.0;
  double mean_reward = 0.0;
  bool applied = false;
};

struct LearnerCounters {
  std::uint64_t train_steps = 0;
  std::uint64_t skipped_steps = 0;    ///< non-finite loss or gradients
  std::uint64_t target_syncs = 0;
};

/// Per-device Q networks trained through a shared mixing network on joint
/// transitions.
class QmixLearner {
 public:
  QmixLearner(int devices, MixMode mode, TrainerConfig cfg, std::uint64_t seed);

  int devices() const { return static_cast<int>(nets_.size()); }
  const TrainerConfig& config() const { return cfg_; }
  const DenseNet& device_net(int m) const { return nets_.at(m); }
  DenseNet& device_net(int m) { return nets_.at(m); }
  const std::vector<DenseNet>& device_nets() const { return nets_; }
  const MixingNetwork& mixer() const { return mixer_; }
  MixingNetwork& mixer() { return mixer_; }
  const LearnerCounters& counters() const { return counters_; }
  std::size_t buffer_size() const { return buffer_.size(); }

  void observe(JointTransition t);

  /// Samples a batch and trains when the buffer is full enough.
  std::optional<TrainResult> train();

  /// One gradient step on the given transitions.
  TrainResult train_step(const std::vector<const JointTransition*>& batch);

  void sync_targets();

 private:
  TrainerConfig cfg_;
  std::vector<DenseNet> nets_;
  std::vector<DenseNet> target_nets_;
  std::vector<SgdOptimizer> device_opt_;
  MixingNetwork mixer_;
  MixingNetwork target_mixer_;
  SgdOptimizer hyper_w_opt_;
  SgdOptimizer hyper_b_opt_;
  SgdOptimizer hyper_v_opt_;
  ReplayBuffer<JointTransition> buffer_;
  Rng replay_rng_;
  LearnerCounters counters_;
};

/// Independent per-device DQNs, each trained on its own reward.
class DqnLearner {
 public:
  DqnLearner(int devices, TrainerConfig cfg, std::uint64_t seed);

  int devices() const { return static_cast<int>(nets_.size()); }
  const DenseNet& device_net(int m) const { return nets_.at(m); }
  DenseNet& device_net(int m) { return nets_.at(m); }
  const std::vector<DenseNet>& device_nets() const { return nets_; }
  const LearnerCounters& counters() const { return counters_; }

  void observe(int device, Experience e);

  /// Trains every device whose buffer is full enough; the reported loss and
  /// reward are means over the devices that trained.
  std::optional<TrainResult> train();

  TrainResult train_step(int device, const std::vector<const Experience*>& batch);

  void sync_targets();

 private:
  TrainerConfig cfg_;
  std::vector<DenseNet> nets_;
  std::vector<DenseNet> target_nets_;
  std::vector<SgdOptimizer> opt_;
  std::vector<ReplayBuffer<Experience>> buffers_;
  std::vector<Rng> replay_rngs_;
  LearnerCounters counters_;
};

/// Every device samples when slot % period == 0, period = ceil(M / I).
struct UniformPolicy {
  int period = 1;
  static UniformPolicy for_load(int devices, int rb_count);
  bool samples(Slot slot) const { return slot % period == 0; }
};

}  // namespace aoimix
