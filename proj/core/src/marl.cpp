#include "aoimix/marl.hpp"

#include "aoimix/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aoimix {
namespace {

constexpr int kActions = 2;

// Global-norm clipping on one network's gradients.
void clip(Gradients& g, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& w : g.weight) sq += w.squaredNorm();
  for (const auto& b : g.bias) sq += b.squaredNorm();
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double scale = max_norm / norm;
  for (auto& w : g.weight) w *= scale;
  for (auto& b : g.bias) b *= scale;
}

Matrix gather_observations(const std::vector<const JointTransition*>& batch, int device,
                           bool next) {
  const auto& first = next ? batch.front()->next_observations : batch.front()->observations;
  Matrix out(first.rows(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& src = next ? batch[b]->next_observations : batch[b]->observations;
    out.col(static_cast<Eigen::Index>(b)) = src.col(device);
  }
  return out;
}

Matrix gather_states(const std::vector<const JointTransition*>& batch, bool next) {
  const auto& first = next ? batch.front()->next_observations : batch.front()->observations;
  Matrix out(first.size(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b)
    out.col(static_cast<Eigen::Index>(b)) =
        global_state(next ? batch[b]->next_observations : batch[b]->observations);
  return out;
}

}  // namespace

std::string to_string(MixMode m) {
  switch (m) {
    case MixMode::kPartial:
      return "partial";
    case MixMode::kGlobal:
      return "global";
    case MixMode::kVdn:
      return "vdn";
  }
  return "?";
}

std::string to_string(TrainerMode m) {
  switch (m) {
    case TrainerMode::kQmixPartial:
      return "qmix_partial";
    case TrainerMode::kQmixGlobal:
      return "qmix_global";
    case TrainerMode::kVdn:
      return "vdn";
    case TrainerMode::kDqn:
      return "dqn";
    case TrainerMode::kUniform:
      return "uniform";
  }
  return "?";
}

std::string to_string(RewardScope s) {
  return s == RewardScope::kSelected ? "selected" : "all";
}

TrainerMode parse_trainer_mode(const std::string& name) {
  for (auto m : {TrainerMode::kQmixPartial, TrainerMode::kQmixGlobal, TrainerMode::kVdn,
                 TrainerMode::kDqn, TrainerMode::kUniform})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown trainer mode '" + name +
                    "' (expected qmix_partial, qmix_global, vdn, dqn or uniform)");
}

RewardScope parse_reward_scope(const std::string& name) {
  if (name == "selected") return RewardScope::kSelected;
  if (name == "all") return RewardScope::kAll;
  throw ConfigError("unknown reward scope '" + name + "' (expected selected or all)");
}

bool is_learning(TrainerMode m) { return m != TrainerMode::kUniform; }

MixMode mix_mode_of(TrainerMode m) {
  switch (m) {
    case TrainerMode::kQmixGlobal:
      return MixMode::kGlobal;
    case TrainerMode::kVdn:
      return MixMode::kVdn;
    default:
      return MixMode::kPartial;
  }
}

void TrainerConfig::validate() const {
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("trainer.discount must be in [0, 1)");
  for (double e : {epsilon_start, epsilon_end})
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("trainer epsilon values must be in [0, 1]");
  if (!(anneal_fraction >= 0.0 && anneal_fraction <= 1.0))
    throw ConfigError("trainer.anneal_fraction must be in [0, 1]");
  if (!(device_learning_rate >= 0.0) || !(mixer_learning_rate >= 0.0))
    throw ConfigError("trainer learning rates must be nonnegative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("trainer.momentum must be in [0, 1)");
  if (!(max_gradient_norm >= 0.0)) throw ConfigError("trainer.max_gradient_norm must be >= 0");
  if (replay_capacity < 1 || batch_size < 1 || batch_size > replay_capacity)
    throw ConfigError("trainer needs 1 <= batch_size <= replay_capacity");
  if (target_sync_period < 1 || train_every < 1)
    throw ConfigError("trainer.target_sync_period and trainer.train_every must be positive");
  if (mixer_hidden < 1) throw ConfigError("trainer.mixer_hidden must be positive");
  for (int h : device_hidden)
    if (h < 1) throw ConfigError("trainer.device_hidden entries must be positive");
}

double exploitation_probability(const TrainerConfig& cfg, Slot slot, Slot training_slots) {
  const double span = cfg.anneal_fraction * static_cast<double>(training_slots);
  if (span <= 0.0 || static_cast<double>(slot) >= span) return cfg.epsilon_end;
  const double frac = static_cast<double>(slot) / span;
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

int greedy_action(const Vector& q_values) {
  if (q_values.size() != kActions) throw ContractViolation("greedy_action: expected two Q values");
  return q_values[1] > q_values[0] ? 1 : 0;
}

int act(const DenseNet& q_net, const Vector& observation, double epsilon, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double draw = unit(rng);
  const int random_action = std::uniform_int_distribution<int>(0, kActions - 1)(rng);
  if (draw < epsilon) return greedy_action(q_net.forward(observation));
  return random_action;
}

double reward(double bs_aoi, double energy_j, const CostWeights& weights) {
  return -(weights.gamma_a * bs_aoi + weights.gamma_e * energy_j);
}

double team_reward(const Vector& device_rewards, const BitVector& selection, RewardScope scope) {
  if (static_cast<std::size_t>(device_rewards.size()) != selection.size())
    throw ContractViolation("team_reward: reward and selection lengths differ");
  double total = 0.0;
  for (std::size_t m = 0; m < selection.size(); ++m)
    if (scope == RewardScope::kAll || selection[m]) total += device_rewards[m];
  return total;
}

std::vector<LayerSpec> device_net_specs(const std::vector<int>& hidden) {
  std::vector<LayerSpec> specs;
  int in = DeviceState::kObservationSize;
  for (int h : hidden) {
    specs.push_back({in, h, Activation::kRelu});
    in = h;
  }
  specs.push_back({in, kActions, Activation::kIdentity});
  return specs;
}

MixingNetwork::MixingNetwork(int devices, int state_size, int hidden, MixMode mode, Rng& rng,
                             bool state_value)
    : mode_(mode), devices_(devices), state_size_(state_size) {
  if (devices < 1 || state_size < 1 || hidden < 1)
    throw ContractViolation("mixing network: sizes must be positive");
  hyper_w = DenseNet({{state_size, hidden, Activation::kRelu},
                      {hidden, devices, Activation::kAbsolute}},
                     rng);
  hyper_b = DenseNet({{state_size, hidden, Activation::kRelu},
                      {hidden, devices, Activation::kIdentity}},
                     rng);
  if (state_value && mode != MixMode::kVdn)
    hyper_v = DenseNet({{state_size, hidden, Activation::kRelu},
                        {hidden, 1, Activation::kIdentity}},
                       rng);
}

double MixingNetwork::state_value(const Vector& global_state) const {
  return hyper_v ? hyper_v->forward(global_state)[0] : 0.0;
}

MixingNetwork::Coefficients MixingNetwork::coefficients(const Vector& global_state) const {
  if (mode_ == MixMode::kVdn) return {Vector::Ones(devices_), Vector::Zero(devices_)};
  return {hyper_w.forward(global_state), hyper_b.forward(global_state)};
}

BitVector MixingNetwork::effective_mask(const BitVector& selection) const {
  if (selection.size() != static_cast<std::size_t>(devices_))
    throw ContractViolation("mixing network: selection length differs from device count");
  if (mode_ == MixMode::kGlobal) return BitVector(selection.size(), 1);
  return selection;
}

double MixingNetwork::mix(const Vector& q_values, const BitVector& selection,
                          const Vector& global_state) const {
  if (q_values.size() != devices_)
    throw ContractViolation("mix: expected one Q value per device");
  const BitVector mask = effective_mask(selection);
  const auto c = coefficients(global_state);
  double total = 0.0;
  for (int m = 0; m < devices_; ++m) {
    if (!mask[m]) continue;
    if (!std::isfinite(q_values[m]))
      throw ContractViolation("mix: missing Q value for device " + std::to_string(m));
    total += c.w[m] * q_values[m] + c.b[m];
  }
  return total + state_value(global_state);
}

Vector global_state(const Matrix& observations) {
  return Eigen::Map<const Vector>(observations.data(), observations.size());
}

double td_target(const MixingNetwork& target_mixer, const std::vector<DenseNet>& target_nets,
                 double reward, const Matrix& next_observations, const BitVector& mask,
                 double discount) {
  if (discount == 0.0) return reward;
  const int m_count = target_mixer.devices();
  if (static_cast<int>(target_nets.size()) != m_count || next_observations.cols() != m_count)
    throw ContractViolation("td_target: device count mismatch");
  Vector best = Vector::Constant(m_count, std::numeric_limits<double>::quiet_NaN());
  const BitVector eff = target_mixer.effective_mask(mask);
  for (int m = 0; m < m_count; ++m)
    if (eff[m]) best[m] = target_nets[m].forward(next_observations.col(m)).maxCoeff();
  return reward + discount * target_mixer.mix(best, mask, global_state(next_observations));
}

QmixLearner::QmixLearner(int devices, MixMode mode, TrainerConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      hyper_w_opt_(cfg_.mixer_learning_rate, cfg_.momentum),
      hyper_b_opt_(cfg_.mixer_learning_rate, cfg_.momentum),
      hyper_v_opt_(cfg_.mixer_learning_rate, cfg_.momentum),
      buffer_(cfg_.replay_capacity),
      replay_rng_(make_rng(seed, Stream::kReplay)) {
  cfg_.validate();
  if (devices < 1) throw ContractViolation("qmix: need at least one device");
  const auto specs = device_net_specs(cfg_.device_hidden);
  for (int m = 0; m < devices; ++m) {
    Rng rng = make_rng(seed, Stream::kInit, {static_cast<std::uint64_t>(m)});
    nets_.emplace_back(specs, rng);
    device_opt_.emplace_back(cfg_.device_learning_rate, cfg_.momentum);
  }
  Rng mix_rng = make_rng(seed, Stream::kInit, {1u << 20});
  mixer_ = MixingNetwork(devices, devices * DeviceState::kObservationSize, cfg_.mixer_hidden, mode,
                         mix_rng, cfg_.state_value);
  sync_targets();
  counters_.target_syncs = 0;
}

void QmixLearner::sync_targets() {
  target_nets_ = nets_;
  target_mixer_ = mixer_;
  ++counters_.target_syncs;
}

void QmixLearner::observe(JointTransition t) {
  if (t.observations.cols() != devices() || t.next_observations.cols() != devices() ||
      t.actions.size() != static_cast<std::size_t>(devices()) ||
      t.selection.size() != static_cast<std::size_t>(devices()) ||
      t.next_selection.size() != static_cast<std::size_t>(devices()))
    throw ContractViolation("qmix observe: transition does not match the device count");
  buffer_.push(std::move(t));
}

std::optional<TrainResult> QmixLearner::train() {
  const auto idx = buffer_.sample_indices(cfg_.batch_size, replay_rng_);
  if (idx.empty()) return std::nullopt;
  std::vector<const JointTransition*> batch;
  batch.reserve(idx.size());
  for (auto i : idx) batch.push_back(&buffer_[i]);
  return train_step(batch);
}

TrainResult QmixLearner::train_step(const std::vector<const JointTransition*>& batch) {
  TrainResult result;
  if (batch.empty()) return result;
  const int m_count = devices();
  const auto n = static_cast<Eigen::Index>(batch.size());
  const double gamma = cfg_.discount;
  const MixMode mode = mixer_.mode();

  Matrix mask(m_count, n), next_mask(m_count, n);
  Vector rewards(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& t = *batch[b];
    for (int m = 0; m < m_count; ++m) {
      const bool all = mode == MixMode::kGlobal;
      mask(m, b) = (all || t.selection[m]) ? 1.0 : 0.0;
      next_mask(m, b) = (all || t.next_selection[m]) ? 1.0 : 0.0;
    }
    rewards[b] = t.team_reward;
  }

  // Online per-device Q at the taken action.
  std::vector<ForwardCache> caches(m_count);
  Matrix q_taken(m_count, n);
  for (int m = 0; m < m_count; ++m) {
    const Matrix q = nets_[m].forward_batch(gather_observations(batch, m, false), &caches[m]);
    for (Eigen::Index b = 0; b < n; ++b) q_taken(m, b) = q(batch[b]->actions[m], b);
  }

  // Target: per-device max of the target nets.
  Matrix q_next(m_count, n);
  for (int m = 0; m < m_count; ++m)
    q_next.row(m) =
        target_nets_[m].forward_batch(gather_observations(batch, m, true)).colwise().maxCoeff();

  Matrix w, bias, w_next, bias_next;
  Vector value = Vector::Zero(n), value_next = Vector::Zero(n);
  ForwardCache cache_w, cache_b, cache_v;
  if (mode == MixMode::kVdn) {
    w = Matrix::Ones(m_count, n);
    bias = Matrix::Zero(m_count, n);
    w_next = w;
    bias_next = bias;
  } else {
    const Matrix states = gather_states(batch, false);
    const Matrix next_states = gather_states(batch, true);
    w = mixer_.hyper_w.forward_batch(states, &cache_w);
    bias = mixer_.hyper_b.forward_batch(states, &cache_b);
    w_next = target_mixer_.hyper_w.forward_batch(next_states);
    bias_next = target_mixer_.hyper_b.forward_batch(next_states);
    if (mixer_.hyper_v) {
      value = mixer_.hyper_v->forward_batch(states, &cache_v).row(0).transpose();
      value_next = target_mixer_.hyper_v->forward_batch(next_states).row(0).transpose();
    }
  }

  const Vector q_tot = (mask.array() * (w.array() * q_taken.array() + bias.array()))
                           .colwise()
                           .sum()
                           .transpose()
                           .matrix() +
                       value;
  const Vector next_tot =
      (next_mask.array() * (w_next.array() * q_next.array() + bias_next.array()))
          .colwise()
          .sum()
          .transpose()
          .matrix() +
      value_next;
  const Vector target = rewards + gamma * next_tot;
  const Vector td = q_tot - target;
  result.loss = td.squaredNorm() / static_cast<double>(n);
  result.mean_reward = rewards.mean();
  if (!std::isfinite(result.loss)) {
    ++counters_.skipped_steps;
    return result;
  }

  // dL/dQ_tot per sample.
  const Vector g = td * (2.0 / static_cast<double>(n));
  const Matrix gm = mask.array().rowwise() * g.transpose().array();  // g_b * u_mb

  std::vector<Gradients> device_grads(m_count);
  std::vector<bool> touched(m_count, false);
  for (int m = 0; m < m_count; ++m) {
    if (mask.row(m).isZero(0.0)) continue;
    Matrix upstream = Matrix::Zero(kActions, n);
    for (Eigen::Index b = 0; b < n; ++b) upstream(batch[b]->actions[m], b) = gm(m, b) * w(m, b);
    device_grads[m] = nets_[m].backward(caches[m], upstream);
    clip(device_grads[m], cfg_.max_gradient_norm);
    touched[m] = true;
  }

  Gradients gw, gb, gv;
  const bool mixer_trains = mode != MixMode::kVdn;
  const bool value_trains = mixer_trains && mixer_.hyper_v.has_value();
  if (mixer_trains) {
    const Matrix dw = gm.array() * q_taken.array();
    gw = mixer_.hyper_w.backward(cache_w, dw);
    gb = mixer_.hyper_b.backward(cache_b, gm);
    clip(gw, cfg_.max_gradient_norm);
    clip(gb, cfg_.max_gradient_norm);
  }
  if (value_trains) {
    gv = mixer_.hyper_v->backward(cache_v, g.transpose());
    clip(gv, cfg_.max_gradient_norm);
  }

  bool finite = true;
  for (int m = 0; m < m_count; ++m)
    if (touched[m] && !device_grads[m].all_finite()) finite = false;
  if (mixer_trains && (!gw.all_finite() || !gb.all_finite())) finite = false;
  if (value_trains && !gv.all_finite()) finite = false;
  if (!finite) {
    ++counters_.skipped_steps;
    return result;
  }

  // Devices outside the mask in every sample get no update at all.
  for (int m = 0; m < m_count; ++m)
    if (touched[m]) device_opt_[m].step(nets_[m], device_grads[m]);
  if (mixer_trains) {
    hyper_w_opt_.step(mixer_.hyper_w, gw);
    hyper_b_opt_.step(mixer_.hyper_b, gb);
  }
  if (value_trains) hyper_v_opt_.step(*mixer_.hyper_v, gv);
  result.applied = true;
  ++counters_.train_steps;
  if (counters_.train_steps % static_cast<std::uint64_t>(cfg_.target_sync_period) == 0)
    sync_targets();
  return result;
}

DqnLearner::DqnLearner(int devices, TrainerConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (devices < 1) throw ContractViolation("dqn: need at least one device");
  const auto specs = device_net_specs(cfg_.device_hidden);
  for (int m = 0; m < devices; ++m) {
    const auto dm = static_cast<std::uint64_t>(m);
    Rng rng = make_rng(seed, Stream::kInit, {dm});
    nets_.emplace_back(specs, rng);
    opt_.emplace_back(cfg_.device_learning_rate, cfg_.momentum);
    buffers_.emplace_back(cfg_.replay_capacity);
    replay_rngs_.push_back(make_rng(seed, Stream::kReplay, {dm}));
  }
  sync_targets();
  counters_.target_syncs = 0;
}

void DqnLearner::sync_targets() {
  target_nets_ = nets_;
  ++counters_.target_syncs;
}

void DqnLearner::observe(int device, Experience e) {
  if (e.action < 0 || e.action >= kActions) throw ContractViolation("dqn observe: bad action");
  if (!std::isfinite(e.reward)) throw ContractViolation("dqn observe: non-finite reward");
  buffers_.at(device).push(std::move(e));
}

std::optional<TrainResult> DqnLearner::train() {
  double loss = 0.0;
  double rew = 0.0;
  int trained = 0;
  for (int m = 0; m < devices(); ++m) {
    const auto idx = buffers_[m].sample_indices(cfg_.batch_size, replay_rngs_[m]);
    if (idx.empty()) continue;
    std::vector<const Experience*> batch;
    batch.reserve(idx.size());
    for (auto i : idx) batch.push_back(&buffers_[m][i]);
    const auto r = train_step(m, batch);
    loss += r.loss;
    rew += r.mean_reward;
    ++trained;
  }
  if (trained == 0) return std::nullopt;
  ++counters_.train_steps;
  if (counters_.train_steps % static_cast<std::uint64_t>(cfg_.target_sync_period) == 0)
    sync_targets();
  return TrainResult{loss / trained, rew / trained, true};
}

TrainResult DqnLearner::train_step(int device, const std::vector<const Experience*>& batch) {
  TrainResult result;
  if (batch.empty()) return result;
  const auto n = static_cast<Eigen::Index>(batch.size());
  const int obs = DeviceState::kObservationSize;
  Matrix x(obs, n), x_next(obs, n);
  Vector r(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    x.col(b) = batch[b]->observation;
    x_next.col(b) = batch[b]->next_observation;
    r[b] = batch[b]->reward;
  }
  ForwardCache cache;
  auto& net = nets_.at(device);
  const Matrix q = net.forward_batch(x, &cache);
  const Vector best_next = target_nets_.at(device).forward_batch(x_next).colwise().maxCoeff();
  Matrix upstream = Matrix::Zero(kActions, n);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < n; ++b) {
    const double td = q(batch[b]->action, b) - (r[b] + cfg_.discount * best_next[b]);
    loss += td * td;
    upstream(batch[b]->action, b) = 2.0 * td / static_cast<double>(n);
  }
  result.loss = loss / static_cast<double>(n);
  result.mean_reward = r.mean();
  if (!std::isfinite(result.loss)) {
    ++counters_.skipped_steps;
    return result;
  }
  Gradients g = net.backward(cache, upstream);
  clip(g, cfg_.max_gradient_norm);
  result.applied = opt_.at(device).step(net, g);
  if (!result.applied) ++counters_.skipped_steps;
  return result;
}

UniformPolicy UniformPolicy::for_load(int devices, int rb_count) {
  if (devices < 1 || rb_count < 1) throw ContractViolation("uniform policy: sizes must be positive");
  return UniformPolicy{(devices + rb_count - 1) / rb_count};
}

}  // namespace aoimix
