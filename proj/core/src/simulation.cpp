#include "aoimix/simulation.hpp"

#include "aoimix/error.hpp"
#include "aoimix/linalg.hpp"
#include "aoimix/selector.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace aoimix {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fold(std::uint64_t& h, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    h ^= (bits >> (8 * i)) & 0xffu;
    h *= kFnvPrime;
  }
}

Matrix rotation_block_matrix(int dim, double radius, double theta) {
  Matrix a = Matrix::Zero(dim, dim);
  int i = 0;
  for (; i + 1 < dim; i += 2) {
    a(i, i) = radius * std::cos(theta);
    a(i, i + 1) = -radius * std::sin(theta);
    a(i + 1, i) = radius * std::sin(theta);
    a(i + 1, i + 1) = radius * std::cos(theta);
  }
  if (i < dim) a(i, i) = radius;
  return a;
}

Nonlinearity make_nonlinearity(const DynamicsCatalog& c, NonlinearityKind kind) {
  switch (kind) {
    case NonlinearityKind::kTanh:
      return TanhMap{c.tanh_gain * Matrix::Identity(c.state_dim, c.state_dim)};
    case NonlinearityKind::kCubic:
      return CubicDamping{c.cubic_coefficient};
    case NonlinearityKind::kZero:
      break;
  }
  return ZeroMap{};
}

}  // namespace

void DynamicsCatalog::validate() const {
  if (state_dim < 1 || state_dim > 16) throw ConfigError("dynamics.state_dim must be in [1, 16]");
  if (!(spectral_radius >= 0.0) || !std::isfinite(spectral_radius))
    throw ConfigError("dynamics.spectral_radius must be finite and nonnegative");
  if (!(rotation_min <= rotation_max)) throw ConfigError("dynamics.rotation_min exceeds rotation_max");
  if (kinds.empty()) throw ConfigError("dynamics.kinds must name at least one nonlinearity");
  if (!(disturbance_bound >= 0.0)) throw ConfigError("dynamics.disturbance_bound must be >= 0");
  if (!(min_frequency_hz > 0.0)) throw ConfigError("dynamics.min_frequency_hz must be positive");
  if (!(initial_state_radius >= 0.0))
    throw ConfigError("dynamics.initial_state_radius must be >= 0");
}

void SystemConfig::validate() const {
  if (devices < 1) throw ConfigError("system.devices must be at least 1");
  if (rb_count < 1) throw ConfigError("system.rb_count must be at least 1");
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(cell_radius_m, "system.cell_radius_m");
  positive(min_distance_m, "system.min_distance_m");
  positive(aoi.slot_duration_s, "system.slot_duration_s");
  positive(aoi.device_aoi_cap, "system.device_aoi_cap");
  positive(aoi.bs_aoi_cap, "system.bs_aoi_cap");
  positive(bandwidth_hz, "radio.bandwidth_hz");
  positive(cost.tx_power_w, "radio.tx_power_w");
  positive(pathloss_exponent, "radio.pathloss_exponent");
  if (!std::isfinite(noise_dbm)) throw ConfigError("radio.noise_dbm must be finite");
  if (!std::isfinite(edge_snr_db)) throw ConfigError("radio.edge_snr_db must be finite");
  if (payload_bits < 1) throw ConfigError("radio.payload_bits must be positive");
  if (expected_delay_samples < 1) throw ConfigError("radio.expected_delay_samples must be positive");
  if (!(cost.gamma_a >= 0.0) || !(cost.gamma_e >= 0.0))
    throw ConfigError("cost weights gamma_a and gamma_e must be nonnegative");
  if (!(cost.gamma_a + cost.gamma_e > 0.0)) throw ConfigError("gamma_a + gamma_e must be positive");
  if (!(cost.sampling_cost_j >= 0.0)) throw ConfigError("cost.sampling_cost_j must be >= 0");
  dynamics.validate();
}

System System::build(const SystemConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng placement = make_rng(seed, Stream::kPlacement);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> distances;
  std::vector<PhysicalProcess> processes;
  const auto& dyn = cfg.dynamics;
  for (int m = 0; m < cfg.devices; ++m) {
    const double radial = unit(placement);
    const double angle = unit(placement);
    distances.push_back(std::max(cfg.min_distance_m, cfg.cell_radius_m * std::sqrt(radial)));
    const double theta = dyn.rotation_min + (dyn.rotation_max - dyn.rotation_min) * angle;

    PhysicalProcess p;
    p.device = m;
    p.model.a_matrix = rotation_block_matrix(dyn.state_dim, dyn.spectral_radius, theta);
    p.model.nonlinearity = make_nonlinearity(dyn, dyn.kinds[m % dyn.kinds.size()]);
    p.disturbance_bound = dyn.disturbance_bound;
    p.min_frequency_hz = dyn.min_frequency_hz;
    Rng init = make_rng(seed, Stream::kInitialState, {static_cast<std::uint64_t>(m)});
    p.true_state = sample_ball(init, dyn.state_dim, dyn.initial_state_radius);
    p.current_slot = 0;
    p.take_sample();
    validate(p);
    processes.push_back(std::move(p));
  }

  RadioModel::Params rp;
  rp.bandwidth_hz = cfg.bandwidth_hz;
  rp.tx_power_w = cfg.cost.tx_power_w;
  rp.noise_w = dbm_to_watts(cfg.noise_dbm);
  rp.rb_count = cfg.rb_count;
  rp.pathloss_exponent = cfg.pathloss_exponent;
  rp.reference_gain = calibrate_reference_gain(rp.tx_power_w, rp.noise_w, cfg.cell_radius_m,
                                               rp.pathloss_exponent, cfg.edge_snr_db);
  rp.slot_duration_s = cfg.aoi.slot_duration_s;
  RadioModel radio(rp, distances, std::vector<int>(cfg.devices, cfg.payload_bits));
  return System{cfg, std::move(processes), std::move(distances), std::move(radio)};
}

EvalSummary summarize(const CostLedger& ledger, Slot from_slot, double slot_duration_s) {
  EvalSummary s;
  s.from_slot = from_slot;
  double cost = 0.0, aoi = 0.0, energy = 0.0, recon = 0.0, queue = 0.0;
  std::uint64_t samples = 0, delivered = 0, device_slots = 0;
  for (const auto& r : ledger.records()) {
    if (r.slot < from_slot) continue;
    ++s.slots;
    cost += weighted_cost(r, ledger.weights());
    for (const auto& d : r.devices) {
      aoi += d.bs_aoi;
      energy += d.energy_j;
      recon += d.recon_err;
      samples += d.sampled;
      ++device_slots;
      if (d.queue_delay_s) {
        queue += *d.queue_delay_s;
        ++delivered;
      }
    }
  }
  if (s.slots == 0) return s;
  const double n = static_cast<double>(s.slots);
  s.weighted_cost = cost / n;
  s.sum_aoi = aoi / n;
  s.sum_energy_j = energy / n;
  s.mean_recon_err = device_slots ? recon / static_cast<double>(device_slots) : 0.0;
  s.mean_queue_delay_s = delivered ? queue / static_cast<double>(delivered) : 0.0;
  s.mean_sample_interval_s = samples ? static_cast<double>(device_slots) * slot_duration_s /
                                           static_cast<double>(samples)
                                     : n * slot_duration_s;
  return s;
}

struct Simulation::Impl {
  System sys;
  EpisodeOptions opt;
  Slot t = 0;
  Slot training_slots = 0;
  int m_count = 0;

  std::vector<DeviceState> devices;
  std::vector<Vector> device_estimate;
  std::vector<Vector> bs_estimate;
  std::vector<double> expected_delay;
  std::vector<Rng> disturbance_rngs;
  std::vector<Rng> fading_rngs;
  std::vector<Rng> explore_rngs;

  std::optional<QmixLearner> qmix;
  std::optional<DqnLearner> dqn;
  UniformPolicy uniform;

  bool have_prev = false;
  Matrix prev_obs;
  std::vector<std::uint8_t> prev_actions;
  BitVector prev_selection;
  Vector prev_rewards;
  double prev_team = 0.0;

  CostLedger ledger;
  std::vector<LossRecord> loss;
  EpisodeCounters counters;
  std::uint64_t fingerprint = kFnvOffset;

  Impl(System s, EpisodeOptions o) : sys(std::move(s)), opt(std::move(o)) {
    opt.trainer.validate();
    if (opt.slots < 0 || opt.eval_slots < 0 || opt.eval_slots > opt.slots)
      throw ConfigError("episode needs 0 <= eval_slots <= slots");
    training_slots = opt.slots - opt.eval_slots;
    m_count = sys.config.devices;
    ledger = CostLedger(sys.config.cost);
    devices.resize(m_count);
    for (int m = 0; m < m_count; ++m) {
      const auto dm = static_cast<std::uint64_t>(m);
      const auto& p = sys.processes[m];
      devices[m].last_sample_slot = 0;
      device_estimate.push_back(p.latest_sample->state);
      bs_estimate.push_back(Vector::Zero(p.dim()));
      disturbance_rngs.push_back(make_rng(opt.seed, Stream::kDisturbance, {dm}));
      fading_rngs.push_back(make_rng(opt.seed, Stream::kFading, {dm}));
      explore_rngs.push_back(make_rng(opt.seed, Stream::kExploration, {dm}));
      // The fading law does not change over time, so one Monte-Carlo
      // estimate per device serves every slot.
      Rng mc = make_rng(opt.seed, Stream::kExpectedDelay, {0, dm});
      expected_delay.push_back(
          sys.config.rayleigh_fading
              ? sys.radio.expected_delay(m, sys.config.expected_delay_samples, mc, Slot{0})
              : sys.radio.expected_delay_uncached(m, 1, mc, true));
    }
    switch (opt.mode) {
      case TrainerMode::kQmixPartial:
      case TrainerMode::kQmixGlobal:
      case TrainerMode::kVdn:
        qmix.emplace(m_count, mix_mode_of(opt.mode), opt.trainer, opt.seed);
        break;
      case TrainerMode::kDqn:
        dqn.emplace(m_count, opt.trainer, opt.seed);
        break;
      case TrainerMode::kUniform:
        break;
    }
    uniform = UniformPolicy::for_load(m_count, sys.config.rb_count);
  }

  const std::vector<DenseNet>* nets() const {
    if (qmix) return &qmix->device_nets();
    if (dqn) return &dqn->device_nets();
    return nullptr;
  }

  void advance_processes() {
    for (int m = 0; m < m_count; ++m) {
      auto& p = sys.processes[m];
      step_process(p, disturbance_rngs[m]);
      device_estimate[m] = p.model.step(device_estimate[m]);
      bs_estimate[m] = p.model.step(bs_estimate[m]);
      if (!device_estimate[m].allFinite() || !bs_estimate[m].allFinite())
        throw DivergenceError("state estimate diverged for device " + std::to_string(m) +
                              " at slot " + std::to_string(t));
    }
  }

  // The joint transition of slot t-1 is completed once slot t's selection is known.
  void store_and_train(const Matrix& obs, const BitVector& selection, double epsilon) {
    if (!have_prev || t > training_slots) return;
    if (qmix) {
      JointTransition tr;
      tr.observations = prev_obs;
      tr.next_observations = obs;
      tr.actions = prev_actions;
      tr.selection = prev_selection;
      tr.next_selection = selection;
      tr.device_rewards = prev_rewards;
      tr.team_reward = prev_team;
      qmix->observe(std::move(tr));
    } else if (dqn) {
      for (int m = 0; m < m_count; ++m)
        dqn->observe(m, Experience{prev_obs.col(m), prev_actions[m], prev_rewards[m], obs.col(m),
                                   prev_selection[m]});
    } else {
      return;
    }
    if (t % opt.trainer.train_every != 0) return;
    std::optional<TrainResult> r = qmix ? qmix->train() : dqn->train();
    if (!r || !r->applied) return;
    const auto& c = qmix ? qmix->counters() : dqn->counters();
    loss.push_back(LossRecord{c.train_steps, r->loss, r->mean_reward, epsilon});
  }

  bool step() {
    if (t >= opt.slots) return false;
    const auto& cfg = sys.config;
    const double tau = cfg.aoi.slot_duration_s;
    if (t > 0) advance_processes();

    // Frequency analysis from each device's own latest sample.
    Matrix obs(DeviceState::kObservationSize, m_count);
    std::vector<double> interval(m_count);
    for (int m = 0; m < m_count; ++m) {
      const auto& p = sys.processes[m];
      const Vector& est = device_estimate[m];
      const double err = (est - p.true_state).norm();
      auto spectrum = eigenvalues(jacobian(p.model, est));
      const double omega =
          variation_frequency(spectrum, err, p.disturbance_bound, p.min_frequency_hz);
      const auto fa = frequency_analysis(std::move(spectrum), omega, cfg.aoi.device_aoi_cap);
      devices[m].sampling_frequency = fa.sampling_frequency;
      interval[m] = fa.max_sampling_interval;
      obs.col(m) = devices[m].observation();
    }

    const bool training = t < training_slots;
    const double epsilon =
        training ? exploitation_probability(opt.trainer, t, training_slots) : 1.0;

    std::vector<std::uint8_t> actions(m_count, 0);
    if (const auto* n = nets()) {
      for (int m = 0; m < m_count; ++m)
        actions[m] = static_cast<std::uint8_t>(act((*n)[m], obs.col(m), epsilon, explore_rngs[m]));
    } else {
      for (int m = 0; m < m_count; ++m) actions[m] = uniform.samples(t) ? 1 : 0;
    }

    // Sampling and device-side AoI.
    for (int m = 0; m < m_count; ++m) {
      auto& d = devices[m];
      auto& p = sys.processes[m];
      if (actions[m]) {
        const double elapsed = static_cast<double>(t - d.last_sample_slot) * tau;
        update_device_aoi(d, true, elapsed, interval[m], cfg.aoi);
        if (d.pending_packet) ++counters.packet_overwrites;
        d.pending_packet = Packet{p.true_state, t};
        d.last_sample_slot = t;
        p.take_sample();
        device_estimate[m] = p.true_state;
        ++counters.samples;
      } else {
        update_device_aoi(d, false, 0.0, interval[m], cfg.aoi);
      }
    }

    // Requests and selection.
    SelectionProblem problem;
    problem.rb_budget = cfg.rb_count;
    for (int m = 0; m < m_count; ++m) {
      const auto& d = devices[m];
      const auto c = coefficients(d.device_aoi, d.bs_aoi, actions[m] != 0, expected_delay[m], tau,
                                  cfg.cost);
      problem.c1.push_back(c.c1);
      problem.c2.push_back(c.c2);
      problem.has_request.push_back(d.pending_packet ? 1 : 0);
    }
    const BitVector selection = select(problem);
    store_and_train(obs, selection, epsilon);

    if (cfg.rayleigh_fading) {
      sys.radio.draw_fading(fading_rngs);
    } else {
      for (int m = 0; m < m_count; ++m) sys.radio.set_fading(m, 1.0);
    }

    SlotRecord record;
    record.slot = t;
    Vector rewards(m_count);
    for (int m = 0; m < m_count; ++m) {
      auto& d = devices[m];
      const auto& p = sys.processes[m];
      fold(fingerprint, sys.radio.fading(m));
      for (Eigen::Index i = 0; i < p.true_state.size(); ++i) fold(fingerprint, p.true_state[i]);

      const bool u = selection[m] != 0;
      const auto delay = sys.radio.delay(m, u);
      update_bs_aoi(d, u, d.device_aoi, delay, cfg.aoi);
      DeviceSlotRecord rec;
      rec.device = m;
      rec.phi = d.device_aoi;
      rec.bs_aoi = d.bs_aoi;
      rec.energy_j = slot_energy(actions[m] != 0, u, delay.value_or(0.0), cfg.cost);
      rec.sampled = actions[m];
      rec.selected = selection[m];
      if (u) {
        const Packet& pkt = *d.pending_packet;
        rec.queue_delay_s = queue_delay(pkt.generated, t, tau);
        bs_estimate[m] = estimate_state(p.model, TimedSample{pkt.state, pkt.generated}, t);
        d.pending_packet.reset();
        ++counters.deliveries;
      }
      rec.recon_err = (bs_estimate[m] - p.true_state).norm();
      rewards[m] = reward(rec.bs_aoi, rec.energy_j, cfg.cost);
      d.last_sample_action = actions[m];
      d.last_selection = selection[m];
      record.devices.push_back(rec);
    }
    ledger.append(std::move(record));

    prev_obs = std::move(obs);
    prev_actions = std::move(actions);
    prev_selection = selection;
    prev_rewards = rewards;
    prev_team = team_reward(rewards, selection, opt.trainer.reward_scope);
    have_prev = true;
    ++t;
    return true;
  }
};

Simulation::Simulation(System system, EpisodeOptions options)
    : impl_(std::make_unique<Impl>(std::move(system), std::move(options))) {}
Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;

bool Simulation::step() { return impl_->step(); }
void Simulation::run() {
  while (impl_->step()) {
  }
}
Slot Simulation::current_slot() const { return impl_->t; }
const System& Simulation::system() const { return impl_->sys; }
const std::vector<DeviceState>& Simulation::devices() const { return impl_->devices; }
const CostLedger& Simulation::ledger() const { return impl_->ledger; }

EpisodeResult Simulation::finish() {
  auto& s = *impl_;
  EpisodeResult r;
  r.eval = summarize(s.ledger, s.training_slots, s.sys.config.aoi.slot_duration_s);
  r.counters = s.counters;
  r.counters.delay_truncations = s.sys.radio.truncation_count();
  if (s.qmix) {
    const auto& c = s.qmix->counters();
    r.counters.train_steps = c.train_steps;
    r.counters.skipped_updates = c.skipped_steps;
    r.counters.target_syncs = c.target_syncs;
    r.device_nets = s.qmix->device_nets();
    r.mixer = s.qmix->mixer();
  } else if (s.dqn) {
    const auto& c = s.dqn->counters();
    r.counters.train_steps = c.train_steps;
    r.counters.skipped_updates = c.skipped_steps;
    r.counters.target_syncs = c.target_syncs;
    r.device_nets = s.dqn->device_nets();
  }
  r.env_fingerprint = s.fingerprint;
  r.ledger = std::move(s.ledger);
  r.loss = std::move(s.loss);
  return r;
}

EpisodeResult run_episode(const SystemConfig& cfg, const EpisodeOptions& options) {
  Simulation sim(System::build(cfg, options.seed), options);
  sim.run();
  return sim.finish();
}

}  // namespace aoimix
