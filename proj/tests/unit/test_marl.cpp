#include <doctest.h>

#include "helpers.hpp"

#include <aoimix/error.hpp>
#include <aoimix/marl.hpp>

#include <cmath>

using namespace aoimix;

namespace {

constexpr int kObs = DeviceState::kObservationSize;

// A device net whose output ignores the input.
DenseNet constant_net(double q0, double q1) {
  Vector b(2);
  b << q0, q1;
  return DenseNet({DenseLayer{Matrix::Zero(2, kObs), b, Activation::kIdentity}});
}

TrainerConfig small_config() {
  TrainerConfig c;
  c.device_hidden = {};
  c.mixer_hidden = 8;
  c.batch_size = 1;
  c.replay_capacity = 16;
  c.discount = 0.0;
  c.device_learning_rate = 0.05;
  c.mixer_learning_rate = 0.05;
  c.state_value = false;
  return c;
}

JointTransition transition(int m, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  JointTransition t;
  t.observations = Matrix(kObs, m);
  t.next_observations = Matrix(kObs, m);
  for (int r = 0; r < kObs; ++r)
    for (int c = 0; c < m; ++c) {
      t.observations(r, c) = u(rng);
      t.next_observations(r, c) = u(rng);
    }
  t.actions.assign(m, 0);
  for (int c = 0; c < m; ++c) t.actions[c] = static_cast<std::uint8_t>(c % 2);
  t.selection.assign(m, 1);
  t.next_selection.assign(m, 1);
  t.device_rewards = Vector::Constant(m, -1.0);
  t.team_reward = -1.0 * m;
  return t;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("exploitation schedule") {
  TrainerConfig c;
  CHECK(exploitation_probability(c, 0, 1000) == 0.05);
  CHECK(exploitation_probability(c, 250, 1000) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(exploitation_probability(c, 500, 1000) == 0.95);
  CHECK(exploitation_probability(c, 900, 1000) == 0.95);
}

TEST_CASE("acting") {
  const DenseNet net = constant_net(3.0, 5.0);
  const Vector o = Vector::Zero(kObs);
  SUBCASE("pure exploitation is greedy") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) CHECK(act(net, o, 1.0, rng) == 1);
  }
  SUBCASE("pure exploration is a fair coin") {
    Rng rng(2);
    const int n = 10000;
    int ones = 0;
    for (int i = 0; i < n; ++i) ones += act(net, o, 0.0, rng);
    CHECK(std::abs(ones - n / 2.0) < 3 * std::sqrt(n * 0.25));
  }
  SUBCASE("half exploitation picks the greedy action three times in four") {
    Rng rng(3);
    const int n = 100000;
    int greedy = 0;
    for (int i = 0; i < n; ++i) greedy += act(net, o, 0.5, rng);
    const double p = 0.5 + 0.5 * 0.5;
    CHECK(std::abs(greedy - n * p) < 3 * std::sqrt(n * p * (1 - p)));
  }
  SUBCASE("ties do not sample") { CHECK(greedy_action(Vector::Constant(2, 1.0)) == 0); }
}

TEST_CASE("rewards") {
  CostWeights w;
  CHECK(reward(0.0, 0.0, w) == 0.0);
  CHECK(reward(2.0, 0.001, w) == doctest::Approx(-1.0005).epsilon(1e-15));
  Vector r(3);
  r << -1.0, -2.0, -4.0;
  CHECK(team_reward(r, {1, 0, 1}, RewardScope::kSelected) == -5.0);
  CHECK(team_reward(r, {1, 0, 1}, RewardScope::kAll) == -7.0);
  CHECK_THROWS_AS(team_reward(r, {1, 0}, RewardScope::kAll), ContractViolation);
}

TEST_CASE("mixing") {
  Rng rng(4);
  const int m = 3;
  MixingNetwork mixer(m, m * kObs, 16, MixMode::kPartial, rng);
  const Vector s = Vector::Random(m * kObs);
  SUBCASE("empty selection mixes to zero") {
    CHECK(mixer.mix(Vector::Random(m), {0, 0, 0}, s) == 0.0);
  }
  SUBCASE("unselected Q values may be NaN") {
    Vector q = Vector::Random(m);
    const double ref = mixer.mix(q, {1, 0, 1}, s);
    q[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK(mixer.mix(q, {1, 0, 1}, s) == ref);
    CHECK_THROWS_AS(mixer.mix(q, {1, 1, 1}, s), ContractViolation);
  }
  SUBCASE("vdn sums") {
    MixingNetwork vdn(2, 2 * kObs, 4, MixMode::kVdn, rng);
    CHECK(vdn.mix(Vector((Vector(2) << 2.0, 3.0).finished()), {1, 1}, Vector::Zero(2 * kObs)) == 5.0);
  }
  SUBCASE("hand evaluation from coefficients") {
    const auto c = mixer.coefficients(s);
    const Vector q = Vector::Random(m);
    const double expect = c.w[0] * q[0] + c.b[0] + c.w[2] * q[2] + c.b[2];
    CHECK(testing::rel_err(mixer.mix(q, {1, 0, 1}, s), expect) < 1e-14);
    CHECK((c.w.array() >= 0).all());
  }
  SUBCASE("global mode ignores the selection") {
    Rng r2(4);
    MixingNetwork global(m, m * kObs, 16, MixMode::kGlobal, r2);
    const Vector q = Vector::Random(m);
    CHECK(global.mix(q, {0, 0, 0}, s) == global.mix(q, {1, 1, 1}, s));
  }
  SUBCASE("state value is added regardless of the mask") {
    Rng r3(5);
    MixingNetwork with_v(m, m * kObs, 16, MixMode::kPartial, r3, true);
    CHECK(with_v.mix(Vector::Random(m), {0, 0, 0}, s) == with_v.state_value(s));
  }
}

TEST_CASE("mixing is monotone in every selected Q") {
  Rng rng(6);
  for (int probe = 0; probe < 200; ++probe) {
    MixingNetwork mixer(4, 4 * kObs, 8, MixMode::kPartial, rng, probe % 2 == 0);
    const Vector s = Vector::Random(4 * kObs) * 3;
    const Vector q = Vector::Random(4) * 5;
    const BitVector u{1, 1, 0, 1};
    for (int i = 0; i < 4; ++i) {
      if (!u[i]) continue;
      Vector qp = q, qm = q;
      qp[i] += 1e-6;
      qm[i] -= 1e-6;
      CHECK((mixer.mix(qp, u, s) - mixer.mix(qm, u, s)) / 2e-6 >= -1e-9);
    }
  }
}

TEST_CASE("td target") {
  Rng rng(7);
  const Matrix next = Matrix::Random(kObs, 2);
  SUBCASE("no discount returns the reward") {
    MixingNetwork mixer(2, 2 * kObs, 8, MixMode::kPartial, rng);
    std::vector<DenseNet> nets{constant_net(1, 2), constant_net(3, 4)};
    CHECK(td_target(mixer, nets, -1.25, next, {1, 1}, 0.0) == -1.25);
  }
  SUBCASE("single device vdn is the DQN target") {
    MixingNetwork mixer(1, kObs, 8, MixMode::kVdn, rng);
    std::vector<DenseNet> nets{constant_net(-0.5, 1.5)};
    CHECK(td_target(mixer, nets, -1.0, next.col(0), {1}, 0.9) ==
          doctest::Approx(-1.0 + 0.9 * 1.5).epsilon(1e-15));
  }
  SUBCASE("decomposed max equals the joint max over four joint actions") {
    for (int probe = 0; probe < 100; ++probe) {
      MixingNetwork mixer(2, 2 * kObs, 8, MixMode::kPartial, rng);
      std::uniform_real_distribution<double> u(-3, 3);
      std::vector<DenseNet> nets{constant_net(u(rng), u(rng)), constant_net(u(rng), u(rng))};
      const Vector s = global_state(next);
      double joint = -std::numeric_limits<double>::infinity();
      for (int a0 = 0; a0 < 2; ++a0)
        for (int a1 = 0; a1 < 2; ++a1) {
          Vector q(2);
          q << nets[0].forward(next.col(0))[a0], nets[1].forward(next.col(1))[a1];
          joint = std::max(joint, mixer.mix(q, {1, 1}, s));
        }
      CHECK(td_target(mixer, nets, 0.0, next, {1, 1}, 0.5) ==
            doctest::Approx(0.5 * joint).epsilon(1e-14));
    }
  }
}

TEST_CASE("global state is device-major") {
  Matrix o(kObs, 2);
  o << 1, 5, 2, 6, 3, 7, 4, 8;
  const Vector s = global_state(o);
  for (int i = 0; i < 8; ++i) CHECK(s[i] == i + 1);
}

TEST_CASE("qmix training step") {
  Rng data(9);
  SUBCASE("zero TD error leaves parameters in place") {
    QmixLearner learner(3, MixMode::kPartial, small_config(), 1);
    JointTransition t = transition(3, data);
    Vector q(3);
    for (int m = 0; m < 3; ++m) q[m] = learner.device_net(m).forward(t.observations.col(m))[t.actions[m]];
    t.team_reward = learner.mixer().mix(q, t.selection, global_state(t.observations));
    std::vector<std::vector<double>> before;
    for (int m = 0; m < 3; ++m) before.push_back(learner.device_net(m).flatten());
    const auto w_before = learner.mixer().hyper_w.flatten();
    const auto r = learner.train_step({&t});
    CHECK(r.loss < 1e-28);
    for (int m = 0; m < 3; ++m) CHECK(max_abs_diff(learner.device_net(m).flatten(), before[m]) < 1e-15);
    CHECK(max_abs_diff(learner.mixer().hyper_w.flatten(), w_before) < 1e-15);
  }
  SUBCASE("an unselected device is not updated") {
    QmixLearner learner(3, MixMode::kPartial, small_config(), 2);
    std::vector<JointTransition> batch;
    for (int i = 0; i < 8; ++i) {
      batch.push_back(transition(3, data));
      batch.back().selection = {1, 0, 1};
      batch.back().team_reward = -3.0 - i;
    }
    std::vector<const JointTransition*> ptrs;
    for (auto& t : batch) ptrs.push_back(&t);
    const auto frozen = learner.device_net(1).flatten();
    const auto moved = learner.device_net(0).flatten();
    CHECK(learner.train_step(ptrs).applied);
    CHECK(learner.device_net(1).flatten() == frozen);
    CHECK(learner.device_net(0).flatten() != moved);
  }
  SUBCASE("single transition matches the hand chain rule") {
    TrainerConfig cfg = small_config();
    QmixLearner learner(2, MixMode::kPartial, cfg, 3);
    JointTransition t = transition(2, data);
    t.actions = {1, 0};
    t.selection = {1, 1};
    const Vector s = global_state(t.observations);
    const auto coef = learner.mixer().coefficients(s);
    Vector q(2);
    for (int m = 0; m < 2; ++m) q[m] = learner.device_net(m).forward(t.observations.col(m))[t.actions[m]];
    const double delta = learner.mixer().mix(q, t.selection, s) - t.team_reward;
    std::vector<Matrix> w_before;
    std::vector<Vector> b_before;
    for (int m = 0; m < 2; ++m) {
      w_before.push_back(learner.device_net(m).layers()[0].weight);
      b_before.push_back(learner.device_net(m).layers()[0].bias);
    }
    learner.train_step({&t});
    for (int m = 0; m < 2; ++m) {
      // dL/dQ_m = 2 delta w_m; Q_m(a) = W[a,:] o + b[a].
      const double g = 2.0 * delta * coef.w[m];
      const int a = t.actions[m];
      const auto& layer = learner.device_net(m).layers()[0];
      for (int c = 0; c < kObs; ++c)
        CHECK(layer.weight(a, c) ==
              doctest::Approx(w_before[m](a, c) - cfg.device_learning_rate * g * t.observations(c, m))
                  .epsilon(1e-13));
      CHECK(layer.bias[a] == doctest::Approx(b_before[m][a] - cfg.device_learning_rate * g).epsilon(1e-13));
      // The untaken action's row is untouched.
      CHECK(layer.weight.row(1 - a) == w_before[m].row(1 - a));
    }
  }
  SUBCASE("vdn fits a constant target") {
    TrainerConfig cfg = small_config();
    cfg.device_learning_rate = 0.01;
    QmixLearner learner(2, MixMode::kVdn, cfg, 4);
    JointTransition t = transition(2, data);
    t.team_reward = 2.5;
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 300; ++i) {
      const auto r = learner.train_step({&t});
      if (i == 0) first = r.loss;
      last = r.loss;
    }
    CHECK(last < 1e-6 * first);
  }
  SUBCASE("observe validates shapes") {
    QmixLearner learner(2, MixMode::kPartial, small_config(), 5);
    JointTransition t = transition(3, data);
    CHECK_THROWS_AS(learner.observe(t), ContractViolation);
  }
}

TEST_CASE("target sync period") {
  TrainerConfig cfg = small_config();
  cfg.target_sync_period = 3;
  QmixLearner learner(2, MixMode::kGlobal, cfg, 6);
  Rng data(1);
  JointTransition t = transition(2, data);
  for (int i = 0; i < 7; ++i) learner.train_step({&t});
  CHECK(learner.counters().train_steps == 7);
  CHECK(learner.counters().target_syncs == 2);
}

TEST_CASE("myopic dqn learns the better immediate action") {
  TrainerConfig cfg = small_config();
  cfg.device_learning_rate = 0.05;
  DqnLearner dqn(1, cfg, 3);
  const Vector o = Vector::Constant(kObs, 0.5);
  Experience good{o, 1, -1.0, o, 1}, bad{o, 0, -2.0, o, 0};
  for (int i = 0; i < 500; ++i) {
    dqn.train_step(0, {&good});
    dqn.train_step(0, {&bad});
  }
  const Vector q = dqn.device_net(0).forward(o);
  CHECK(greedy_action(q) == 1);
  CHECK(q[1] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(q[0] == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("uniform period matches the RB load") {
  CHECK(UniformPolicy::for_load(4, 2).period == 2);
  CHECK(UniformPolicy::for_load(5, 2).period == 3);
  CHECK(UniformPolicy::for_load(2, 4).period == 1);
  const auto p = UniformPolicy::for_load(4, 2);
  CHECK(p.samples(0));
  CHECK_FALSE(p.samples(1));
}

TEST_CASE("mode names") {
  for (auto m : {TrainerMode::kQmixPartial, TrainerMode::kQmixGlobal, TrainerMode::kVdn,
                 TrainerMode::kDqn, TrainerMode::kUniform})
    CHECK(parse_trainer_mode(to_string(m)) == m);
  CHECK_THROWS(parse_trainer_mode("maddpg"));
  CHECK(mix_mode_of(TrainerMode::kQmixGlobal) == MixMode::kGlobal);
  CHECK_FALSE(is_learning(TrainerMode::kUniform));
}

TEST_CASE("config validation") {
  TrainerConfig c;
  c.discount = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainerConfig{};
  c.batch_size = c.replay_capacity + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
