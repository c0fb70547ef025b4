#include "aoimix/verify.hpp"

#include "aoimix/dynamics.hpp"
#include "aoimix/linalg.hpp"
#include "aoimix/marl.hpp"
#include "aoimix/metrics.hpp"
#include "aoimix/neural.hpp"
#include "aoimix/random.hpp"
#include "aoimix/selector.hpp"
#include "aoimix/tabular.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

namespace aoimix::verify {
namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

CheckResult finish(std::string name, bool ok, const std::ostringstream& detail, const Timer& t) {
  return CheckResult{std::move(name), ok, detail.str(), t.seconds()};
}

}  // namespace

CheckResult selector_optimality(std::uint64_t seed, int instances) {
  Timer timer;
  Rng rng(derive_seed(seed, Stream::kInit, {0x5e1ec7}));
  int mismatches = 0, infeasible = 0, sign_violations = 0, dyadic = 0;
  for (int k = 0; k < instances; ++k) {
    SelectionProblem p;
    const int m = uniform_int(rng, 1, 12);
    p.rb_budget = uniform_int(rng, 1, 6);
    const bool grid = k % 2 == 1;
    dyadic += grid;
    for (int i = 0; i < m; ++i) {
      p.c1.push_back(grid ? uniform_int(rng, -8, 8) / 4.0 : uniform(rng, -3.0, 3.0));
      p.c2.push_back(grid ? uniform_int(rng, 0, 16) / 4.0 : uniform(rng, 0.0, 5.0));
      p.has_request.push_back(uniform(rng, 0.0, 1.0) < 0.75 ? 1 : 0);
    }
    const auto fast = select(p);
    const auto slow = brute_force_select(p);
    if (selection_objective(p, fast) != selection_objective(p, slow)) ++mismatches;
    int chosen = 0, negative = 0;
    for (int i = 0; i < m; ++i) {
      chosen += fast[i];
      if (fast[i] && !p.has_request[i]) ++infeasible;
      if (p.has_request[i] && p.c1[i] < 0.0) ++negative;
    }
    if (chosen > p.rb_budget) ++infeasible;
    if (negative <= p.rb_budget)
      for (int i = 0; i < m; ++i)
        if ((fast[i] != 0) != (p.has_request[i] && p.c1[i] < 0.0)) ++sign_violations;
  }
  std::ostringstream d;
  d << instances << " instances (" << dyadic << " on a dyadic grid): " << mismatches
    << " objective mismatches, " << infeasible << " infeasible, " << sign_violations
    << " sign-rule violations";
  return finish("selector optimality", mismatches == 0 && infeasible == 0 && sign_violations == 0,
                d, timer);
}

CheckResult gradient_exactness(std::uint64_t seed, int networks) {
  Timer timer;
  Rng rng(derive_seed(seed, Stream::kInit, {0x9a7d}));
  const Activation kinds[] = {Activation::kRelu, Activation::kIdentity, Activation::kAbsolute};
  constexpr double h = 1e-5;
  constexpr double kink_margin = 1e-3;
  double worst = 0.0;
  int redraws = 0;
  int kinds_seen[3] = {0, 0, 0};
  for (int k = 0; k < networks; ++k) {
    DenseNet net;
    Vector x;
    Matrix upstream;
    // Redraw until no pre-activation sits within the kink margin, so that the
    // finite-difference stencil never straddles a kink.
    for (;;) {
      const int depth = uniform_int(rng, 1, 4);
      std::vector<LayerSpec> specs;
      int in = uniform_int(rng, 1, 6);
      for (int l = 0; l < depth; ++l) {
        const int out = uniform_int(rng, 1, 6);
        // Cycle the first three networks through every kind on layer 0.
        const Activation a = (k < 3 && l == 0) ? kinds[k] : kinds[uniform_int(rng, 0, 2)];
        specs.push_back({in, out, a});
        in = out;
      }
      net = DenseNet(specs, rng);
      x = Vector::NullaryExpr(specs.front().inputs, [&] { return uniform(rng, -2.0, 2.0); });
      upstream = Matrix::NullaryExpr(net.output_size(), 1, [&] { return uniform(rng, -1.0, 1.0); });
      ForwardCache cache;
      net.forward_batch(x, &cache);
      bool near_kink = false;
      for (std::size_t l = 0; l < cache.preactivations.size(); ++l)
        if (net.layers()[l].activation != Activation::kIdentity &&
            (cache.preactivations[l].array().abs() < kink_margin).any())
          near_kink = true;
      if (!near_kink) break;
      ++redraws;
    }
    for (const auto& l : net.layers()) ++kinds_seen[static_cast<int>(l.activation)];

    ForwardCache cache;
    net.forward_batch(x, &cache);
    Matrix input_grad;
    const Gradients g = net.backward(cache, upstream, &input_grad);
    const Vector u = upstream.col(0);
    auto loss = [&](const DenseNet& n, const Vector& in) { return u.dot(n.forward(in)); };
    auto rel = [](double a, double b) {
      return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
    };

    std::vector<double> flat_grad;
    for (std::size_t l = 0; l < g.weight.size(); ++l) {
      for (Eigen::Index r = 0; r < g.weight[l].rows(); ++r)
        for (Eigen::Index c = 0; c < g.weight[l].cols(); ++c) flat_grad.push_back(g.weight[l](r, c));
      for (Eigen::Index r = 0; r < g.bias[l].size(); ++r) flat_grad.push_back(g.bias[l][r]);
    }
    auto params = net.flatten();
    DenseNet probe = net;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params;
      p[i] += h;
      probe.assign(p);
      const double up = loss(probe, x);
      p[i] -= 2 * h;
      probe.assign(p);
      const double down = loss(probe, x);
      worst = std::max(worst, rel((up - down) / (2 * h), flat_grad[i]));
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      worst = std::max(worst, rel((loss(net, xp) - loss(net, xm)) / (2 * h), input_grad(i, 0)));
    }
  }
  std::ostringstream d;
  d << networks << " networks, max relative error " << worst << " (layers: relu "
    << kinds_seen[0] << ", identity " << kinds_seen[1] << ", absolute " << kinds_seen[2]
    << "; " << redraws << " near-kink redraws)";
  return finish("gradient exactness", worst < 1e-4, d, timer);
}

CheckResult mixing_monotonicity(std::uint64_t seed, int probes) {
  Timer timer;
  Rng rng(derive_seed(seed, Stream::kInit, {0x3171}));
  constexpr double h = 1e-6;
  double most_negative = 0.0;
  int max_mismatch = 0, max_probes = 0;
  for (int k = 0; k < probes; ++k) {
    const int m = uniform_int(rng, 1, 6);
    const MixMode mode = k % 2 ? MixMode::kGlobal : MixMode::kPartial;
    const int obs = DeviceState::kObservationSize;
    MixingNetwork mixer(m, m * obs, 32, mode, rng);
    Matrix observations = Matrix::NullaryExpr(obs, m, [&] { return uniform(rng, -3.0, 3.0); });
    const Vector state = global_state(observations);
    Vector q = Vector::NullaryExpr(m, [&] { return uniform(rng, -10.0, 10.0); });
    BitVector u(m);
    for (auto& b : u) b = uniform(rng, 0.0, 1.0) < 0.6 ? 1 : 0;
    for (int i = 0; i < m; ++i) {
      Vector qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const double deriv = (mixer.mix(qp, u, state) - mixer.mix(qm, u, state)) / (2 * h);
      most_negative = std::min(most_negative, deriv);
    }

    if (m <= 4) {
      ++max_probes;
      std::vector<DenseNet> nets;
      for (int i = 0; i < m; ++i) nets.emplace_back(device_net_specs({8}), rng);
      const double decomposed = td_target(mixer, nets, 0.0, observations, u, 0.5);
      double joint = -std::numeric_limits<double>::infinity();
      std::vector<Vector> heads;
      for (int i = 0; i < m; ++i) heads.push_back(nets[i].forward(observations.col(i)));
      for (int a = 0; a < (1 << m); ++a) {
        Vector chosen(m);
        for (int i = 0; i < m; ++i) chosen[i] = heads[i][(a >> i) & 1];
        joint = std::max(joint, 0.5 * mixer.mix(chosen, u, state));
      }
      if (decomposed != joint) ++max_mismatch;
    }
  }
  std::ostringstream d;
  d << probes << " probes, most negative dQtot/dQm " << most_negative << "; " << max_mismatch
    << " of " << max_probes << " joint-max probes mismatched";
  return finish("mixing monotonicity", most_negative >= -1e-9 && max_mismatch == 0, d, timer);
}

CheckResult bellman_contraction(std::uint64_t seed, int mdps) {
  Timer timer;
  Rng rng(derive_seed(seed, Stream::kInit, {0xbe11}));
  constexpr double gamma = 0.9;
  double worst_excess = -std::numeric_limits<double>::infinity();
  double worst_vi_excess = -std::numeric_limits<double>::infinity();
  int vi_failures = 0;
  for (int k = 0; k < mdps; ++k) {
    const int states = uniform_int(rng, 1, 20);
    const int actions = uniform_int(rng, 1, 4);
    const TabularMDP mdp = random_mdp(rng, states, actions, gamma);
    validate(mdp);
    const double scale = std::pow(10.0, uniform(rng, -2.0, 2.0));
    const Matrix q1 = Matrix::NullaryExpr(states, actions, [&] { return scale * uniform(rng, -1, 1); });
    const Matrix q2 = Matrix::NullaryExpr(states, actions, [&] { return scale * uniform(rng, -1, 1); });
    const double lhs = (bellman_apply(mdp, q1) - bellman_apply(mdp, q2)).cwiseAbs().maxCoeff();
    const double rhs = gamma * (q1 - q2).cwiseAbs().maxCoeff();
    worst_excess = std::max(worst_excess, lhs - rhs);

    const Matrix q0 = Matrix::Zero(states, actions);
    const auto fixed = value_iteration(mdp, q0, 1e-13, 2000);
    const double residual =
        (bellman_apply(mdp, fixed.q) - fixed.q).cwiseAbs().maxCoeff();
    if (!fixed.converged || residual > 1e-11) {
      ++vi_failures;
      continue;
    }
    // |Q_k - Q*| <= gamma^k |Q_0 - Q*| along the trajectory.
    const double d0 = (q0 - fixed.q).cwiseAbs().maxCoeff();
    Matrix q = q0;
    for (int it = 1; it <= 60; ++it) {
      q = bellman_apply(mdp, q);
      const double dk = (q - fixed.q).cwiseAbs().maxCoeff();
      worst_vi_excess = std::max(worst_vi_excess, dk - std::pow(gamma, it) * d0 - 1e-11);
    }
  }
  std::ostringstream d;
  d << mdps << " MDPs: max(|HQ1-HQ2| - 0.9|Q1-Q2|) = " << worst_excess
    << ", max geometric-bound excess " << worst_vi_excess << ", " << vi_failures
    << " value iterations without a fixed point";
  return finish("bellman contraction",
                worst_excess <= 1e-12 && worst_vi_excess <= 0.0 && vi_failures == 0, d, timer);
}

CheckResult nyquist_semantics(std::uint64_t seed, int draws) {
  Timer timer;
  Rng rng(derive_seed(seed, Stream::kInit, {0x4e59}));
  int omega_y = 0, omega_eps = 0, identity = 0, aoi_reset = 0, clamp = 0, energy = 0;
  const AoiParams params;
  const CostWeights w;
  for (int k = 0; k < draws; ++k) {
    const int dim = uniform_int(rng, 1, 6);
    const Matrix j = Matrix::NullaryExpr(dim, dim, [&] { return uniform(rng, -2.0, 2.0); });
    const auto spectrum = eigenvalues(j);
    const double xi = uniform(rng, 0.1, 10.0);
    const double eps = uniform(rng, 0.0, 2.0);
    const double y = uniform(rng, 0.0, 20.0);

    const double o1 = variation_frequency(spectrum, y, eps, xi);
    if (variation_frequency(spectrum, 2.0 * y, eps, xi) < o1) ++omega_y;
    if (variation_frequency(spectrum, y + uniform(rng, 0.0, 5.0), eps, xi) < o1) ++omega_y;
    if (variation_frequency(spectrum, y, 2.0 * eps + 0.1, xi) < o1) ++omega_eps;

    const auto fa = frequency_analysis(spectrum, o1, params.device_aoi_cap);
    if (std::abs(fa.max_sampling_interval * fa.sampling_frequency - 1.0) > 1e-12) ++identity;
    if (o1 > 0.0 && fa.sampling_frequency != o1 / std::numbers::pi) ++identity;

    DeviceState d;
    d.device_aoi = uniform(rng, 0.0, params.device_aoi_cap);
    const double interval = fa.max_sampling_interval;
    const double elapsed = uniform(rng, 0.0, 1.0) * interval;
    if (update_device_aoi(d, true, elapsed, interval, params) != 0.0) ++aoi_reset;

    d.bs_aoi = uniform(rng, 0.0, params.bs_aoi_cap);
    for (int s = 0; s < 8; ++s)
      if (update_bs_aoi(d, false, 0.0, std::nullopt, params) > params.bs_aoi_cap) ++clamp;

    const double l = uniform(rng, 1e-7, 1.0);
    const double both = slot_energy(true, true, l, w);
    const double parts = slot_energy(true, false, l, w) + slot_energy(false, true, l, w);
    if (std::abs(both - parts) > 1e-12 * std::max(1.0, both)) ++energy;
    if (slot_energy(false, false, l, w) != 0.0) ++energy;
    if (!(slot_energy(true, false, l, w) > 0.0) || !(slot_energy(false, true, l, w) > 0.0)) ++energy;
  }
  std::ostringstream d;
  d << draws << " draws: Omega(|y|) decreases " << omega_y << ", Omega(eps) decreases "
    << omega_eps << ", Delta*F/F=Omega/pi breaks " << identity << ", AoI resets missed "
    << aoi_reset << ", BS clamp breaches " << clamp << ", energy additivity breaks " << energy;
  const bool ok = omega_y + omega_eps + identity + aoi_reset + clamp + energy == 0;
  return finish("nyquist and aoi semantics", ok, d, timer);
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
  return {selector_optimality(seed), gradient_exactness(seed), mixing_monotonicity(seed),
          bellman_contraction(seed), nyquist_semantics(seed)};
}

}  // namespace aoimix::verify
