// One PASS/FAIL line per acceptance criterion. Exit code 1 if any fails.
#include <aoimix/experiment.hpp>
#include <aoimix/verify.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

using namespace aoimix;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << id << " " << name << ": " << detail << std::endl;
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// The desk-scale system: four devices on two resource blocks.
ExperimentConfig desk_config() {
  ExperimentConfig c;
  c.system.devices = 4;
  c.system.rb_count = 2;
  c.slots = 20000;
  c.eval_slots = 5000;
  c.seeds = {1, 2, 3, 4, 5};
  c.validate();
  return c;
}

void check_oracle(int id, const std::string& name, const verify::CheckResult& r, double budget_s) {
  const bool fast = budget_s <= 0.0 || r.seconds < budget_s;
  report(id, name, r.passed && fast,
         r.detail + "; " + fmt(r.seconds, 3) + " s" +
             (budget_s > 0.0 ? " (limit " + fmt(budget_s) + " s)" : ""));
}

// First iteration index (1-based, at or after `from`) where the trailing
// moving average drops to `threshold`; max() when it never does.
std::size_t first_reach(const std::vector<double>& ma, std::size_t from, double threshold) {
  for (std::size_t i = from; i <= ma.size(); ++i)
    if (ma[i - 1] <= threshold) return i;
  return std::numeric_limits<std::size_t>::max();
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = fs::temp_directory_path() / "aoimix_acceptance";
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--out") out = argv[i + 1];
  fs::remove_all(out);
  fs::create_directories(out);
  const std::uint64_t seed = 2024;

  check_oracle(1, "selector optimality", verify::selector_optimality(seed, 1000), 10.0);
  check_oracle(2, "gradient exactness", verify::gradient_exactness(seed, 100), 30.0);
  check_oracle(3, "mixing monotonicity", verify::mixing_monotonicity(seed, 1000), 0.0);
  check_oracle(4, "bellman contraction", verify::bellman_contraction(seed, 1000), 0.0);
  check_oracle(5, "nyquist and aoi semantics", verify::nyquist_semantics(seed, 1000), 0.0);

  // Criteria 6 and 7 share one set of desk runs.
  const ExperimentConfig desk = desk_config();
  const std::vector<TrainerMode> compared{TrainerMode::kQmixPartial, TrainerMode::kDqn,
                                          TrainerMode::kUniform};
  std::map<TrainerMode, std::vector<double>> cost;
  std::map<TrainerMode, std::vector<std::vector<LossRecord>>> losses;
  auto run_mode = [&](TrainerMode mode) {
    for (auto s : desk.seeds) {
      EpisodeResult full;
      const auto dir = out / "desk" / to_string(mode) / std::to_string(s);
      const auto summary = run_experiment(desk, mode, s, dir.string(), &full);
      cost[mode].push_back(summary.eval.weighted_cost);
      losses[mode].push_back(std::move(full.loss));
    }
  };

  const auto t6 = Clock::now();
  for (auto mode : compared) run_mode(mode);
  const double desk_seconds = seconds_since(t6);
  {
    const double p = stats_of(cost[TrainerMode::kQmixPartial]).mean;
    const double d = stats_of(cost[TrainerMode::kDqn]).mean;
    const double u = stats_of(cost[TrainerMode::kUniform]).mean;
    const double margin = 1.0 - p / u;
    const bool pass = p <= d && d <= u && margin >= 0.10 && desk_seconds < 600.0;
    report(6, "learning trend", pass,
           "mean eval cost qmix_partial " + fmt(p, 8) + ", dqn " + fmt(d, 8) + ", uniform " +
               fmt(u, 8) + "; qmix_partial " + fmt(100 * margin, 4) + "% below uniform; " +
               (p <= d ? "" : "qmix_partial > dqn by " + fmt(p - d, 3) + "; ") + "5 seeds in " +
               fmt(desk_seconds, 4) + " s");
  }

  run_mode(TrainerMode::kQmixGlobal);
  {
    const std::size_t w = 1000;
    int dropped = 0, ordered = 0;
    std::string per_seed;
    for (std::size_t i = 0; i < desk.seeds.size(); ++i) {
      const auto part = moving_average(losses[TrainerMode::kQmixPartial][i], w);
      const auto glob = moving_average(losses[TrainerMode::kQmixGlobal][i], w);
      if (part.size() < w || glob.size() < w) continue;
      const double start = part[w - 1], end = part.back();
      if (end < 0.5 * start) ++dropped;
      const double threshold = 0.5 * start;
      const auto it_p = first_reach(part, w, threshold);
      const auto it_g = first_reach(glob, w, threshold);
      if (it_g <= it_p && it_g != std::numeric_limits<std::size_t>::max()) ++ordered;
      auto text = [](std::size_t v) {
        return v == std::numeric_limits<std::size_t>::max() ? std::string("never") : std::to_string(v);
      };
      per_seed += " seed " + std::to_string(desk.seeds[i]) + ": end/start " + fmt(end / start, 3) +
                  ", iterations to " + fmt(threshold, 3) + " global " + text(it_g) + " partial " +
                  text(it_p) + ";";
    }
    const bool pass = dropped >= 4 && ordered == static_cast<int>(desk.seeds.size());
    report(7, "convergence trend", pass,
           std::to_string(dropped) + "/5 seeds halve the partial-mode loss, global first in " +
               std::to_string(ordered) + "/5;" + per_seed);
  }

  {
    ExperimentConfig sweep = desk;
    sweep.slots = 6000;
    sweep.eval_slots = 1500;
    sweep.modes = compared;
    const auto t8 = Clock::now();
    const auto g = run_sweep(sweep, "devices", {4, 8, 12}, 1, (out / "sweep").string());
    std::map<TrainerMode, std::vector<double>> aoi;
    for (const auto& row : g.rows) aoi[row.mode].push_back(row.sum_aoi.mean);
    bool monotone = g.failures == 0;
    std::string detail;
    for (auto mode : compared) {
      const auto& v = aoi[mode];
      if (v.size() != 3) monotone = false;
      for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1]) monotone = false;
      detail += " " + to_string(mode) + " [";
      for (std::size_t i = 0; i < v.size(); ++i) detail += (i ? ", " : "") + fmt(v[i], 5);
      detail += "];";
    }
    report(8, "scarcity monotonicity", monotone,
           "mean sum AoI for M = 4, 8, 12 at I = 2, 5 seeds, 6000 slots:" + detail + " " +
               fmt(seconds_since(t8), 4) + " s");
  }

  {
    bool same = true;
    std::string detail;
    for (auto mode : {TrainerMode::kQmixPartial, TrainerMode::kDqn, TrainerMode::kUniform}) {
      const auto first = out / "desk" / to_string(mode) / "1";
      const auto again = out / "repeat" / to_string(mode);
      run_experiment(desk, mode, 1, again.string());
      for (const char* f : {"ledger.csv", "loss.csv"}) {
        const bool eq = slurp(first / f) == slurp(again / f) && !slurp(first / f).empty();
        same = same && eq;
        detail += " " + to_string(mode) + "/" + f + (eq ? " identical" : " DIFFERS") + ";";
      }
    }
    report(9, "determinism", same, "seed 1 repeated:" + detail);
  }

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
