#include <doctest.h>

#include "helpers.hpp"

#include <aoimix/experiment.hpp>

#include <atomic>
#include <nlohmann/json.hpp>
#include <sstream>

using namespace aoimix;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.system.devices = 3;
  c.system.rb_count = 1;
  c.system.expected_delay_samples = 128;
  c.trainer.batch_size = 8;
  c.trainer.device_hidden = {8};
  c.trainer.mixer_hidden = 4;
  c.slots = 150;
  c.eval_slots = 50;
  c.seeds = {1};
  c.modes = {TrainerMode::kQmixPartial, TrainerMode::kUniform};
  return c;
}

}  // namespace

TEST_CASE("loss csv round trip") {
  std::vector<LossRecord> l{{1, 0.5, -1.25, 0.05}, {2, 1.0 / 3.0, -2.0, 0.06}};
  std::stringstream s;
  write_loss_csv(s, l);
  CHECK(s.str().rfind("iteration,loss,mean_reward,epsilon\n", 0) == 0);
  const auto back = read_loss_csv(s);
  REQUIRE(back.size() == 2);
  CHECK(back[1].loss == l[1].loss);
  CHECK(back[1].iteration == 2);
}

TEST_CASE("moving average") {
  std::vector<LossRecord> l;
  for (int i = 1; i <= 5; ++i) l.push_back({static_cast<std::uint64_t>(i), double(i), 0, 0});
  const auto ma = moving_average(l, 2);
  CHECK(ma == std::vector<double>{1.0, 1.5, 2.5, 3.5, 4.5});
}

TEST_CASE("stats") {
  CHECK(stats_of({2.0}).std == 0.0);
  const auto s = stats_of({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
}

TEST_CASE("grid specs") {
  const auto g = parse_grid("0:1:0.25");
  REQUIRE(g.size() == 5);
  CHECK(g.back() == 1.0);
  CHECK(parse_grid("0.2,0.7") == std::vector<double>{0.2, 0.7});
  CHECK_THROWS(parse_grid("1:0:0.1"));
  CHECK(axis_key("devices") == "system.devices");
  CHECK(axis_key("cost.gamma_a") == "cost.gamma_a");
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("run writes artifacts stamped with the config hash") {
  const auto cfg = tiny();
  const auto dir = testing::scratch_dir("run");
  const auto s = run_experiment(cfg, TrainerMode::kQmixPartial, 1, dir.string());
  for (const char* f : {"ledger.csv", "loss.csv", "summary.json", "config.yaml",
                        "checkpoints/manifest.json", "checkpoints/device_0.bin",
                        "checkpoints/hyper_w.bin"})
    CHECK(std::filesystem::exists(dir / f));
  const auto j = nlohmann::json::parse(testing::slurp(dir / "summary.json"));
  CHECK(j.at("config_hash").get<std::string>() == hash_hex(config_hash(cfg)));
  const auto m = nlohmann::json::parse(testing::slurp(dir / "checkpoints/manifest.json"));
  CHECK(m.at("config_hash").get<std::string>() == hash_hex(config_hash(cfg)));
  CHECK(s.config_hash == config_hash(cfg));
  const auto net = DenseNet::load((dir / "checkpoints/device_0.bin").string());
  CHECK(net.input_size() == DeviceState::kObservationSize);
}

TEST_CASE("one point, one seed: the aggregate is the run") {
  auto cfg = tiny();
  const auto g = run_sweep(cfg, "devices", {3}, 1, "");
  REQUIRE(g.runs.size() == 2);
  REQUIRE(g.rows.size() == 2);
  for (const auto& row : g.rows) {
    const auto& run = g.runs[row.mode == g.runs[0].mode ? 0 : 1];
    CHECK(row.runs == 1);
    CHECK(row.weighted_cost.mean == run.summary.eval.weighted_cost);
    CHECK(row.sum_aoi.mean == run.summary.eval.sum_aoi);
    CHECK(row.weighted_cost.std == 0.0);
  }
}

TEST_CASE("identical seeds give zero spread") {
  auto cfg = tiny();
  cfg.seeds = {4, 4};
  cfg.modes = {TrainerMode::kUniform};
  const auto g = run_sweep(cfg, "devices", {3}, 2, "");
  REQUIRE(g.rows.size() == 1);
  CHECK(g.rows[0].runs == 2);
  CHECK(g.rows[0].sum_aoi.std == 0.0);
  CHECK(g.rows[0].weighted_cost.std == 0.0);
}

TEST_CASE("aggregates are recomputable from runs") {
  auto cfg = tiny();
  cfg.seeds = {1, 2};
  cfg.modes = {TrainerMode::kUniform, TrainerMode::kDqn};
  const std::vector<GridPoint> points{{{"system.devices=2"}, {{"devices", 2}}},
                                      {{"system.devices=3"}, {{"devices", 3}}}};
  const auto g = run_grid(cfg, points, 2, "");
  const auto again = aggregate(g.runs, points, cfg.modes);
  REQUIRE(again.size() == g.rows.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].weighted_cost.mean == g.rows[i].weighted_cost.mean);
    CHECK(again[i].mean_recon_err.std == g.rows[i].mean_recon_err.std);
  }
}

TEST_CASE("pareto: one pair gives one row per mode and the csv is complete") {
  auto cfg = tiny();
  const auto g = run_pareto(cfg, {0.7}, 1, "");
  REQUIRE(g.rows.size() == cfg.modes.size());
  std::ostringstream s;
  write_aggregate_csv(s, g.rows, config_hash(cfg));
  std::istringstream in(s.str());
  std::string header, line;
  std::getline(in, header);
  CHECK(header.find("gamma_a") != std::string::npos);
  CHECK(header.substr(header.size() - 11) == "config_hash");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == std::count(header.begin(), header.end(), ','));
  }
  CHECK(rows == 2);
}

TEST_CASE("a failing run is recorded and the grid continues") {
  auto cfg = tiny();
  cfg.modes = {TrainerMode::kUniform};
  // Zero RBs fails validation for that point only.
  const std::vector<GridPoint> points{{{"system.rb_count=0"}, {{"rb_count", 0}}},
                                      {{"system.rb_count=1"}, {{"rb_count", 1}}}};
  const auto g = run_grid(cfg, points, 1, "");
  CHECK(g.failures == 1);
  REQUIRE(g.rows.size() == 2);
  CHECK(g.rows[0].failures == 1);
  CHECK(g.rows[1].runs == 1);
}
