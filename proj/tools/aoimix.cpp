#include "aoimix/config.hpp"
#include "aoimix/error.hpp"
#include "aoimix/experiment.hpp"
#include "aoimix/format.hpp"
#include "aoimix/trace_fit.hpp"
#include "aoimix/verify.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace aoimix;
namespace fs = std::filesystem;

// AOIMIX_LOG=trace|debug|info|warn|error|off; default info.
void init_logging() {
  spdlog::set_pattern("[%l] %v");
  if (const char* level = std::getenv("AOIMIX_LOG"))
    spdlog::set_level(spdlog::level::from_str(level));
}

ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  for (const auto& o : overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  for (const auto& f : split_csv_line(text)) out.push_back(parse_double(f));
  return out;
}

int write_grid(const GridResult& r, const ExperimentConfig& cfg, const fs::path& out,
               const std::string& file) {
  fs::create_directories(out);
  std::ofstream csv(out / file);
  write_aggregate_csv(csv, r.rows, config_hash(cfg));
  write_aggregate_csv(std::cout, r.rows, config_hash(cfg));
  for (const auto& run : r.runs)
    if (run.failed)
      spdlog::error("{} seed {} point {} failed: {}", to_string(run.mode), run.seed, run.point,
                    run.error);
  spdlog::info("wrote {}", (out / file).string());
  return r.failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"aoimix: age-of-information sampling and scheduling with multi-agent Q-learning"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  unsigned threads = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "YAML config file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override section.key=value (applied after the file)");
  };

  auto* run = app.add_subcommand("run", "train and evaluate one mode for one seed");
  add_common(run);
  std::string mode_name;
  std::uint64_t seed = 1;
  std::string out_dir;
  run->add_option("--mode", mode_name, "qmix_partial, qmix_global, vdn, dqn or uniform");
  run->add_option("--seed", seed, "random seed");
  run->add_option("--out", out_dir, "output directory (default: experiment.output_dir)");

  auto* sweep = app.add_subcommand("sweep", "vary one config key across modes and seeds");
  add_common(sweep);
  std::string axis = "devices";
  std::string values;
  sweep->add_option("--axis", axis, "devices, rb_count or section.key");
  sweep->add_option("--values", values, "comma separated axis values")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--threads", threads, "worker threads (0: hardware concurrency)");

  auto* pareto = app.add_subcommand("pareto", "sweep gamma_A with gamma_E = 1 - gamma_A");
  add_common(pareto);
  std::string grid = "0:1:0.1";
  pareto->add_option("--grid", grid, "lo:hi:step or a comma separated list");
  pareto->add_option("--out", out_dir, "output directory");
  pareto->add_option("--threads", threads, "worker threads (0: hardware concurrency)");

  auto* fit = app.add_subcommand("fit", "fit process parameters to a CSV trace");
  std::string csv_path;
  fit->add_option("--csv", csv_path, "timestamp,value... CSV")->required()->check(CLI::ExistingFile);

  auto* selftest = app.add_subcommand("selftest", "run the oracle and invariant suites");
  std::uint64_t selftest_seed = 7;
  selftest->add_option("--seed", selftest_seed, "seed for the random instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg = load(config_path, overrides);
      const TrainerMode mode = mode_name.empty() ? cfg.mode : parse_trainer_mode(mode_name);
      const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
      spdlog::info("run {} seed {} config {}", to_string(mode), seed, hash_hex(config_hash(cfg)));
      const auto summary = run_experiment(cfg, mode, seed, dir);
      std::cout << summary_json(summary, cfg) << '\n';
      return 0;
    }
    if (*sweep) {
      ExperimentConfig cfg = load(config_path, overrides);
      const fs::path dir = out_dir.empty() ? cfg.output_dir : out_dir;
      const auto result = run_sweep(cfg, axis, parse_values(values), threads, dir.string());
      return write_grid(result, cfg, dir, "sweep.csv");
    }
    if (*pareto) {
      ExperimentConfig cfg = load(config_path, overrides);
      const fs::path dir = out_dir.empty() ? cfg.output_dir : out_dir;
      const auto result = run_pareto(cfg, parse_grid(grid), threads, dir.string());
      return write_grid(result, cfg, dir, "pareto.csv");
    }
    if (*fit) {
      const auto f = fit_trace(read_trace_csv(csv_path));
      nlohmann::json j;
      j["kind"] = to_string(f.kind);
      j["a_matrix"] = nlohmann::json::array();
      for (Eigen::Index r = 0; r < f.model.a_matrix.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < f.model.a_matrix.cols(); ++c) row.push_back(f.model.a_matrix(r, c));
        j["a_matrix"].push_back(row);
      }
      if (const auto* t = std::get_if<TanhMap>(&f.model.nonlinearity)) {
        auto& g = j["tanh_gain"] = nlohmann::json::array();
        for (Eigen::Index r = 0; r < t->gain.rows(); ++r) {
          auto row = nlohmann::json::array();
          for (Eigen::Index c = 0; c < t->gain.cols(); ++c) row.push_back(t->gain(r, c));
          g.push_back(row);
        }
      }
      if (const auto* c = std::get_if<CubicDamping>(&f.model.nonlinearity))
        j["cubic_coefficient"] = c->coefficient;
      j["disturbance_bound"] = f.disturbance_bound;
      j["rms_residual"] = f.rms_residual;
      j["ar1_fallback"] = f.ar1_fallback;
      auto& cands = j["candidates"] = nlohmann::json::array();
      for (const auto& c : f.candidates)
        cands.push_back({{"kind", to_string(c.kind)},
                         {"feasible", c.feasible},
                         {"rms_residual", c.rms_residual}});
      j["notes"] = f.notes;
      for (const auto& n : f.notes) spdlog::warn("{}", n);
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*selftest) {
      bool ok = true;
      for (const auto& r : verify::run_all(selftest_seed)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << format_double(r.seconds)
                  << " s): " << r.detail << '\n';
        ok = ok && r.passed;
      }
      return ok ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
