#pragma once

#include "aoimix/config.hpp"
#include "aoimix/simulation.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace aoimix {

/// Columns: iteration,loss,mean_reward,epsilon.
void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& loss);
std::vector<LossRecord> read_loss_csv(std::istream& in);

/// Trailing moving average of the loss column; element i averages
/// loss[max(0, i - window + 1) .. i].
std::vector<double> moving_average(const std::vector<LossRecord>& loss, std::size_t window);

struct RunSummary {
  TrainerMode mode = TrainerMode::kUniform;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  EvalSummary eval;
  EpisodeCounters counters;
  std::uint64_t env_fingerprint = 0;
};

std::string summary_json(const RunSummary& s, const ExperimentConfig& cfg);

/// Runs one (mode, seed). With a non-empty `out_dir` writes ledger.csv,
/// loss.csv, summary.json, config.yaml and checkpoints/ (network files plus
/// manifest.json). `result` receives the full episode when non-null.
RunSummary run_experiment(const ExperimentConfig& cfg, TrainerMode mode, std::uint64_t seed,
                          const std::string& out_dir, EpisodeResult* result = nullptr);

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation; 0 for a single run
};

MetricStats stats_of(const std::vector<double>& values);

/// One aggregated (point, mode) row.
struct AggregateRow {
  std::vector<std::pair<std::string, double>> point;  ///< axis name -> value
  TrainerMode mode = TrainerMode::kUniform;
  int runs = 0;
  int failures = 0;
  MetricStats sum_aoi;
  MetricStats sum_energy_j;
  MetricStats mean_sample_interval_s;
  MetricStats mean_queue_delay_s;
  MetricStats mean_recon_err;
  MetricStats weighted_cost;
};

struct GridRun {
  std::size_t point = 0;
  TrainerMode mode = TrainerMode::kUniform;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  RunSummary summary;
};

struct GridResult {
  std::vector<GridRun> runs;
  std::vector<AggregateRow> rows;
  int failures = 0;
};

/// A grid point: overrides ("section.key=value") applied on top of the base
/// config, plus the labels reported in the aggregate.
struct GridPoint {
  std::vector<std::string> overrides;
  std::vector<std::pair<std::string, double>> labels;
};

/// Runs every point x mode x seed on a pool of `threads` workers (0 picks the
/// hardware concurrency). Failed runs are recorded and skipped in the
/// aggregate. Per-run artifacts go under out_dir/runs/ when out_dir is set.
GridResult run_grid(const ExperimentConfig& base, const std::vector<GridPoint>& points,
                    unsigned threads, const std::string& out_dir);

/// Aggregates recomputed from a set of runs (exposed for cross-checking).
std::vector<AggregateRow> aggregate(const std::vector<GridRun>& runs,
                                    const std::vector<GridPoint>& points,
                                    const std::vector<TrainerMode>& modes);

/// Maps "devices" and "rb_count" to their config keys; anything else must
/// already be "section.key".
std::string axis_key(const std::string& axis);

GridResult run_sweep(const ExperimentConfig& base, const std::string& axis,
                     const std::vector<double>& values, unsigned threads,
                     const std::string& out_dir);

/// Weight grid gamma_A = lo, lo + step, ..., hi with gamma_E = 1 - gamma_A.
std::vector<double> parse_grid(const std::string& spec);
GridResult run_pareto(const ExperimentConfig& base, const std::vector<double>& gamma_a_values,
                      unsigned threads, const std::string& out_dir);

/// Header: the label columns, then mode,runs,failures, mean/std pairs for
/// sum_aoi, sum_energy_j, mean_sample_interval_s, mean_queue_delay_s,
/// mean_recon_err, weighted_cost, and finally config_hash.
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows,
                         std::uint64_t config_hash);

/// Calls fn(i) for i in [0, n) on `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace aoimix
