#include "aoimix/experiment.hpp"

#include "aoimix/error.hpp"
#include "aoimix/format.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <ostream>
#include <thread>

namespace aoimix {
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

std::string label_dir(const GridPoint& pt) {
  std::string s;
  for (const auto& [k, v] : pt.labels) {
    if (!s.empty()) s += "_";
    s += k + "=" + format_double(v);
  }
  return s.empty() ? "point" : s;
}

void write_checkpoints(const EpisodeResult& r, const RunSummary& s, const fs::path& dir) {
  if (r.device_nets.empty()) return;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["mode"] = to_string(s.mode);
  manifest["seed"] = s.seed;
  manifest["config_hash"] = hash_hex(s.config_hash);
  auto& files = manifest["files"] = nlohmann::json::array();
  for (std::size_t m = 0; m < r.device_nets.size(); ++m) {
    const std::string name = "device_" + std::to_string(m) + ".bin";
    r.device_nets[m].save((dir / name).string());
    files.push_back({{"role", "device"}, {"device", m}, {"path", name}});
  }
  if (r.mixer && r.mixer->mode() != MixMode::kVdn) {
    r.mixer->hyper_w.save((dir / "hyper_w.bin").string());
    r.mixer->hyper_b.save((dir / "hyper_b.bin").string());
    files.push_back({{"role", "hyper_w"}, {"path", "hyper_w.bin"}});
    files.push_back({{"role", "hyper_b"}, {"path", "hyper_b.bin"}});
    if (r.mixer->hyper_v) {
      r.mixer->hyper_v->save((dir / "hyper_v.bin").string());
      files.push_back({{"role", "hyper_v"}, {"path", "hyper_v.bin"}});
    }
  }
  auto out = open_out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

}  // namespace

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& loss) {
  out << "iteration,loss,mean_reward,epsilon\n";
  for (const auto& r : loss)
    out << r.iteration << ',' << format_double(r.loss) << ',' << format_double(r.mean_reward)
        << ',' << format_double(r.epsilon) << '\n';
}

std::vector<LossRecord> read_loss_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "iteration,loss,mean_reward,epsilon")
    throw ContractViolation("loss csv: unexpected header");
  std::vector<LossRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw ContractViolation("loss csv: expected 4 fields");
    out.push_back(LossRecord{std::stoull(f[0]), parse_double(f[1]), parse_double(f[2]),
                             parse_double(f[3])});
  }
  return out;
}

std::vector<double> moving_average(const std::vector<LossRecord>& loss, std::size_t window) {
  if (window == 0) throw ContractViolation("moving_average: window must be positive");
  std::vector<double> out(loss.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < loss.size(); ++i) {
    sum += loss[i].loss;
    if (i >= window) sum -= loss[i - window].loss;
    out[i] = sum / static_cast<double>(std::min(window, i + 1));
  }
  return out;
}

std::string summary_json(const RunSummary& s, const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["config_hash"] = hash_hex(s.config_hash);
  j["mode"] = to_string(s.mode);
  j["seed"] = s.seed;
  j["devices"] = cfg.system.devices;
  j["rb_count"] = cfg.system.rb_count;
  j["slots"] = cfg.slots;
  j["eval_slots"] = cfg.eval_slots;
  j["eval"] = {{"from_slot", s.eval.from_slot},
               {"slots", s.eval.slots},
               {"weighted_cost", s.eval.weighted_cost},
               {"sum_aoi", s.eval.sum_aoi},
               {"sum_energy_j", s.eval.sum_energy_j},
               {"mean_sample_interval_s", s.eval.mean_sample_interval_s},
               {"mean_queue_delay_s", s.eval.mean_queue_delay_s},
               {"mean_recon_err", s.eval.mean_recon_err}};
  j["counters"] = {{"delay_truncations", s.counters.delay_truncations},
                   {"packet_overwrites", s.counters.packet_overwrites},
                   {"samples", s.counters.samples},
                   {"deliveries", s.counters.deliveries},
                   {"train_steps", s.counters.train_steps},
                   {"skipped_updates", s.counters.skipped_updates},
                   {"target_syncs", s.counters.target_syncs}};
  j["env_fingerprint"] = hash_hex(s.env_fingerprint);
  return j.dump(2);
}

RunSummary run_experiment(const ExperimentConfig& cfg, TrainerMode mode, std::uint64_t seed,
                          const std::string& out_dir, EpisodeResult* result) {
  cfg.validate();
  EpisodeResult r = run_episode(cfg.system, cfg.episode(mode, seed));
  RunSummary s;
  s.mode = mode;
  s.seed = seed;
  s.config_hash = config_hash(cfg);
  s.eval = r.eval;
  s.counters = r.counters;
  s.env_fingerprint = r.env_fingerprint;
  if (!out_dir.empty()) {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    {
      auto out = open_out(dir / "ledger.csv");
      r.ledger.write_csv(out);
    }
    {
      auto out = open_out(dir / "loss.csv");
      write_loss_csv(out, r.loss);
    }
    {
      auto out = open_out(dir / "summary.json");
      out << summary_json(s, cfg) << '\n';
    }
    save_config(cfg, (dir / "config.yaml").string());
    write_checkpoints(r, s, dir / "checkpoints");
  }
  if (result) *result = std::move(r);
  return s;
}

MetricStats stats_of(const std::vector<double>& values) {
  MetricStats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<AggregateRow> aggregate(const std::vector<GridRun>& runs,
                                    const std::vector<GridPoint>& points,
                                    const std::vector<TrainerMode>& modes) {
  std::vector<AggregateRow> rows;
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (auto mode : modes) {
      AggregateRow row;
      row.point = points[p].labels;
      row.mode = mode;
      std::vector<double> aoi, energy, interval, queue, recon, cost;
      for (const auto& r : runs) {
        if (r.point != p || r.mode != mode) continue;
        if (r.failed) {
          ++row.failures;
          continue;
        }
        ++row.runs;
        aoi.push_back(r.summary.eval.sum_aoi);
        energy.push_back(r.summary.eval.sum_energy_j);
        interval.push_back(r.summary.eval.mean_sample_interval_s);
        queue.push_back(r.summary.eval.mean_queue_delay_s);
        recon.push_back(r.summary.eval.mean_recon_err);
        cost.push_back(r.summary.eval.weighted_cost);
      }
      row.sum_aoi = stats_of(aoi);
      row.sum_energy_j = stats_of(energy);
      row.mean_sample_interval_s = stats_of(interval);
      row.mean_queue_delay_s = stats_of(queue);
      row.mean_recon_err = stats_of(recon);
      row.weighted_cost = stats_of(cost);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

GridResult run_grid(const ExperimentConfig& base, const std::vector<GridPoint>& points,
                    unsigned threads, const std::string& out_dir) {
  base.validate();
  std::vector<ExperimentConfig> configs;
  for (const auto& pt : points) {
    ExperimentConfig c = base;
    for (const auto& o : pt.overrides) apply_override(c, o);
    configs.push_back(std::move(c));
  }
  GridResult result;
  for (std::size_t p = 0; p < points.size(); ++p)
    for (auto mode : base.modes)
      for (auto seed : base.seeds) result.runs.push_back(GridRun{p, mode, seed, false, {}, {}});

  parallel_for(result.runs.size(), threads, [&](std::size_t i) {
    auto& run = result.runs[i];
    std::string dir;
    if (!out_dir.empty())
      dir = (fs::path(out_dir) / "runs" / label_dir(points[run.point]) / to_string(run.mode) /
             ("seed" + std::to_string(run.seed)))
                .string();
    try {
      run.summary = run_experiment(configs[run.point], run.mode, run.seed, dir);
    } catch (const std::exception& e) {
      run.failed = true;
      run.error = e.what();
    }
  });
  for (const auto& r : result.runs) result.failures += r.failed ? 1 : 0;
  result.rows = aggregate(result.runs, points, base.modes);
  return result;
}

std::string axis_key(const std::string& axis) {
  if (axis == "devices") return "system.devices";
  if (axis == "rb_count" || axis == "rbs") return "system.rb_count";
  if (axis.find('.') == std::string::npos)
    throw ConfigError("unknown sweep axis '" + axis + "'; use devices, rb_count or section.key");
  return axis;
}

GridResult run_sweep(const ExperimentConfig& base, const std::string& axis,
                     const std::vector<double>& values, unsigned threads,
                     const std::string& out_dir) {
  const std::string key = axis_key(axis);
  std::vector<GridPoint> points;
  for (double v : values)
    points.push_back(GridPoint{{key + "=" + format_double(v)}, {{axis, v}}});
  return run_grid(base, points, threads, out_dir);
}

std::vector<double> parse_grid(const std::string& spec) {
  const bool range = spec.find(':') != std::string::npos;
  std::string text = spec;
  if (range) std::replace(text.begin(), text.end(), ':', ',');
  const auto parts = split_csv_line(text);
  std::vector<double> out;
  if (range) {
    if (parts.size() != 3) throw ConfigError("grid '" + spec + "' must be lo:hi:step");
    const double lo = parse_double(parts[0]);
    const double hi = parse_double(parts[1]);
    const double step = parse_double(parts[2]);
    if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("grid '" + spec + "' needs lo <= hi, step > 0");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= n; ++k) out.push_back(std::min(hi, lo + static_cast<double>(k) * step));
  } else {
    for (const auto& p : parts) out.push_back(parse_double(p));
  }
  for (double g : out)
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("grid values must lie in [0, 1]");
  return out;
}

GridResult run_pareto(const ExperimentConfig& base, const std::vector<double>& gamma_a_values,
                      unsigned threads, const std::string& out_dir) {
  std::vector<GridPoint> points;
  for (double ga : gamma_a_values) {
    const double ge = 1.0 - ga;
    points.push_back(GridPoint{{"cost.gamma_a=" + format_double(ga),
                                "cost.gamma_e=" + format_double(ge)},
                               {{"gamma_a", ga}, {"gamma_e", ge}}});
  }
  return run_grid(base, points, threads, out_dir);
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows,
                         std::uint64_t config_hash) {
  static const char* metrics[] = {"sum_aoi",        "sum_energy_j",   "mean_sample_interval_s",
                                  "mean_queue_delay_s", "mean_recon_err", "weighted_cost"};
  if (!rows.empty())
    for (const auto& [k, v] : rows.front().point) out << k << ',';
  out << "mode,runs,failures";
  for (const char* m : metrics) out << ',' << m << "_mean," << m << "_std";
  out << ",config_hash\n";
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.point) out << format_double(v) << ',';
    out << to_string(r.mode) << ',' << r.runs << ',' << r.failures;
    for (const MetricStats* s : {&r.sum_aoi, &r.sum_energy_j, &r.mean_sample_interval_s,
                                 &r.mean_queue_delay_s, &r.mean_recon_err, &r.weighted_cost})
      out << ',' << format_double(s->mean) << ',' << format_double(s->std);
    out << ',' << hash_hex(config_hash) << '\n';
  }
}

}  // namespace aoimix
