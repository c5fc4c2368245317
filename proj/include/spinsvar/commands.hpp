#pragma once

// Implementations behind the spinsvar CLI subcommands. Kept in the library so
// tests can drive the same code paths as the executable.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "spinsvar/config.hpp"
#include "spinsvar/estimate.hpp"
#include "spinsvar/ingest.hpp"
#include "spinsvar/io.hpp"
#include "spinsvar/metrics.hpp"
#include "spinsvar/simulate.hpp"

namespace spinsvar::cli {

namespace fs = std::filesystem;
using io::Json;

constexpr const char* kOutEnv = "SPINSVAR_OUT";
constexpr const char* kShdConvention = "per-block; an opposite-orientation pair counts 1";

/// Global flags shared by all subcommands; unset fields leave the config alone.
struct GlobalOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> preset;
  std::optional<std::string> loss;
  int threads = 0;
};

/// Config file, then command-line overrides. --preset and --loss are injected
/// into the fit section so explicit config fields still win over the preset.
inline RunConfig resolve_config(const GlobalOptions& opts) {
  Json doc = opts.config_path ? io::read_json(*opts.config_path) : Json::object();
  if (!doc.is_object()) fail(ErrorCode::Config, "config: top level must be an object");
  if (opts.seed) {
    doc["graph"]["seed"] = *opts.seed;
    doc["shocks"]["seed"] = *opts.seed;
    doc["fit"]["seed"] = *opts.seed;
  }
  if (opts.preset) {
    if (!FitConfig::preset(*opts.preset)) fail(ErrorCode::Config, "unknown preset '" + *opts.preset + "'");
    doc["fit"]["preset"] = *opts.preset;
  }
  if (opts.loss) doc["fit"]["loss"] = *opts.loss;
  return parse_run_config(doc);
}

/// --out wins, then $SPINSVAR_OUT, then io.out_dir from the config.
inline fs::path resolve_out_dir(const GlobalOptions& opts, const RunConfig& cfg) {
  if (opts.out) return *opts.out;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return cfg.out_dir;
}

inline void set_threads(int threads) {
  if (threads > 0) Eigen::setNbThreads(threads);
}

// ---------------------------------------------------------------- simulate

struct SimulateResult {
  Dataset dataset;
  fs::path dir;
};

inline SimulateResult cmd_simulate(const RunConfig& cfg, const fs::path& out_dir) {
  Dataset ds = generate_dataset(cfg.graph, cfg.shocks, cfg.n_samples, cfg.n_steps);
  fs::create_directories(out_dir);
  io::save_graph(out_dir, "ground_truth", ds.graph);
  io::save_tensor(out_dir, "sample", ds.data);
  io::save_tensor(out_dir, "shocks", ds.shocks);

  Json manifest = io::shape_json(ds.data.n_samples(), ds.data.n_steps(), ds.data.n_vars());
  manifest["k"] = ds.graph.k();
  manifest["graph"] = to_json(cfg.graph);
  manifest["shocks"] = to_json(cfg.shocks);
  manifest["attempts"] = ds.attempts;
  manifest["graph_seed_used"] = ds.graph_seed;
  manifest["shock_seed_used"] = ds.shock_seed;
  manifest["true_edges"] = (ds.graph.stacked().array() != 0.0).count();
  manifest["stability_margin"] = stability_margin(ds.graph);
  manifest["files"] = {{"graph", "ground_truth.csv"}, {"data", "sample_NNNN.csv"},
                       {"shocks", "shocks_NNNN.csv"}};
  io::write_json(out_dir / "manifest.json", manifest);
  return {std::move(ds), out_dir};
}

// --------------------------------------------------------------------- fit

/// A directory with manifest.json + sample_NNNN.csv, or one T x d CSV file.
inline TimeSeriesTensor load_data(const fs::path& path) {
  if (fs::is_directory(path)) {
    const fs::path manifest = path / "manifest.json";
    if (!fs::exists(manifest)) fail(ErrorCode::Io, "missing " + manifest.string());
    return io::load_tensor<detail::SeriesTag>(path, "sample", io::read_json(manifest));
  }
  if (!fs::exists(path)) fail(ErrorCode::Io, "missing data file " + path.string());
  Matrix m = io::read_matrix_csv(path);
  if (m.size() == 0) fail(ErrorCode::Io, "empty data file " + path.string());
  const Index t = m.rows();
  return TimeSeriesTensor(1, t, std::move(m));
}

struct FitResult {
  EstimateReport report;
  RecoveredShocks shocks;
  double wall_seconds = 0.0;
};

inline Json report_json(const EstimateReport& r, const std::string& preset, Index k,
                        const TimeSeriesTensor& x, double shock_threshold, double wall_seconds) {
  Json j;
  j["method"] = r.config.loss == Loss::LogL1 ? "spinsvar" : "spinsvar-mse-ablation";
  j["ablation"] = r.config.loss == Loss::Mse;
  j["loss"] = std::string(to_string(r.config.loss));
  j["preset"] = preset;
  j["N"] = x.n_samples();
  j["T"] = x.n_steps();
  j["d"] = x.n_vars();
  j["k"] = k;
  j["beta_hat"] = r.beta_hat;
  j["h_final"] = r.h_final;
  j["best_objective"] = r.best_objective;
  j["best_epoch"] = r.best_epoch;
  j["epochs_run"] = r.epochs_run;
  j["stop_reason"] = std::string(to_string(r.stop_reason));
  j["omega"] = r.omega;
  j["shock_threshold"] = shock_threshold;
  j["edges"] = (r.w_hat.stacked().array() != 0.0).count();
  j["wall_time_seconds"] = wall_seconds;
  j["config"] = to_json(r.config);
  j["loss_trace"] = r.loss_trace;
  return j;
}

inline FitResult cmd_fit(const fs::path& data_path, const RunConfig& cfg, const fs::path& out_dir) {
  const TimeSeriesTensor x = load_data(data_path);
  const auto start = std::chrono::steady_clock::now();
  EstimateReport report = fit(x, cfg.fit_lag, cfg.fit);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const PastTensor past = build_past_embedding(x, cfg.fit_lag);
  RecoveredShocks shocks = recover_shocks(x, past, report.w_hat, cfg.shocks.significance_threshold);

  fs::create_directories(out_dir);
  io::save_graph(out_dir, "w_hat", report.w_hat);
  io::save_graph(out_dir, "w_dense", report.w_dense);
  io::save_tensor(out_dir, "shocks_hat", shocks.dense);
  io::save_tensor(out_dir, "shocks_sig", shocks.significant);
  Json rep = report_json(report, cfg.effective_preset(), cfg.fit_lag, x,
                         cfg.shocks.significance_threshold, wall);
  rep["data"] = data_path.string();
  io::write_json(out_dir / "report.json", rep);
  return {std::move(report), std::move(shocks), wall};
}

// -------------------------------------------------------------------- eval

struct Metrics {
  GraphScore graph;
  std::optional<ShockScore> shocks;
};

inline Json metrics_json(const Metrics& m) {
  Json j;
  j["shd"] = m.graph.shd;
  j["precision"] = m.graph.prf.precision;
  j["recall"] = m.graph.prf.recall;
  j["f1"] = m.graph.prf.f1;
  j["precision_undefined"] = m.graph.prf.precision_undefined;
  j["recall_undefined"] = m.graph.prf.recall_undefined;
  j["auroc"] = m.graph.roc.value;
  j["auroc_undefined"] = m.graph.roc.undefined;
  j["nmse"] = m.graph.nmse;
  if (m.shocks) {
    j["shock_shd"] = m.shocks->shock_shd;
    j["shock_nmse"] = m.shocks->shock_nmse;
  } else {
    j["shock_shd"] = nullptr;
    j["shock_nmse"] = nullptr;
  }
  j["shd_convention"] = kShdConvention;
  return j;
}

/// Scores an estimate against a truth instance. AUROC ranks the dense
/// (pre-threshold) weights when available.
inline Metrics evaluate_instance(const WindowGraph& w_hat, const std::optional<WindowGraph>& w_dense,
                                 const WindowGraph& truth) {
  Metrics m;
  m.graph.shd = shd(w_hat, truth);
  m.graph.prf = prf1(w_hat, truth);
  m.graph.roc = auroc((w_dense ? *w_dense : w_hat).stacked().cwiseAbs(), truth);
  m.graph.nmse = nmse(w_hat, truth);
  return m;
}

struct EvalRow {
  std::string instance;
  Json flat;
};

inline std::string csv_header() {
  return "instance,shd,precision,recall,f1,auroc,nmse,shock_shd,shock_nmse";
}

inline std::string csv_row(const EvalRow& r) {
  const auto num = [](const Json& v) {
    return v.is_null() ? std::string() : v.is_number_integer() ? std::to_string(v.get<long>())
                                                               : io::format_double(v.get<double>());
  };
  const Json& f = r.flat;
  return r.instance + "," + num(f["shd"]) + "," + num(f["precision"]) + "," + num(f["recall"]) +
         "," + num(f["f1"]) + "," + num(f["auroc"]) + "," + num(f["nmse"]) + "," +
         num(f["shock_shd"]) + "," + num(f["shock_nmse"]);
}

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
  return {mean, std::sqrt(var)};
}

/// Writes metrics.json into each estimate directory, eval_instances.csv and
/// eval_summary.csv (mean and sample std per metric) into out_dir.
inline std::vector<EvalRow> cmd_eval(const std::vector<std::pair<fs::path, fs::path>>& pairs,
                                     const fs::path& out_dir, std::ostream& table) {
  std::vector<EvalRow> rows;
  for (const auto& [est_dir, truth_dir] : pairs) {
    const WindowGraph truth = io::load_graph(truth_dir, "ground_truth");
    const WindowGraph w_hat = io::load_graph(est_dir, "w_hat");
    std::optional<WindowGraph> w_dense;
    if (fs::exists(est_dir / "w_dense.csv")) w_dense = io::load_graph(est_dir, "w_dense");
    Metrics m = evaluate_instance(w_hat, w_dense, truth);

    Json flat;
    flat["method"] = "spinsvar";
    flat["instance"] = est_dir.string();
    flat["truth"] = truth_dir.string();
    flat["seed"] = nullptr;
    const fs::path truth_manifest = truth_dir / "manifest.json";
    const fs::path report_path = est_dir / "report.json";
    if (fs::exists(report_path)) {
      const Json rep = io::read_json(report_path);
      flat["method"] = rep.value("method", "spinsvar");
    }
    if (fs::exists(truth_manifest)) {
      const Json man = io::read_json(truth_manifest);
      flat["seed"] = man.at("graph").at("seed");
      const Index n = man.at("N").get<Index>();
      if (fs::exists(truth_dir / io::sample_file_name("shocks", 0)) &&
          fs::exists(est_dir / io::sample_file_name("shocks_hat", 0))) {
        const auto s_true = io::load_tensor<detail::ShockTag>(truth_dir, "shocks", man);
        Json est_shape = io::shape_json(n, man.at("T").get<Index>(), man.at("d").get<Index>());
        const auto s_hat = io::load_tensor<detail::ShockTag>(est_dir, "shocks_hat", est_shape);
        const double thr = man.at("shocks").at("significance_threshold").get<double>();
        m.shocks = ShockScore{shock_shd(s_hat, s_true, thr), shock_nmse(s_hat, s_true)};
      }
    }
    flat["d"] = truth.d();
    flat["k"] = truth.k();
    flat.update(metrics_json(m));
    io::write_json(est_dir / "metrics.json", flat);
    rows.push_back({est_dir.string(), flat});
  }

  fs::create_directories(out_dir);
  std::string instances = csv_header() + "\n";
  for (const auto& r : rows) {
    instances += csv_row(r) + "\n";
    table << csv_row(r) << "\n";
  }
  io::write_text(out_dir / "eval_instances.csv", instances);

  std::string summary = "metric,mean,std,count\n";
  for (const char* key : {"shd", "precision", "recall", "f1", "auroc", "nmse", "shock_shd", "shock_nmse"}) {
    std::vector<double> values;
    for (const auto& r : rows) {
      if (!r.flat[key].is_null()) values.push_back(r.flat[key].get<double>());
    }
    const auto [mean, sd] = mean_std(values);
    summary += std::string(key) + "," + io::format_double(mean) + "," + io::format_double(sd) +
               "," + std::to_string(values.size()) + "\n";
  }
  io::write_text(out_dir / "eval_summary.csv", summary);
  return rows;
}

// ------------------------------------------------------------------- bench

struct BenchCell {
  Index d, n, t, k;
};

struct BenchRun {
  BenchCell cell;
  int seed_index = 0;
  std::uint64_t graph_seed = 0;
  std::string status;  // ok | timeout | error:<code>
  std::optional<GraphScore> score;
  std::optional<double> shock_nmse_value;
  int epochs = 0;
  std::string stop_reason;
  double runtime_seconds = 0.0;
};

inline const char* bench_header() {
  return "d,N,T,k,seed_index,graph_seed,status,shd,precision,recall,f1,auroc,nmse,shock_nmse,"
         "epochs,stop_reason,runtime_s";
}

inline std::string bench_row(const BenchRun& r) {
  const auto f = [](double v) { return io::format_double(v); };
  std::string s = std::to_string(r.cell.d) + "," + std::to_string(r.cell.n) + "," +
                  std::to_string(r.cell.t) + "," + std::to_string(r.cell.k) + "," +
                  std::to_string(r.seed_index) + "," + std::to_string(r.graph_seed) + "," + r.status;
  if (r.score) {
    s += "," + std::to_string(r.score->shd) + "," + f(r.score->prf.precision) + "," +
         f(r.score->prf.recall) + "," + f(r.score->prf.f1) + "," + f(r.score->roc.value) + "," +
         f(r.score->nmse);
  } else {
    s += ",,,,,,";
  }
  s += "," + (r.shock_nmse_value ? f(*r.shock_nmse_value) : std::string());
  s += "," + std::to_string(r.epochs) + "," + r.stop_reason + "," + f(r.runtime_seconds);
  return s;
}

inline Json bench_json(const BenchRun& r) {
  Json j{{"method", "spinsvar"}, {"d", r.cell.d}, {"N", r.cell.n}, {"T", r.cell.t},
         {"k", r.cell.k}, {"seed_index", r.seed_index}, {"graph_seed", r.graph_seed},
         {"status", r.status}, {"epochs", r.epochs}, {"stop_reason", r.stop_reason},
         {"runtime_s", r.runtime_seconds}};
  if (r.score) {
    j["shd"] = r.score->shd;
    j["precision"] = r.score->prf.precision;
    j["recall"] = r.score->prf.recall;
    j["f1"] = r.score->prf.f1;
    j["auroc"] = r.score->roc.value;
    j["nmse"] = r.score->nmse;
  }
  if (r.shock_nmse_value) j["shock_nmse"] = *r.shock_nmse_value;
  return j;
}

/// One simulate -> fit -> score run. The timeout covers the whole run but
/// only the optimizer can be interrupted.
inline BenchRun run_bench_cell(const RunConfig& base, const BenchCell& cell, int seed_index) {
  BenchRun run;
  run.cell = cell;
  run.seed_index = seed_index;
  RunConfig cfg = base;
  cfg.graph.d = cell.d;
  cfg.graph.k = cell.k;
  cfg.n_samples = cell.n;
  cfg.n_steps = cell.t;
  cfg.fit_lag = cell.k;
  const auto s = static_cast<std::uint64_t>(seed_index);
  cfg.graph.seed = derived_rng(base.graph.seed, 0x42454e43, s)();
  cfg.shocks.seed = derived_rng(base.shocks.seed, 0x42454e43, s)();
  cfg.fit.seed = derived_rng(base.fit.seed, 0x42454e43, s)();
  run.graph_seed = cfg.graph.seed;

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    cfg.graph.mean_degree_b0 = std::min(cfg.graph.mean_degree_b0, static_cast<double>(cell.d - 1));
    cfg.graph.mean_degree_lag = std::min(cfg.graph.mean_degree_lag, static_cast<double>(cell.d - 1));
    const Dataset ds = generate_dataset(cfg.graph, cfg.shocks, cell.n, cell.t);
    const double timeout = base.bench.timeout_seconds;
    const EstimateReport rep =
        fit(ds.data, cell.k, cfg.fit, [&](int) { return elapsed() > timeout; });
    run.epochs = rep.epochs_run;
    run.stop_reason = std::string(to_string(rep.stop_reason));
    if (rep.stop_reason == StopReason::Interrupted || elapsed() > timeout) {
      run.status = "timeout";
    } else {
      run.status = "ok";
      run.score = score_graph(rep.w_hat, ds.graph);
      run.score->roc = auroc(rep.w_dense.stacked().cwiseAbs(), ds.graph);
      const PastTensor past = build_past_embedding(ds.data, cell.k);
      const RecoveredShocks sh = recover_shocks(ds.data, past, rep.w_hat, cfg.shocks.significance_threshold);
      if (ds.shocks.values().norm() > 0.0) run.shock_nmse_value = shock_nmse(sh.dense, ds.shocks);
    }
  } catch (const Error& e) {
    run.status = "error:" + std::string(to_string(e.code()));
  }
  run.runtime_seconds = elapsed();
  return run;
}

inline std::vector<BenchCell> bench_cells(const BenchGrid& g) {
  std::vector<BenchCell> cells;
  for (Index d : g.d_values)
    for (Index n : g.n_values)
      for (Index t : g.t_values)
        for (Index k : g.k_values) cells.push_back({d, n, t, k});
  return cells;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline std::string bench_summary(const std::vector<BenchCell>& cells, const std::vector<BenchRun>& runs) {
  std::string out =
      "d,N,T,k,runs,ok,timeouts,errors,shd_mean,shd_std,shd_median,f1_mean,f1_std,runtime_mean,runtime_std\n";
  const auto f = [](double v) { return io::format_double(v); };
  for (const auto& c : cells) {
    std::vector<double> shds, f1s, times;
    int total = 0, timeouts = 0, errors = 0;
    for (const auto& r : runs) {
      if (r.cell.d != c.d || r.cell.n != c.n || r.cell.t != c.t || r.cell.k != c.k) continue;
      ++total;
      times.push_back(r.runtime_seconds);
      if (r.status == "timeout") ++timeouts;
      else if (!r.score) ++errors;
      else {
        shds.push_back(r.score->shd);
        f1s.push_back(r.score->prf.f1);
      }
    }
    const auto [shd_m, shd_s] = mean_std(shds);
    const auto [f1_m, f1_s] = mean_std(f1s);
    const auto [t_m, t_s] = mean_std(times);
    out += std::to_string(c.d) + "," + std::to_string(c.n) + "," + std::to_string(c.t) + "," +
           std::to_string(c.k) + "," + std::to_string(total) + "," + std::to_string(shds.size()) +
           "," + std::to_string(timeouts) + "," + std::to_string(errors) + "," + f(shd_m) + "," +
           f(shd_s) + "," + f(median(shds)) + "," + f(f1_m) + "," + f(f1_s) + "," + f(t_m) + "," +
           f(t_s) + "\n";
  }
  return out;
}

/// Runs the grid, appending one CSV row and one JSON line per run as soon as
/// it finishes. Returns all runs; errors are recorded rather than thrown.
inline std::vector<BenchRun> cmd_bench(const RunConfig& cfg, const fs::path& out_dir,
                                       int workers = 1) {
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "bench_results.csv", std::ios::binary);
  std::ofstream jsonl(out_dir / "bench_results.jsonl", std::ios::binary);
  if (!csv || !jsonl) fail(ErrorCode::Io, "cannot write bench results in " + out_dir.string());
  csv << bench_header() << "\n" << std::flush;

  const auto cells = bench_cells(cfg.bench);
  std::vector<std::pair<std::size_t, int>> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int s = 0; s < cfg.bench.seeds_per_cell; ++s) jobs.emplace_back(c, s);

  std::vector<BenchRun> runs(jobs.size());
  std::mutex out_mutex;
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      BenchRun r = run_bench_cell(cfg, cells[jobs[j].first], jobs[j].second);
      std::lock_guard<std::mutex> lock(out_mutex);
      csv << bench_row(r) << "\n" << std::flush;
      jsonl << bench_json(r).dump() << "\n" << std::flush;
      runs[j] = std::move(r);
    }
  };
  const int n_workers = cfg.bench.parallel_cells ? std::max(1, workers) : 1;
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  io::write_text(out_dir / "bench_summary.csv", bench_summary(cells, runs));
  return runs;
}

// ------------------------------------------------------------------ ingest

struct IngestOptions {
  fs::path prices;
  Index window = 50;
  bool standardize = false;
};

inline TimeSeriesTensor cmd_ingest(const IngestOptions& opts, const fs::path& out_dir) {
  const PricePanel panel = load_price_csv(opts.prices.string());
  const TimeSeriesTensor returns = log_returns(panel, opts.standardize);
  const TimeSeriesTensor windows = windowize(returns, opts.window);
  fs::create_directories(out_dir);
  io::save_tensor(out_dir, "sample", windows);
  Json manifest = io::shape_json(windows.n_samples(), windows.n_steps(), windows.n_vars());
  manifest["tickers"] = panel.tickers;
  manifest["date_first"] = panel.dates.front();
  manifest["date_last"] = panel.dates.back();
  manifest["prices"] = panel.dates.size();
  manifest["returns"] = returns.n_steps();
  manifest["window"] = opts.window;
  manifest["dropped_steps"] = returns.n_steps() - windows.n_samples() * windows.n_steps();
  manifest["standardized"] = opts.standardize;
  manifest["source"] = opts.prices.string();
  io::write_json(out_dir / "manifest.json", manifest);
  return windows;
}

}  // namespace spinsvar::cli
