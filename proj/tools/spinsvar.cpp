#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "spinsvar/commands.hpp"

namespace {

using spinsvar::io::Json;

int report_error(const std::string& code, const std::string& message, const Json& extra = {}) {
  Json err{{"error", code}, {"message", message}};
  if (extra.is_object()) err.update(extra);
  std::cerr << err.dump() << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = spinsvar::cli;
  CLI::App app{"spinsvar: sparse-input SVAR estimation from time series"};
  app.require_subcommand(1);
  app.fallthrough();

  cli::GlobalOptions opts;
  std::string config_path, out, preset, loss;
  std::uint64_t seed = 0;
  auto* config_opt = app.add_option("--config", config_path, "JSON run configuration");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for graph, shocks and fit");
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides $SPINSVAR_OUT)");
  auto* preset_opt = app.add_option("--preset", preset, "Hyperparameter preset")
                         ->check(CLI::IsMember({"laplace-default", "bernoulli-default"}));
  auto* loss_opt = app.add_option("--loss", loss, "Data term")->check(CLI::IsMember({"logl1", "mse"}));
  app.add_option("--threads", opts.threads, "Worker threads (0 = library default)");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic SVAR dataset");

  auto* fit = app.add_subcommand("fit", "Estimate a window graph from data");
  std::string data_path;
  long lag = -1;
  fit->add_option("--data", data_path, "Dataset directory or a T x d CSV file")->required();
  fit->add_option("-k,--lag", lag, "Maximum lag to fit (default: fit.lag)");

  auto* eval = app.add_subcommand("eval", "Score estimates against ground truth");
  std::vector<std::string> estimates, truths;
  eval->add_option("--estimate", estimates, "Fit output directory (repeatable)")->required();
  eval->add_option("--truth", truths, "Simulation directory (repeatable, paired)")->required();

  auto* bench = app.add_subcommand("bench", "Run a simulate/fit/eval sweep");
  bool parallel_cells = false;
  bench->add_flag("--parallel-cells", parallel_cells, "Run cells concurrently on --threads workers");

  auto* ingest = app.add_subcommand("ingest", "Turn a price CSV into windowed log-returns");
  cli::IngestOptions ingest_opts;
  std::string prices;
  ingest->add_option("--prices", prices, "CSV with header date,<ticker>,...")->required();
  ingest->add_option("--window", ingest_opts.window, "Window length in steps");
  ingest->add_flag("--standardize", ingest_opts.standardize, "Standardize each ticker's returns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("Usage", e.what());
  }

  if (*config_opt) opts.config_path = config_path;
  if (*seed_opt) opts.seed = seed;
  if (*out_opt) opts.out = out;
  if (*preset_opt) opts.preset = preset;
  if (*loss_opt) opts.loss = loss;

  try {
    cli::set_threads(opts.threads);
    spinsvar::RunConfig cfg = cli::resolve_config(opts);
    const auto out_dir = cli::resolve_out_dir(opts, cfg);

    if (*simulate) {
      const auto r = cli::cmd_simulate(cfg, out_dir);
      std::cout << Json{{"out", out_dir.string()}, {"attempts", r.dataset.attempts}}.dump() << "\n";
    } else if (*fit) {
      if (lag >= 0) cfg.fit_lag = lag;
      const auto r = cli::cmd_fit(data_path, cfg, out_dir);
      std::cout << Json{{"out", out_dir.string()},
                        {"epochs", r.report.epochs_run},
                        {"stop_reason", std::string(spinsvar::to_string(r.report.stop_reason))},
                        {"beta_hat", r.report.beta_hat},
                        {"wall_time_seconds", r.wall_seconds}}.dump()
                << "\n";
    } else if (*eval) {
      if (estimates.size() != truths.size()) {
        return report_error("Usage", "--estimate and --truth must be given the same number of times");
      }
      std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pairs;
      for (std::size_t i = 0; i < estimates.size(); ++i) pairs.emplace_back(estimates[i], truths[i]);
      std::cout << cli::csv_header() << "\n";
      cli::cmd_eval(pairs, out_dir, std::cout);
    } else if (*bench) {
      if (parallel_cells) cfg.bench.parallel_cells = true;
      const auto runs = cli::cmd_bench(cfg, out_dir, std::max(1, opts.threads));
      for (const auto& r : runs) {
        if (r.status != "ok" && r.status != "timeout") {
          return report_error("BenchIncomplete", "one or more runs failed; see bench_results.csv",
                              Json{{"out", out_dir.string()}});
        }
      }
      std::cout << Json{{"out", out_dir.string()}, {"runs", runs.size()}}.dump() << "\n";
    } else if (*ingest) {
      ingest_opts.prices = prices;
      const auto x = cli::cmd_ingest(ingest_opts, out_dir);
      std::cout << Json{{"out", out_dir.string()}, {"N", x.n_samples()}, {"T", x.n_steps()},
                        {"d", x.n_vars()}}.dump()
                << "\n";
    }
  } catch (const spinsvar::FitAborted& e) {
    return report_error(std::string(spinsvar::to_string(e.code())), e.what(),
                        Json{{"loss_trace", e.loss_trace()}});
  } catch (const spinsvar::Error& e) {
    return report_error(std::string(spinsvar::to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    return report_error("Internal", e.what());
  }
  return 0;
}
