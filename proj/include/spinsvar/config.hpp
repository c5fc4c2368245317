#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spinsvar/estimate.hpp"
#include "spinsvar/io.hpp"
#include "spinsvar/simulate.hpp"

namespace spinsvar {

struct BenchGrid {
  std::vector<Index> d_values{20, 50};
  std::vector<Index> n_values{10};
  std::vector<Index> t_values{1000};
  std::vector<Index> k_values{2};
  int seeds_per_cell = 5;
  double timeout_seconds = 10000.0;
  bool parallel_cells = false;
};

/// Everything a CLI run needs. Every field has a default; unknown keys in a
/// config document are rejected.
struct RunConfig {
  GraphSpec graph;
  ShockSpec shocks;
  Index n_samples = 10;
  Index n_steps = 1000;
  std::string preset;  // empty: follow the shock distribution
  FitConfig fit = FitConfig::bernoulli_default();
  Index fit_lag = 2;
  BenchGrid bench;
  std::string out_dir = "out";

  std::string effective_preset() const {
    if (!preset.empty()) return preset;
    return shocks.is_laplace() ? "laplace-default" : "bernoulli-default";
  }
};

namespace detail {

using io::Json;

inline void reject_unknown(const Json& obj, const std::string& section,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(ErrorCode::Config, "config: '" + section + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) {
      fail(ErrorCode::Config,
           "config: unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

template <class T>
void read_field(const Json& obj, const char* key, const std::string& section, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::Config, "config: key '" + section + "." + key + "' has the wrong type");
  }
}

inline Loss parse_loss(const std::string& s) {
  if (s == "logl1") return Loss::LogL1;
  if (s == "mse") return Loss::Mse;
  fail(ErrorCode::Config, "config: loss must be 'logl1' or 'mse', got '" + s + "'");
}

inline InitKind parse_init(const std::string& s) {
  if (s == "zero") return InitKind::Zero;
  if (s == "uniform") return InitKind::Uniform;
  fail(ErrorCode::Config, "config: init must be 'zero' or 'uniform', got '" + s + "'");
}

inline FitConfig preset_or_throw(const std::string& name) {
  auto cfg = FitConfig::preset(name);
  if (!cfg) fail(ErrorCode::Config, "config: unknown preset '" + name + "'");
  return *cfg;
}

}  // namespace detail

/// Rebuilds cfg.fit from the named preset, then re-applies explicit fit
/// fields from `doc` (may be null). Used when the preset changes after load.
inline void apply_fit_section(RunConfig& cfg, const io::Json& doc) {
  const std::string s = "fit";
  const std::uint64_t seed = cfg.fit.seed;
  cfg.fit = detail::preset_or_throw(cfg.effective_preset());
  cfg.fit.seed = seed;
  if (doc.is_null()) return;
  detail::read_field(doc, "lambda1", s, cfg.fit.lambda1);
  detail::read_field(doc, "lambda2", s, cfg.fit.lambda2);
  detail::read_field(doc, "omega", s, cfg.fit.omega);
  detail::read_field(doc, "max_epochs", s, cfg.fit.max_epochs);
  detail::read_field(doc, "patience", s, cfg.fit.patience);
  detail::read_field(doc, "learning_rate", s, cfg.fit.learning_rate);
  detail::read_field(doc, "adam_beta1", s, cfg.fit.adam_beta1);
  detail::read_field(doc, "adam_beta2", s, cfg.fit.adam_beta2);
  detail::read_field(doc, "adam_epsilon", s, cfg.fit.adam_epsilon);
  detail::read_field(doc, "init_scale", s, cfg.fit.init_scale);
  detail::read_field(doc, "seed", s, cfg.fit.seed);
  if (doc.contains("init")) {
    std::string init;
    detail::read_field(doc, "init", s, init);
    cfg.fit.init = detail::parse_init(init);
  }
  if (doc.contains("loss")) {
    std::string loss;
    detail::read_field(doc, "loss", s, loss);
    cfg.fit.loss = detail::parse_loss(loss);
  }
}

inline RunConfig parse_run_config(const io::Json& doc) {
  using detail::read_field;
  RunConfig cfg;
  if (doc.is_null()) {
    apply_fit_section(cfg, doc);
    return cfg;
  }
  detail::reject_unknown(doc, "", {"graph", "shocks", "fit", "bench", "io"});

  if (doc.contains("graph")) {
    const auto& g = doc.at("graph");
    const std::string s = "graph";
    detail::reject_unknown(g, s, {"d", "k", "mean_degree_b0", "mean_degree_lag", "weight_low",
                                  "weight_high", "seed"});
    read_field(g, "d", s, cfg.graph.d);
    read_field(g, "k", s, cfg.graph.k);
    read_field(g, "mean_degree_b0", s, cfg.graph.mean_degree_b0);
    read_field(g, "mean_degree_lag", s, cfg.graph.mean_degree_lag);
    read_field(g, "weight_low", s, cfg.graph.weight_low);
    read_field(g, "weight_high", s, cfg.graph.weight_high);
    read_field(g, "seed", s, cfg.graph.seed);
  }

  if (doc.contains("shocks")) {
    const auto& sh = doc.at("shocks");
    const std::string s = "shocks";
    detail::reject_unknown(sh, s, {"distribution", "beta", "p", "low", "high", "noise_sigma",
                                   "significance_threshold", "seed", "n_samples", "n_steps"});
    std::string dist = "bernoulli";
    read_field(sh, "distribution", s, dist);
    if (dist == "laplace") {
      LaplaceShocks l;
      read_field(sh, "beta", s, l.beta);
      cfg.shocks.distribution = l;
    } else if (dist == "bernoulli") {
      BernoulliUniformShocks b;
      read_field(sh, "p", s, b.p);
      read_field(sh, "low", s, b.low);
      read_field(sh, "high", s, b.high);
      read_field(sh, "noise_sigma", s, b.noise_sigma);
      cfg.shocks.distribution = b;
    } else {
      fail(ErrorCode::Config, "config: shocks.distribution must be 'laplace' or 'bernoulli'");
    }
    read_field(sh, "significance_threshold", s, cfg.shocks.significance_threshold);
    read_field(sh, "seed", s, cfg.shocks.seed);
    read_field(sh, "n_samples", s, cfg.n_samples);
    read_field(sh, "n_steps", s, cfg.n_steps);
  }

  io::Json fit_doc;
  if (doc.contains("fit")) {
    fit_doc = doc.at("fit");
    detail::reject_unknown(fit_doc, "fit",
                           {"preset", "lambda1", "lambda2", "omega", "max_epochs", "patience",
                            "learning_rate", "adam_beta1", "adam_beta2", "adam_epsilon", "init",
                            "init_scale", "loss", "seed", "lag"});
    read_field(fit_doc, "preset", "fit", cfg.preset);
    read_field(fit_doc, "lag", "fit", cfg.fit_lag);
  }
  apply_fit_section(cfg, fit_doc);

  if (doc.contains("bench")) {
    const auto& b = doc.at("bench");
    const std::string s = "bench";
    detail::reject_unknown(b, s, {"d_values", "n_values", "t_values", "k_values",
                                  "seeds_per_cell", "timeout_seconds", "parallel_cells"});
    read_field(b, "d_values", s, cfg.bench.d_values);
    read_field(b, "n_values", s, cfg.bench.n_values);
    read_field(b, "t_values", s, cfg.bench.t_values);
    read_field(b, "k_values", s, cfg.bench.k_values);
    read_field(b, "seeds_per_cell", s, cfg.bench.seeds_per_cell);
    read_field(b, "timeout_seconds", s, cfg.bench.timeout_seconds);
    read_field(b, "parallel_cells", s, cfg.bench.parallel_cells);
  }

  if (doc.contains("io")) {
    const auto& o = doc.at("io");
    detail::reject_unknown(o, "io", {"out_dir"});
    read_field(o, "out_dir", "io", cfg.out_dir);
  }

  cfg.graph.validate();
  cfg.shocks.validate();
  cfg.fit.validate();
  if (cfg.n_samples <= 0 || cfg.n_steps <= 0) {
    fail(ErrorCode::Config, "config: shocks.n_samples and shocks.n_steps must be positive");
  }
  if (cfg.fit_lag < 0) fail(ErrorCode::Config, "config: fit.lag must be >= 0");
  if (cfg.bench.seeds_per_cell <= 0) fail(ErrorCode::Config, "config: bench.seeds_per_cell must be positive");
  return cfg;
}

inline RunConfig load_run_config(const io::fs::path& path) {
  return parse_run_config(io::read_json(path));
}

inline io::Json to_json(const GraphSpec& g) {
  return {{"d", g.d},
          {"k", g.k},
          {"mean_degree_b0", g.mean_degree_b0},
          {"mean_degree_lag", g.mean_degree_lag},
          {"weight_low", g.weight_low},
          {"weight_high", g.weight_high},
          {"seed", g.seed},
          {"degree_convention", "expected edges per block = d * degree / 2"}};
}

inline io::Json to_json(const ShockSpec& s) {
  io::Json j;
  if (const auto* l = std::get_if<LaplaceShocks>(&s.distribution)) {
    j["distribution"] = "laplace";
    j["beta"] = l->beta;
  } else {
    const auto& b = std::get<BernoulliUniformShocks>(s.distribution);
    j["distribution"] = "bernoulli";
    j["p"] = b.p;
    j["low"] = b.low;
    j["high"] = b.high;
    j["noise_sigma"] = b.noise_sigma;
  }
  j["significance_threshold"] = s.significance_threshold;
  j["seed"] = s.seed;
  return j;
}

inline io::Json to_json(const FitConfig& f) {
  return {{"lambda1", f.lambda1},
          {"lambda2", f.lambda2},
          {"omega", f.omega},
          {"max_epochs", f.max_epochs},
          {"patience", f.patience},
          {"learning_rate", f.learning_rate},
          {"adam_beta1", f.adam_beta1},
          {"adam_beta2", f.adam_beta2},
          {"adam_epsilon", f.adam_epsilon},
          {"init", f.init == InitKind::Zero ? "zero" : "uniform"},
          {"init_scale", f.init_scale},
          {"loss", std::string(to_string(f.loss))},
          {"seed", f.seed}};
}

}  // namespace spinsvar
