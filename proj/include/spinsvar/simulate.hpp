#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <variant>

#include "spinsvar/core.hpp"

namespace spinsvar {

/// Erdos-Renyi window graph parameters. "Average degree" follows the
/// undirected convention: a block with degree g has d*g/2 expected edges.
struct GraphSpec {
  Index d = 20;
  Index k = 2;
  double mean_degree_b0 = 5.0;
  double mean_degree_lag = 2.0;
  double weight_low = 0.1;
  double weight_high = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (d <= 0) fail(ErrorCode::InvalidArgument, "GraphSpec: d must be positive");
    if (k < 0) fail(ErrorCode::InvalidArgument, "GraphSpec: k must be non-negative");
    if (!(weight_low > 0.0 && weight_low < weight_high)) {
      fail(ErrorCode::InvalidArgument, "GraphSpec: need 0 < weight_low < weight_high");
    }
    const double max_degree = static_cast<double>(d - 1);
    if (!(mean_degree_b0 >= 0.0 && mean_degree_b0 <= max_degree) ||
        !(mean_degree_lag >= 0.0 && mean_degree_lag <= max_degree)) {
      fail(ErrorCode::InvalidArgument, "GraphSpec: mean degrees must lie in [0, d-1]");
    }
  }
};

struct LaplaceShocks {
  double beta = 1.0 / 3.0;
};

struct BernoulliUniformShocks {
  double p = 0.05;
  double low = 0.1;
  double high = 1.0;
  double noise_sigma = 0.01;
};

struct ShockSpec {
  std::variant<LaplaceShocks, BernoulliUniformShocks> distribution = BernoulliUniformShocks{};
  double significance_threshold = 0.1;
  std::uint64_t seed = 0;

  bool is_laplace() const { return std::holds_alternative<LaplaceShocks>(distribution); }

  void validate() const {
    if (const auto* l = std::get_if<LaplaceShocks>(&distribution)) {
      if (!(l->beta > 0.0)) fail(ErrorCode::InvalidArgument, "ShockSpec: beta must be > 0");
    } else {
      const auto& b = std::get<BernoulliUniformShocks>(distribution);
      if (!(b.p >= 0.0 && b.p <= 1.0)) fail(ErrorCode::InvalidArgument, "ShockSpec: p must lie in [0,1]");
      if (!(b.low > 0.0 && b.low < b.high)) {
        fail(ErrorCode::InvalidArgument, "ShockSpec: need 0 < low < high");
      }
      if (!(b.noise_sigma >= 0.0)) fail(ErrorCode::InvalidArgument, "ShockSpec: noise_sigma must be >= 0");
    }
    if (!(significance_threshold >= 0.0)) {
      fail(ErrorCode::InvalidArgument, "ShockSpec: significance threshold must be >= 0");
    }
  }
};

using Rng = std::mt19937_64;

/// Generator for an independent stream identified by (seed, stream, index).
inline Rng derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

namespace detail {
inline double signed_uniform(Rng& rng, double low, double high) {
  std::uniform_real_distribution<double> magnitude(low, high);
  std::bernoulli_distribution negative(0.5);
  const double u = magnitude(rng);
  return negative(rng) ? -u : u;
}
}  // namespace detail

inline WindowGraph sample_window_graph(const GraphSpec& spec, Rng& rng) {
  spec.validate();
  const Index d = spec.d;
  std::vector<Matrix> blocks(static_cast<std::size_t>(spec.k + 1), Matrix::Zero(d, d));

  // B0: edges only go forward in a random topological order.
  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  if (d > 1) {
    const double pairs = static_cast<double>(d) * static_cast<double>(d - 1) / 2.0;
    const double p0 = std::min(1.0, static_cast<double>(d) * spec.mean_degree_b0 / 2.0 / pairs);
    std::bernoulli_distribution keep(p0);
    for (Index a = 0; a < d; ++a) {
      for (Index b = a + 1; b < d; ++b) {
        if (keep(rng)) {
          blocks[0](order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]) =
              detail::signed_uniform(rng, spec.weight_low, spec.weight_high);
        }
      }
    }
  }

  const double p_lag = std::min(1.0, spec.mean_degree_lag / (2.0 * static_cast<double>(d)));
  std::bernoulli_distribution keep_lag(p_lag);
  for (Index tau = 1; tau <= spec.k; ++tau) {
    for (Index i = 0; i < d; ++i) {
      for (Index j = 0; j < d; ++j) {
        if (keep_lag(rng)) {
          blocks[static_cast<std::size_t>(tau)](i, j) =
              detail::signed_uniform(rng, spec.weight_low, spec.weight_high);
        }
      }
    }
  }
  return WindowGraph(std::move(blocks));
}

/// Inverse-CDF Laplace draw: s = -beta sign(u) ln(1 - 2|u|), u ~ U(-1/2, 1/2).
inline double sample_laplace(Rng& rng, double beta) {
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  double u = uniform(rng);
  while (u == -0.5) u = uniform(rng);
  return -beta * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
}

/// Each sample n draws from its own stream (seed, n), so results do not
/// depend on how samples are scheduled.
inline ShockTensor sample_shocks(const ShockSpec& spec, Index n, Index t, Index d) {
  spec.validate();
  if (n <= 0 || t <= 0 || d <= 0) fail(ErrorCode::InvalidArgument, "sample_shocks: N, T, d must be positive");
  Matrix s(n * t, d);
  constexpr std::uint64_t kShockStream = 0x5348;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
  for (Index sample = 0; sample < n; ++sample) {
    Rng rng = derived_rng(spec.seed, kShockStream, static_cast<std::uint64_t>(sample));
    auto rows = s.middleRows(sample * t, t);
    if (const auto* l = std::get_if<LaplaceShocks>(&spec.distribution)) {
      for (Index step = 0; step < t; ++step) {
        for (Index i = 0; i < d; ++i) rows(step, i) = sample_laplace(rng, l->beta);
      }
    } else {
      const auto& b = std::get<BernoulliUniformShocks>(spec.distribution);
      std::bernoulli_distribution active(b.p);
      std::normal_distribution<double> noise(0.0, b.noise_sigma);
      for (Index step = 0; step < t; ++step) {
        for (Index i = 0; i < d; ++i) {
          double v = active(rng) ? detail::signed_uniform(rng, b.low, b.high) : 0.0;
          if (b.noise_sigma > 0.0) v += noise(rng);
          rows(step, i) = v;
        }
      }
    }
  }
  return ShockTensor(n, t, std::move(s));
}

/// Fraction of Laplace(beta) draws with |s| > omega, i.e. exp(-omega / beta).
inline double laplace_tail_fraction(double beta, double omega) {
  if (!(beta > 0.0)) fail(ErrorCode::InvalidArgument, "laplace_tail_fraction: beta must be > 0");
  if (!(omega >= 0.0)) fail(ErrorCode::InvalidArgument, "laplace_tail_fraction: omega must be >= 0");
  return std::exp(-omega / beta);
}

struct Dataset {
  WindowGraph graph;
  ShockTensor shocks;
  TimeSeriesTensor data;
  int attempts = 1;
  std::uint64_t graph_seed = 0;
  std::uint64_t shock_seed = 0;
};

constexpr int kMaxGenerationAttempts = 100;
constexpr double kRejectionScale = 1e6;

/// Draws a graph and shocks, rolls the SVAR forward and rejects the instance
/// when sum |X| exceeds 1e6 * N * T * d (or turns non-finite). Attempt a uses
/// sub-seeds derived from (seed, a).
inline Dataset generate_dataset(const GraphSpec& graph_spec, const ShockSpec& shock_spec,
                                Index n, Index t) {
  graph_spec.validate();
  shock_spec.validate();
  constexpr std::uint64_t kGraphStream = 0x4752;
  constexpr std::uint64_t kAttemptStream = 0x4154;
  const double bound = kRejectionScale * static_cast<double>(n) * static_cast<double>(t) *
                       static_cast<double>(graph_spec.d);
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    const std::uint64_t a = static_cast<std::uint64_t>(attempt);
    const std::uint64_t graph_seed =
        attempt == 0 ? graph_spec.seed : derived_rng(graph_spec.seed, kAttemptStream, a)();
    const std::uint64_t shock_seed =
        attempt == 0 ? shock_spec.seed : derived_rng(shock_spec.seed, kAttemptStream, a)();

    Rng graph_rng = derived_rng(graph_seed, kGraphStream);
    WindowGraph graph = sample_window_graph(graph_spec, graph_rng);
    ShockSpec attempt_shocks = shock_spec;
    attempt_shocks.seed = shock_seed;
    ShockTensor shocks = sample_shocks(attempt_shocks, n, t, graph_spec.d);
    try {
      TimeSeriesTensor data = rollout(graph, shocks);
      if (data.values().cwiseAbs().sum() > bound) continue;
      return Dataset{std::move(graph), std::move(shocks), std::move(data), attempt + 1,
                     graph_seed, shock_seed};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
    }
  }
  fail(ErrorCode::RejectionBudgetExhausted,
       "generate_dataset: " + std::to_string(kMaxGenerationAttempts) +
           " consecutive instances exceeded the magnitude bound");
}

}  // namespace spinsvar
