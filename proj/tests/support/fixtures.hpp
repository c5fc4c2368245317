#pragma once

#include <algorithm>
#include <random>

#include "spinsvar/core.hpp"

namespace fixtures {

using spinsvar::Index;
using spinsvar::Matrix;

/// Random window graph with B0 strictly upper triangular under a random
/// relabelling, each entry present with probability `density`, magnitudes in
/// [lo, hi] with random sign.
inline spinsvar::WindowGraph random_graph(Index d, Index k, std::mt19937_64& rng,
                                          double density = 0.3, double lo = 0.1, double hi = 0.5) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution keep(density), neg(0.5);
  std::vector<Index> perm(d);
  for (Index i = 0; i < d; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Matrix> blocks(k + 1, Matrix::Zero(d, d));
  for (Index tau = 0; tau <= k; ++tau) {
    for (Index i = 0; i < d; ++i) {
      for (Index j = 0; j < d; ++j) {
        if (tau == 0 && i >= j) continue;
        if (!keep(rng)) continue;
        const double w = mag(rng) * (neg(rng) ? -1.0 : 1.0);
        if (tau == 0) blocks[0](perm[i], perm[j]) = w;
        else blocks[tau](i, j) = w;
      }
    }
  }
  return spinsvar::WindowGraph(std::move(blocks));
}

/// Rescales a graph so its stability margin (max abs column sum) equals target.
inline spinsvar::WindowGraph with_margin(const spinsvar::WindowGraph& w, double target) {
  Matrix s = w.stacked();
  const double margin = s.cwiseAbs().colwise().sum().maxCoeff();
  if (margin > 0) s *= target / margin;
  return spinsvar::WindowGraph::from_stacked(s, w.d(), w.k());
}

inline Matrix uniform_matrix(Index r, Index c, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = u(rng);
  return m;
}

}  // namespace fixtures
