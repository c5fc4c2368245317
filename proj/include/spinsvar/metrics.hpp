#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "spinsvar/core.hpp"

namespace spinsvar {

namespace detail {

inline void require_same_shape(const WindowGraph& a, const WindowGraph& b, const char* who) {
  if (a.d() != b.d() || a.k() != b.k()) {
    fail(ErrorCode::DimensionMismatch, std::string(who) + ": graphs differ in d or k");
  }
}

inline bool is_edge(double w, double threshold) { return (w != 0.0) & (std::abs(w) >= threshold); }

}  // namespace detail

/// Structural Hamming distance between binarized window graphs. Each block is
/// compared on its own: an edge present as i->j in one graph and only as
/// j->i in the other (same block) is a single reversal; every other
/// presence mismatch costs 1.
inline int shd(const WindowGraph& estimate, const WindowGraph& truth, double threshold = 0.0) {
  detail::require_same_shape(estimate, truth, "shd");
  const Index d = truth.d();
  int total = 0;
  for (Index tau = 0; tau <= truth.k(); ++tau) {
    const Matrix& e = estimate.block(tau);
    const Matrix& t = truth.block(tau);
    for (Index i = 0; i < d; ++i) {
      total += detail::is_edge(e(i, i), threshold) != detail::is_edge(t(i, i), threshold);
      for (Index j = i + 1; j < d; ++j) {
        const bool e_ij = detail::is_edge(e(i, j), threshold);
        const bool e_ji = detail::is_edge(e(j, i), threshold);
        const bool t_ij = detail::is_edge(t(i, j), threshold);
        const bool t_ji = detail::is_edge(t(j, i), threshold);
        const bool reversal = (e_ij != e_ji) & (t_ij != t_ji) & (e_ij == t_ji);
        total += int(e_ij != t_ij) + int(e_ji != t_ji) - int(reversal);
      }
    }
  }
  return total;
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // empty estimate
  bool recall_undefined = false;     // empty truth
};

/// Edge-set precision, recall and F1 over the binarized stacked matrices.
inline PrecisionRecall prf1(const WindowGraph& estimate, const WindowGraph& truth,
                            double threshold = 0.0) {
  detail::require_same_shape(estimate, truth, "prf1");
  long tp = 0, predicted = 0, actual = 0;
  for (Index tau = 0; tau <= truth.k(); ++tau) {
    const Matrix& e = estimate.block(tau);
    const Matrix& t = truth.block(tau);
    for (Index i = 0; i < e.size(); ++i) {
      const bool pe = detail::is_edge(e(i), threshold);
      const bool pt = detail::is_edge(t(i), threshold);
      predicted += pe;
      actual += pt;
      tp += pe & pt;
    }
  }
  PrecisionRecall r;
  r.precision_undefined = predicted == 0;
  r.recall_undefined = actual == 0;
  r.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
  r.recall = actual == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(actual);
  const double s = r.precision + r.recall;
  r.f1 = s > 0.0 ? 2.0 * r.precision * r.recall / s : 0.0;
  return r;
}

struct Auroc {
  double value = 0.5;
  bool undefined = false;  // truth all-positive or all-negative
};

/// Rank AUROC of |weights| against truth support, midranks for ties. The
/// structurally-zero B0 diagonal is excluded from the population.
inline Auroc auroc(const Matrix& scores, const WindowGraph& truth) {
  const Index d = truth.d();
  if (scores.rows() != d * (truth.k() + 1) || scores.cols() != d) {
    fail(ErrorCode::DimensionMismatch, "auroc: score matrix does not match the truth shape");
  }
  const Matrix t = truth.stacked();
  std::vector<std::pair<double, bool>> cells;
  cells.reserve(static_cast<std::size_t>(t.size()));
  for (Index j = 0; j < t.cols(); ++j) {
    for (Index i = 0; i < t.rows(); ++i) {
      if (i < d && i == j) continue;
      cells.emplace_back(std::abs(scores(i, j)), t(i, j) != 0.0);
    }
  }
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double positive_rank_sum = 0.0;
  long positives = 0;
  for (std::size_t lo = 0; lo < cells.size();) {
    std::size_t hi = lo;
    while (hi < cells.size() && cells[hi].first == cells[lo].first) ++hi;
    const double midrank = 0.5 * static_cast<double>(lo + 1 + hi);
    for (std::size_t i = lo; i < hi; ++i) {
      if (cells[i].second) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    lo = hi;
  }
  const long negatives = static_cast<long>(cells.size()) - positives;
  if (positives == 0 || negatives == 0) return {0.5, true};
  const double pos = static_cast<double>(positives);
  const double u = positive_rank_sum - pos * (pos + 1.0) / 2.0;
  return {u / (pos * static_cast<double>(negatives)), false};
}

/// ||estimate - truth||_F / ||truth||_F.
inline double nmse(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    fail(ErrorCode::DimensionMismatch, "nmse: shapes differ");
  }
  const double denom = truth.norm();
  if (!(denom > 0.0)) fail(ErrorCode::UndefinedMetric, "nmse: truth has zero norm");
  return (estimate - truth).norm() / denom;
}

inline double nmse(const WindowGraph& estimate, const WindowGraph& truth) {
  detail::require_same_shape(estimate, truth, "nmse");
  return nmse(estimate.stacked(), truth.stacked());
}

inline double shock_nmse(const ShockTensor& s_hat, const ShockTensor& s_true) {
  if (!s_hat.same_shape(s_true)) fail(ErrorCode::DimensionMismatch, "shock_nmse: shapes differ");
  return nmse(s_hat.values(), s_true.values());
}

/// Entrywise mismatch count between the supports {|s| >= threshold}.
inline long shock_shd(const ShockTensor& s_hat, const ShockTensor& s_true, double threshold) {
  if (!s_hat.same_shape(s_true)) fail(ErrorCode::DimensionMismatch, "shock_shd: shapes differ");
  const auto a = (s_hat.values().array().abs() >= threshold) && (s_hat.values().array() != 0.0);
  const auto b = (s_true.values().array().abs() >= threshold) && (s_true.values().array() != 0.0);
  return static_cast<long>((a != b).count());
}

struct GraphScore {
  int shd = 0;
  PrecisionRecall prf;
  Auroc roc;
  double nmse = 0.0;
};

inline GraphScore score_graph(const WindowGraph& estimate, const WindowGraph& truth,
                              double threshold = 0.0) {
  GraphScore s;
  s.shd = shd(estimate, truth, threshold);
  s.prf = prf1(estimate, truth, threshold);
  s.roc = auroc(estimate.stacked().cwiseAbs(), truth);
  s.nmse = nmse(estimate, truth);
  return s;
}

struct ShockScore {
  long shock_shd = 0;
  double shock_nmse = 0.0;
};

struct Alignment {
  long count_significant = 0;
  double fraction_aligned = 0.0;
  bool empty = true;
};

/// Among shocks with |s_{t,i}| >= threshold and t < T-1, the fraction with
/// s (x_{t+1} - (1 + s/2) x_t) > 0, i.e. the shock points the same way as the
/// next move of the series.
inline Alignment alignment_fraction(const ShockTensor& s_hat, const TimeSeriesTensor& x,
                                    double threshold) {
  if (!s_hat.same_shape(x)) fail(ErrorCode::DimensionMismatch, "alignment_fraction: shapes differ");
  if (x.n_steps() < 2) fail(ErrorCode::InvalidArgument, "alignment_fraction: needs T >= 2");
  Alignment a;
  long aligned = 0;
  for (Index n = 0; n < x.n_samples(); ++n) {
    for (Index t = 0; t + 1 < x.n_steps(); ++t) {
      for (Index i = 0; i < x.n_vars(); ++i) {
        const double s = s_hat(n, t, i);
        if (!(std::abs(s) >= threshold) || s == 0.0) continue;
        ++a.count_significant;
        if (s * (x(n, t + 1, i) - (1.0 + s / 2.0) * x(n, t, i)) > 0.0) ++aligned;
      }
    }
  }
  a.empty = a.count_significant == 0;
  a.fraction_aligned =
      a.empty ? 0.0 : static_cast<double>(aligned) / static_cast<double>(a.count_significant);
  return a;
}

}  // namespace spinsvar
