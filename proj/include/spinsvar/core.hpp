#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "spinsvar/errors.hpp"

namespace spinsvar {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Exact cycle check on the support {(i,j) : |b0(i,j)| > edge_tolerance}.
/// Kahn ordering; a self-loop counts as a cycle.
inline bool is_acyclic_exact(const Matrix& b0, double edge_tolerance = 0.0) {
  if (b0.rows() != b0.cols()) {
    fail(ErrorCode::DimensionMismatch, "is_acyclic_exact: matrix is not square");
  }
  const Index d = b0.rows();
  std::vector<int> indegree(static_cast<std::size_t>(d), 0);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      if (std::abs(b0(i, j)) > edge_tolerance) ++indegree[static_cast<std::size_t>(j)];
    }
  }
  std::vector<Index> ready;
  for (Index j = 0; j < d; ++j) {
    if (indegree[static_cast<std::size_t>(j)] == 0) ready.push_back(j);
  }
  Index visited = 0;
  while (!ready.empty()) {
    const Index i = ready.back();
    ready.pop_back();
    ++visited;
    for (Index j = 0; j < d; ++j) {
      if (std::abs(b0(i, j)) > edge_tolerance &&
          --indegree[static_cast<std::size_t>(j)] == 0) {
        ready.push_back(j);
      }
    }
  }
  return visited == d;
}

/// SVAR coefficients B_0 (instantaneous) and B_1..B_k (lagged), each d x d.
/// Entry (i, j) of B_tau is the edge i -> j at lag tau. The stacked view has
/// block-rows B_0, B_1, ..., B_k.
class WindowGraph {
 public:
  WindowGraph() = default;

  explicit WindowGraph(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) fail(ErrorCode::InvalidArgument, "WindowGraph: needs at least B0");
    const Index d = blocks_.front().rows();
    if (d <= 0) fail(ErrorCode::InvalidArgument, "WindowGraph: d must be positive");
    for (const auto& b : blocks_) {
      if (b.rows() != d || b.cols() != d) {
        fail(ErrorCode::DimensionMismatch, "WindowGraph: every block must be d x d");
      }
      if (!b.allFinite()) fail(ErrorCode::NonFinite, "WindowGraph: non-finite weight");
    }
    if (blocks_.front().diagonal().cwiseAbs().maxCoeff() != 0.0) {
      fail(ErrorCode::InvalidArgument, "WindowGraph: B0 must have a zero diagonal");
    }
    acyclic_ = is_acyclic_exact(blocks_.front(), 0.0);
  }

  static WindowGraph from_stacked(const Matrix& w, Index d, Index k) {
    if (d <= 0 || k < 0) fail(ErrorCode::InvalidArgument, "WindowGraph: bad d or k");
    if (w.rows() != d * (k + 1) || w.cols() != d) {
      fail(ErrorCode::DimensionMismatch,
           "WindowGraph: stacked matrix must be d(k+1) x d, got " +
               std::to_string(w.rows()) + " x " + std::to_string(w.cols()));
    }
    std::vector<Matrix> blocks;
    blocks.reserve(static_cast<std::size_t>(k + 1));
    for (Index tau = 0; tau <= k; ++tau) blocks.emplace_back(w.middleRows(tau * d, d));
    return WindowGraph(std::move(blocks));
  }

  static WindowGraph zeros(Index d, Index k) {
    return from_stacked(Matrix::Zero(d * (k + 1), d), d, k);
  }

  Index d() const { return blocks_.empty() ? 0 : blocks_.front().rows(); }
  Index k() const { return static_cast<Index>(blocks_.size()) - 1; }
  const Matrix& block(Index tau) const { return blocks_.at(static_cast<std::size_t>(tau)); }
  const std::vector<Matrix>& blocks() const { return blocks_; }

  Matrix stacked() const {
    Matrix w(d() * (k() + 1), d());
    for (Index tau = 0; tau <= k(); ++tau) w.middleRows(tau * d(), d()) = block(tau);
    return w;
  }

  /// True when B0 has no directed cycle (exact search, any nonzero is an edge).
  bool validated() const { return acyclic_; }

  friend bool operator==(const WindowGraph& a, const WindowGraph& b) {
    if (a.blocks_.size() != b.blocks_.size()) return false;
    for (std::size_t i = 0; i < a.blocks_.size(); ++i) {
      if (a.blocks_[i] != b.blocks_[i]) return false;
    }
    return true;
  }

 private:
  std::vector<Matrix> blocks_;
  bool acyclic_ = false;
};

namespace detail {
struct SeriesTag {};
struct ShockTag {};
}  // namespace detail

/// N samples of T steps over d variables. Stored as one (N*T) x d matrix,
/// sample n occupying rows [n*T, (n+1)*T).
template <class Tag>
class Tensor {
 public:
  Tensor() = default;

  Tensor(Index n_samples, Index n_steps, Matrix values)
      : n_(n_samples), t_(n_steps), values_(std::move(values)) {
    if (n_ <= 0 || t_ <= 0 || values_.cols() <= 0) {
      fail(ErrorCode::InvalidArgument, "Tensor: N, T and d must be positive");
    }
    if (values_.rows() != n_ * t_) {
      fail(ErrorCode::DimensionMismatch, "Tensor: values must have N*T rows");
    }
    if (!values_.allFinite()) fail(ErrorCode::NonFinite, "Tensor: non-finite entry");
  }

  static Tensor zeros(Index n_samples, Index n_steps, Index n_vars) {
    return Tensor(n_samples, n_steps, Matrix::Zero(n_samples * n_steps, n_vars));
  }

  static Tensor from_samples(const std::vector<Matrix>& samples) {
    if (samples.empty()) fail(ErrorCode::InvalidArgument, "Tensor: no samples");
    const Index t = samples.front().rows();
    const Index d = samples.front().cols();
    Matrix values(static_cast<Index>(samples.size()) * t, d);
    for (std::size_t n = 0; n < samples.size(); ++n) {
      if (samples[n].rows() != t || samples[n].cols() != d) {
        fail(ErrorCode::DimensionMismatch, "Tensor: samples differ in shape");
      }
      values.middleRows(static_cast<Index>(n) * t, t) = samples[n];
    }
    return Tensor(static_cast<Index>(samples.size()), t, std::move(values));
  }

  Index n_samples() const { return n_; }
  Index n_steps() const { return t_; }
  Index n_vars() const { return values_.cols(); }

  const Matrix& values() const { return values_; }
  auto sample(Index n) const { return values_.middleRows(n * t_, t_); }
  double operator()(Index n, Index t, Index i) const { return values_(n * t_ + t, i); }

  template <class Other>
  bool same_shape(const Tensor<Other>& o) const {
    return n_ == o.n_samples() && t_ == o.n_steps() && n_vars() == o.n_vars();
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.n_ == b.n_ && a.t_ == b.t_ && a.values_ == b.values_;
  }

 private:
  Index n_ = 0;
  Index t_ = 0;
  Matrix values_;
};

using TimeSeriesTensor = Tensor<detail::SeriesTag>;
using ShockTensor = Tensor<detail::ShockTag>;

/// Lag-embedded regressors: row (n, t) is (x_t, x_{t-1}, ..., x_{t-k}) with
/// zeros where t - tau < 0.
class PastTensor {
 public:
  PastTensor(Index n_samples, Index n_steps, Index n_vars, Index k, Matrix values)
      : n_(n_samples), t_(n_steps), d_(n_vars), k_(k), values_(std::move(values)) {}

  Index n_samples() const { return n_; }
  Index n_steps() const { return t_; }
  Index n_vars() const { return d_; }
  Index k() const { return k_; }
  const Matrix& values() const { return values_; }
  auto sample(Index n) const { return values_.middleRows(n * t_, t_); }

 private:
  Index n_, t_, d_, k_;
  Matrix values_;
};

inline PastTensor build_past_embedding(const TimeSeriesTensor& x, Index k) {
  if (k < 0) fail(ErrorCode::InvalidArgument, "build_past_embedding: k must be >= 0");
  const Index n = x.n_samples(), t = x.n_steps(), d = x.n_vars();
  Matrix past = Matrix::Zero(n * t, d * (k + 1));
  for (Index s = 0; s < n; ++s) {
    for (Index tau = 0; tau <= k && tau < t; ++tau) {
      past.block(s * t + tau, tau * d, t - tau, d) = x.values().middleRows(s * t, t - tau);
    }
  }
  return PastTensor(n, t, d, k, std::move(past));
}

/// S = X - X_past W.
inline ShockTensor svar_residual(const TimeSeriesTensor& x, const PastTensor& x_past,
                                 const WindowGraph& w) {
  if (x.n_samples() != x_past.n_samples() || x.n_steps() != x_past.n_steps() ||
      x.n_vars() != x_past.n_vars() || w.d() != x.n_vars() || w.k() != x_past.k()) {
    fail(ErrorCode::DimensionMismatch, "svar_residual: shapes are inconsistent");
  }
  Matrix s = x.values();
  s.noalias() -= x_past.values() * w.stacked();
  return ShockTensor(x.n_samples(), x.n_steps(), std::move(s));
}

/// Runs the recurrence x_t = x_t B0 + sum_tau x_{t-tau} B_tau + s_t forward
/// from zero initial conditions.
inline TimeSeriesTensor rollout(const WindowGraph& w, const ShockTensor& s) {
  if (w.d() != s.n_vars()) fail(ErrorCode::DimensionMismatch, "rollout: d mismatch");
  if (!w.validated()) fail(ErrorCode::CyclicGraph, "rollout: B0 contains a cycle");
  const Index n = s.n_samples(), t = s.n_steps(), d = w.d(), k = w.k();

  // x_t (I - B0) = rhs  <=>  (I - B0)^T x_t^T = rhs^T
  const Matrix system = (Matrix::Identity(d, d) - w.block(0)).transpose();
  const Eigen::PartialPivLU<Matrix> lu(system);
  if (!(lu.rcond() > 1e3 * std::numeric_limits<double>::epsilon())) {
    fail(ErrorCode::SingularSystem, "rollout: I - B0 is numerically singular");
  }

  Matrix x = Matrix::Zero(n * t, d);
  std::vector<Matrix> lag_t;
  lag_t.reserve(static_cast<std::size_t>(k));
  for (Index tau = 1; tau <= k; ++tau) lag_t.push_back(w.block(tau).transpose());

#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
  for (Index sample = 0; sample < n; ++sample) {
    Eigen::VectorXd rhs(d);
    const Index base = sample * t;
    for (Index step = 0; step < t; ++step) {
      rhs = s.values().row(base + step).transpose();
      for (Index tau = 1; tau <= k && tau <= step; ++tau) {
        rhs.noalias() += lag_t[static_cast<std::size_t>(tau - 1)] *
                         x.row(base + step - tau).transpose();
      }
      x.row(base + step) = lu.solve(rhs).transpose();
    }
  }
  if (!x.allFinite()) fail(ErrorCode::NonFinite, "rollout: generated non-finite values");
  return TimeSeriesTensor(n, t, std::move(x));
}

/// Largest absolute column sum of the stacked W, i.e. the induced norm that
/// bounds |x_{t,j}| for row-vector dynamics. Below 1 certifies BIBO stability
/// with gain 1 / (1 - margin); above 1 proves nothing.
inline double stability_margin(const WindowGraph& w) {
  return w.stacked().cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace spinsvar
