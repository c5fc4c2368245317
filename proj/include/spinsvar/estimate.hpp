#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spinsvar/core.hpp"
#include "spinsvar/expm.hpp"
#include "spinsvar/simulate.hpp"

namespace spinsvar {

enum class Loss { LogL1, Mse };
enum class InitKind { Zero, Uniform };
enum class StopReason { EarlyStop, MaxEpochs, Interrupted };

inline std::string_view to_string(Loss loss) { return loss == Loss::LogL1 ? "logl1" : "mse"; }

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::EarlyStop: return "early_stop";
    case StopReason::MaxEpochs: return "max_epochs";
    case StopReason::Interrupted: return "interrupted";
  }
  return "unknown";
}

struct FitConfig {
  double lambda1 = 0.0005;
  double lambda2 = 0.5;
  double omega = 0.09;
  int max_epochs = 10000;
  int patience = 40;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  InitKind init = InitKind::Zero;
  double init_scale = 0.0;
  Loss loss = Loss::LogL1;
  std::uint64_t seed = 0;

  /// Hyperparameters tuned for Laplacian shocks.
  static FitConfig laplace_default() { return FitConfig{}; }

  /// Hyperparameters tuned for Bernoulli-uniform shocks.
  static FitConfig bernoulli_default() {
    FitConfig cfg;
    cfg.lambda1 = 0.0001;
    cfg.lambda2 = 0.1;
    cfg.omega = 0.09;
    return cfg;
  }

  static std::optional<FitConfig> preset(std::string_view name) {
    if (name == "laplace-default") return laplace_default();
    if (name == "bernoulli-default") return bernoulli_default();
    return std::nullopt;
  }

  void validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail(ErrorCode::InvalidArgument, "FitConfig: lambdas must be >= 0");
    if (!(omega >= 0.0)) fail(ErrorCode::InvalidArgument, "FitConfig: omega must be >= 0");
    if (max_epochs <= 0) fail(ErrorCode::InvalidArgument, "FitConfig: max_epochs must be positive");
    if (patience <= 0 || patience > max_epochs) {
      fail(ErrorCode::InvalidArgument, "FitConfig: need 0 < patience <= max_epochs");
    }
    if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "FitConfig: learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
      fail(ErrorCode::InvalidArgument, "FitConfig: Adam betas must lie in [0,1)");
    }
    if (!(adam_epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "FitConfig: adam_epsilon must be > 0");
    if (init == InitKind::Uniform && !(init_scale >= 0.0)) {
      fail(ErrorCode::InvalidArgument, "FitConfig: init scale must be >= 0");
    }
  }
};

/// Minimal log|det| accepted before the objective is declared singular.
constexpr double kMinAbsDet = 1e-300;

/// Breakdown of one objective evaluation.
struct Evaluation {
  double value = 0.0;
  double data_term = 0.0;
  double log_abs_det = 0.0;
  double l1_weights = 0.0;
  double h = 0.0;
  Matrix gradient;
};

namespace detail {

inline double sign(double v) { return (v > 0.0) - (v < 0.0); }

/// Stacked design and targets (all samples), the shape the objective works on.
struct Problem {
  const Matrix& x;
  const Matrix& past;
  Index n;
  Index t;
  Index d;
  Index k;
};

inline Evaluation evaluate(const Matrix& w, const Problem& p, const FitConfig& cfg,
                           bool with_gradient) {
  const Index d = p.d;
  if (w.rows() != d * (p.k + 1) || w.cols() != d) {
    fail(ErrorCode::DimensionMismatch, "objective: W has the wrong shape");
  }
  Evaluation ev;
  Matrix residual = p.x;
  residual.noalias() -= p.past * w;

  const auto b0 = w.topRows(d);
  const Matrix b0_sq = b0.cwiseProduct(b0);
  const Matrix exp_b0_sq = matrix_exponential(b0_sq);
  ev.h = exp_b0_sq.trace() - static_cast<double>(d);
  ev.l1_weights = w.cwiseAbs().sum();
  const double n = static_cast<double>(p.n);

  if (with_gradient) ev.gradient = Matrix::Zero(w.rows(), w.cols());

  if (cfg.loss == Loss::LogL1) {
    const double l1 = residual.cwiseAbs().sum();
    if (!(l1 > 0.0)) {
      fail(ErrorCode::DegenerateResidual, "objective: the L1 residual is zero, log undefined");
    }
    const Matrix i_minus_b0 = Matrix::Identity(d, d) - b0;
    const Eigen::PartialPivLU<Matrix> lu(i_minus_b0);
    double log_abs_det = 0.0;
    const auto& lu_diag = lu.matrixLU().diagonal();
    for (Index i = 0; i < d; ++i) log_abs_det += std::log(std::abs(lu_diag(i)));
    if (!(log_abs_det >= std::log(kMinAbsDet))) {
      fail(ErrorCode::SingularLogDet, "objective: |det(I - B0)| below 1e-300");
    }
    ev.log_abs_det = log_abs_det;
    ev.data_term = n * (std::log(l1) - log_abs_det / static_cast<double>(d));
    if (with_gradient) {
      const Matrix signs = residual.unaryExpr([](double v) { return sign(v); });
      ev.gradient.noalias() = (-n / l1) * (p.past.transpose() * signs);
      ev.gradient.topRows(d) += (n / static_cast<double>(d)) * lu.inverse().transpose();
    }
  } else {
    const double nt = static_cast<double>(p.n * p.t);
    ev.data_term = residual.squaredNorm() / (2.0 * nt);
    if (with_gradient) ev.gradient.noalias() = (-1.0 / nt) * (p.past.transpose() * residual);
  }

  ev.value = ev.data_term + cfg.lambda1 * ev.l1_weights + cfg.lambda2 * ev.h;
  if (with_gradient) {
    ev.gradient += cfg.lambda1 * w.unaryExpr([](double v) { return sign(v); });
    ev.gradient.topRows(d) += cfg.lambda2 * 2.0 * b0.cwiseProduct(exp_b0_sq.transpose());
    ev.gradient.topRows(d).diagonal().setZero();
  }
  return ev;
}

inline void check_shapes(const TimeSeriesTensor& x, const PastTensor& past, Index d) {
  if (x.n_samples() != past.n_samples() || x.n_steps() != past.n_steps() ||
      x.n_vars() != past.n_vars() || d != x.n_vars()) {
    fail(ErrorCode::DimensionMismatch, "shapes of X, X_past and W are inconsistent");
  }
}

}  // namespace detail

/// Scaled objective. LogL1:
///   N { log ||X - X_past W||_1 - (1/d) log|det(I - B0)| } + l1 ||W||_1 + l2 h(B0)
/// Mse: (1/2NT) ||X - X_past W||_2^2 + l1 ||W||_1 + l2 h(B0).
inline double objective(const WindowGraph& w, const TimeSeriesTensor& x, const PastTensor& past,
                        const FitConfig& cfg) {
  detail::check_shapes(x, past, w.d());
  const Matrix stacked = w.stacked();
  const detail::Problem p{x.values(), past.values(), x.n_samples(), x.n_steps(), w.d(), past.k()};
  return detail::evaluate(stacked, p, cfg, false).value;
}

/// Closed-form (sub)gradient of objective() with sign(0) = 0. The diagonal of
/// the B0 block is structurally zero and so is its gradient.
inline Matrix gradient(const WindowGraph& w, const TimeSeriesTensor& x, const PastTensor& past,
                       const FitConfig& cfg) {
  detail::check_shapes(x, past, w.d());
  const Matrix stacked = w.stacked();
  const detail::Problem p{x.values(), past.values(), x.n_samples(), x.n_steps(), w.d(), past.k()};
  return detail::evaluate(stacked, p, cfg, true).gradient;
}

/// beta_hat = ||X - X_past W||_1 / (N T d).
inline double estimate_beta(const TimeSeriesTensor& x, const PastTensor& past, const WindowGraph& w) {
  const ShockTensor r = svar_residual(x, past, w);
  return r.values().cwiseAbs().sum() /
         static_cast<double>(x.n_samples() * x.n_steps() * x.n_vars());
}

/// Zeroes every entry with |w| < omega.
inline WindowGraph threshold_graph(const WindowGraph& w, double omega) {
  Matrix stacked = w.stacked();
  stacked = stacked.unaryExpr([omega](double v) { return std::abs(v) < omega ? 0.0 : v; });
  return WindowGraph::from_stacked(stacked, w.d(), w.k());
}

struct RecoveredShocks {
  ShockTensor dense;
  ShockTensor significant;
};

inline RecoveredShocks recover_shocks(const TimeSeriesTensor& x, const PastTensor& past,
                                      const WindowGraph& w_hat, double shock_threshold) {
  ShockTensor dense = svar_residual(x, past, w_hat);
  Matrix sig = dense.values().unaryExpr(
      [shock_threshold](double v) { return std::abs(v) < shock_threshold ? 0.0 : v; });
  ShockTensor significant(dense.n_samples(), dense.n_steps(), std::move(sig));
  return {std::move(dense), std::move(significant)};
}

struct EstimateReport {
  WindowGraph w_hat;
  WindowGraph w_dense;
  double beta_hat = 0.0;
  std::vector<double> loss_trace;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_objective = 0.0;
  StopReason stop_reason = StopReason::MaxEpochs;
  double h_final = 0.0;
  double omega = 0.0;
  FitConfig config;
};

/// Called before every epoch after the first with the epoch index; returning
/// true stops the fit, so a report always holds at least one evaluated iterate.
using StopCallback = std::function<bool(int)>;

/// Adam on the stacked W from cfg.init, keeping the best iterate; stops when
/// the best objective has not improved by at least 1e-9 for cfg.patience
/// epochs. The best iterate is thresholded at cfg.omega.
inline EstimateReport fit(const TimeSeriesTensor& x, Index k, const FitConfig& cfg,
                          const StopCallback& should_stop = {}) {
  cfg.validate();
  if (k < 0) fail(ErrorCode::InvalidArgument, "fit: k must be >= 0");
  if (x.n_steps() <= k) fail(ErrorCode::InvalidArgument, "fit: need T > k");
  const Index d = x.n_vars();
  const PastTensor past = build_past_embedding(x, k);
  const detail::Problem problem{x.values(), past.values(), x.n_samples(), x.n_steps(), d, k};

  Matrix w = Matrix::Zero(d * (k + 1), d);
  if (cfg.init == InitKind::Uniform && cfg.init_scale > 0.0) {
    Rng rng = derived_rng(cfg.seed, 0x494e4954);
    std::uniform_real_distribution<double> u(-cfg.init_scale, cfg.init_scale);
    for (Index j = 0; j < w.cols(); ++j) {
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    }
    w.topRows(d).diagonal().setZero();
  }

  Matrix m = Matrix::Zero(w.rows(), w.cols());
  Matrix v = Matrix::Zero(w.rows(), w.cols());
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  constexpr double kMinImprovement = 1e-9;
  EstimateReport report;
  report.config = cfg;
  report.omega = cfg.omega;
  report.stop_reason = StopReason::MaxEpochs;
  double best = std::numeric_limits<double>::infinity();
  Matrix best_w = w;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (epoch > 0 && should_stop && should_stop(epoch)) {
      report.stop_reason = StopReason::Interrupted;
      break;
    }
    Evaluation ev;
    try {
      ev = detail::evaluate(w, problem, cfg, true);
    } catch (const Error& e) {
      throw FitAborted(e.code(), std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")",
                       report.loss_trace);
    }
    if (!std::isfinite(ev.value) || !ev.gradient.allFinite()) {
      report.loss_trace.push_back(ev.value);
      throw FitAborted(ErrorCode::NonFiniteLoss,
                       "fit: non-finite loss at epoch " + std::to_string(epoch), report.loss_trace);
    }
    report.loss_trace.push_back(ev.value);
    ++report.epochs_run;

    if (ev.value < best - kMinImprovement) {
      best = ev.value;
      best_w = w;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      report.stop_reason = StopReason::EarlyStop;
      break;
    }

    beta1_power *= cfg.adam_beta1;
    beta2_power *= cfg.adam_beta2;
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * ev.gradient;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * ev.gradient.cwiseAbs2();
    const double step = cfg.learning_rate / (1.0 - beta1_power);
    const double v_scale = 1.0 / (1.0 - beta2_power);
    w.array() -= step * m.array() / ((v.array() * v_scale).sqrt() + cfg.adam_epsilon);
    w.topRows(d).diagonal().setZero();
  }

  report.best_objective = best;
  report.w_dense = WindowGraph::from_stacked(best_w, d, k);
  report.w_hat = threshold_graph(report.w_dense, cfg.omega);
  report.beta_hat = estimate_beta(x, past, report.w_hat);
  report.h_final = acyclicity_h(report.w_hat.block(0));
  return report;
}

}  // namespace spinsvar
