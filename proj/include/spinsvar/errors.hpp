#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spinsvar {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NonFinite,
  CyclicGraph,
  SingularSystem,
  RejectionBudgetExhausted,
  ExpmOverflow,
  DegenerateResidual,
  SingularLogDet,
  NonFiniteLoss,
  MissingCell,
  NonPositivePrice,
  UnsortedDates,
  MalformedCsv,
  WindowTooLong,
  UndefinedMetric,
  Io,
  Config,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::CyclicGraph: return "CyclicGraph";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::RejectionBudgetExhausted: return "RejectionBudgetExhausted";
    case ErrorCode::ExpmOverflow: return "ExpmOverflow";
    case ErrorCode::DegenerateResidual: return "DegenerateResidual";
    case ErrorCode::SingularLogDet: return "SingularLogDet";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::UnsortedDates: return "UnsortedDates";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::WindowTooLong: return "WindowTooLong";
    case ErrorCode::UndefinedMetric: return "UndefinedMetric";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when optimization aborts; keeps the objective values seen so far.
class FitAborted : public Error {
 public:
  FitAborted(ErrorCode code, const std::string& what, std::vector<double> trace)
      : Error(code, what), trace_(std::move(trace)) {}

  const std::vector<double>& loss_trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace spinsvar
