#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spinsvar/core.hpp"

namespace spinsvar {

/// Closing prices, one row per date and one column per ticker.
struct PricePanel {
  std::vector<std::string> tickers;
  std::vector<std::string> dates;
  Matrix values;  // T x d, strictly positive
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline bool parse_double(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

/// Reads `date,<ticker>,...` with one row per date. Row numbers in error
/// messages are 1-based file lines.
inline PricePanel load_price_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "load_price_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::MalformedCsv, "load_price_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);
  if (header.size() < 2 || header.front() != "date") {
    fail(ErrorCode::MalformedCsv, "load_price_csv: header must be 'date,<ticker>,...'");
  }
  PricePanel panel;
  panel.tickers.assign(header.begin() + 1, header.end());
  const std::size_t d = panel.tickers.size();

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() > d + 1) {
      fail(ErrorCode::MalformedCsv, "load_price_csv: too many fields on row " + std::to_string(line_no));
    }
    fields.resize(d + 1);
    const std::string date = detail::trim(fields[0]);
    if (date.empty()) {
      fail(ErrorCode::MissingCell, "load_price_csv: missing date on row " + std::to_string(line_no));
    }
    if (!panel.dates.empty() && !(panel.dates.back() < date)) {
      fail(ErrorCode::UnsortedDates, "load_price_csv: date " + date + " on row " +
                                         std::to_string(line_no) + " does not follow " +
                                         panel.dates.back());
    }
    std::vector<double> row(d);
    for (std::size_t c = 0; c < d; ++c) {
      const std::string cell = detail::trim(fields[c + 1]);
      const std::string where = "row " + std::to_string(line_no) + ", column " + panel.tickers[c];
      if (cell.empty()) fail(ErrorCode::MissingCell, "load_price_csv: missing cell at " + where);
      double v = 0.0;
      if (!detail::parse_double(cell, v) || !std::isfinite(v)) {
        fail(ErrorCode::MalformedCsv, "load_price_csv: not a number '" + cell + "' at " + where);
      }
      if (!(v > 0.0)) fail(ErrorCode::NonPositivePrice, "load_price_csv: non-positive price at " + where);
      row[c] = v;
    }
    panel.dates.push_back(date);
    rows.push_back(std::move(row));
  }
  panel.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      panel.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
  }
  return panel;
}

/// x_{t,i} = log(y_{t+1,i} / y_{t,i}); optionally standardized per ticker to
/// zero mean and unit variance (constant series are only centered).
inline TimeSeriesTensor log_returns(const PricePanel& panel, bool standardize = false) {
  const Index t = panel.values.rows();
  if (t < 2) fail(ErrorCode::InvalidArgument, "log_returns: need at least two dates");
  if (!(panel.values.array() > 0.0).all()) {
    fail(ErrorCode::NonPositivePrice, "log_returns: prices must be strictly positive");
  }
  Matrix x(t - 1, panel.values.cols());
  for (Index r = 0; r + 1 < t; ++r) {
    for (Index c = 0; c < x.cols(); ++c) {
      x(r, c) = std::log(panel.values(r + 1, c) / panel.values(r, c));
    }
  }
  if (standardize) {
    for (Index c = 0; c < x.cols(); ++c) {
      auto col = x.col(c);
      col.array() -= col.mean();
      const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(col.size()));
      if (sd > 0.0) col /= sd;
    }
  }
  return TimeSeriesTensor(1, t - 1, std::move(x));
}

/// Splits a single series into floor(T/L) consecutive windows of length L,
/// dropping the remainder.
inline TimeSeriesTensor windowize(const TimeSeriesTensor& x, Index window) {
  if (x.n_samples() != 1) fail(ErrorCode::InvalidArgument, "windowize: expects a single series");
  if (window < 1) fail(ErrorCode::InvalidArgument, "windowize: window must be >= 1");
  const Index count = x.n_steps() / window;
  if (count == 0) {
    fail(ErrorCode::WindowTooLong, "windowize: window " + std::to_string(window) +
                                       " exceeds series length " + std::to_string(x.n_steps()));
  }
  return TimeSeriesTensor(count, window, x.values().topRows(count * window));
}

}  // namespace spinsvar
