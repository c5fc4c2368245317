#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinsvar/core.hpp"
#include "spinsvar/ingest.hpp"

namespace spinsvar::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) fail(ErrorCode::Io, "format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

/// Row-major, comma separated, no header.
template <class Derived>
std::string matrix_to_csv(const Eigen::MatrixBase<Derived>& m) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 12);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

template <class Derived>
void write_matrix_csv(const fs::path& path, const Eigen::MatrixBase<Derived>& m) {
  write_text(path, matrix_to_csv(m));
}

inline Matrix read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& field : detail::split_csv_line(line)) {
      double v = 0.0;
      if (!detail::parse_double(detail::trim(field), v)) {
        fail(ErrorCode::MalformedCsv, path.string() + ": bad number '" + field + "' on line " +
                                          std::to_string(line_no));
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      fail(ErrorCode::MalformedCsv, path.string() + ": ragged row on line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  const Index r = static_cast<Index>(rows.size());
  const Index c = rows.empty() ? 0 : static_cast<Index>(rows.front().size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

/// <name>.csv holds the stacked d(k+1) x d matrix, <name>.json holds {d, k}.
inline void save_graph(const fs::path& dir, const std::string& name, const WindowGraph& w) {
  write_matrix_csv(dir / (name + ".csv"), w.stacked());
  write_json(dir / (name + ".json"), Json{{"d", w.d()}, {"k", w.k()}});
}

inline WindowGraph load_graph(const fs::path& dir, const std::string& name) {
  const fs::path csv = dir / (name + ".csv");
  const fs::path meta = dir / (name + ".json");
  if (!fs::exists(csv)) fail(ErrorCode::Io, "missing graph file " + csv.string());
  if (!fs::exists(meta)) fail(ErrorCode::Io, "missing graph sidecar " + meta.string());
  const Json j = read_json(meta);
  return WindowGraph::from_stacked(read_matrix_csv(csv), j.at("d").get<Index>(), j.at("k").get<Index>());
}

inline std::string sample_file_name(const std::string& prefix, Index n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%04ld.csv", static_cast<long>(n));
  return prefix + buf;
}

inline Json shape_json(Index n, Index t, Index d) { return Json{{"N", n}, {"T", t}, {"d", d}}; }

/// Writes <prefix>_0000.csv ... one T x d file per sample.
template <class Tag>
void save_tensor(const fs::path& dir, const std::string& prefix, const Tensor<Tag>& x) {
  for (Index n = 0; n < x.n_samples(); ++n) {
    write_matrix_csv(dir / sample_file_name(prefix, n), x.sample(n));
  }
}

/// Reads the sample files whose shape is recorded in `manifest` ({N, T, d}).
template <class Tag>
Tensor<Tag> load_tensor(const fs::path& dir, const std::string& prefix, const Json& manifest) {
  const Index n = manifest.at("N").get<Index>();
  const Index t = manifest.at("T").get<Index>();
  const Index d = manifest.at("d").get<Index>();
  if (n <= 0 || t <= 0 || d <= 0) fail(ErrorCode::Io, "manifest shape must be positive");
  Matrix values(n * t, d);
  for (Index s = 0; s < n; ++s) {
    const fs::path file = dir / sample_file_name(prefix, s);
    if (!fs::exists(file)) fail(ErrorCode::Io, "missing tensor file " + file.string());
    const Matrix m = read_matrix_csv(file);
    if (m.rows() != t || m.cols() != d) {
      fail(ErrorCode::DimensionMismatch, file.string() + " does not have shape T x d");
    }
    values.middleRows(s * t, t) = m;
  }
  return Tensor<Tag>(n, t, std::move(values));
}

}  // namespace spinsvar::io
