// Copyright 2026 The ffu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FFU_IO_HPP_
#define FFU_IO_HPP_

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ffu/errors.hpp"
#include "ffu/matrix.hpp"

namespace ffu {

// Numbers in the repo-wide CSV matrix format carry 17 significant digits,
// enough to round-trip any double.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// CSV matrix format: one row per line, comma-separated entries, no header.
inline std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open for writing: " + path);
  f << matrix_to_csv(m);
  if (!f.good()) throw ParseError("write failed: " + path);
}

inline Matrix matrix_from_csv_text(const std::string& text,
                                   const std::string& origin = "<string>") {
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Skip blank lines (commonly a trailing newline).
    bool blank = true;
    for (char ch : line) {
      if (!std::isspace(static_cast<unsigned char>(ch))) blank = false;
    }
    if (blank) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      size_t consumed = 0;
      double v = 0;
      try {
        v = std::stod(cell, &consumed);
      } catch (const std::exception&) {
        throw ParseError(origin + ":" + std::to_string(lineno) +
                         ": not a number: '" + cell + "'");
      }
      while (consumed < cell.size() &&
             std::isspace(static_cast<unsigned char>(cell[consumed]))) {
        ++consumed;
      }
      if (consumed != cell.size()) {
        throw ParseError(origin + ":" + std::to_string(lineno) +
                         ": trailing junk in cell: '" + cell + "'");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": ragged row (expected " +
                       std::to_string(rows.front().size()) + " cells, got " +
                       std::to_string(row.size()) + ")");
    }
    if (row.empty()) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": empty row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(origin + ": no rows");
  Matrix m(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
  }
  return m;
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return matrix_from_csv_text(buf.str(), path);
}

// One-column CSV convenience wrappers (variance targets, histograms).
inline Vector read_vector_csv(const std::string& path) {
  Matrix m = read_matrix_csv(path);
  if (m.cols() != 1) {
    throw ParseError(path + ": expected one column, got " +
                     std::to_string(m.cols()));
  }
  return m.col(0);
}

inline void write_vector_csv(const std::string& path, const Vector& v) {
  Matrix m(v.size(), 1);
  m.col(0) = v;
  write_matrix_csv(path, m);
}

}  // namespace ffu

#endif  // FFU_IO_HPP_
