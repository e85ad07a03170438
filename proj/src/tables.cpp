// Copyright 2026 The GRIDS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "grids/tables.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "grids/errors.hpp"

namespace grids {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InputError("table has no column '" + std::string(name) + "'");
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw std::logic_error("table row width does not match header");
  rows.push_back(std::move(row));
}

namespace {

void write_line(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].find_first_of("\t\n") != std::string::npos) throw std::logic_error("cell contains a delimiter");
    out << (i ? "\t" : "") << cells[i];
  }
  out << '\n';
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    cells.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cells;
}

}  // namespace

void write_table(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  write_line(out, table.header);
  for (const auto& r : table.rows) write_line(out, r);
  if (!out) throw InputError("write failed: " + path.string());
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open table " + path.string());
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      t.header = split_tabs(line);
      continue;
    }
    if (line.empty()) continue;
    auto cells = split_tabs(line);
    if (cells.size() != t.header.size()) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(t.header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (lineno == 0) throw InputError(path.string() + ": empty table (no header)");
  return t;
}

std::string format_exact(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int digits) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  // Avoid printing "-0.00" for tiny negatives.
  const double scale = std::pow(10.0, digits);
  if (std::round(value * scale) == 0.0) value = 0.0;
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

double parse_number(std::string_view text) {
  if (text == "NA") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw InputError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace grids
