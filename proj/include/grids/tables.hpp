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

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace grids {

/// Tab-separated table with a fixed header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws InputError when absent.
  std::size_t column(std::string_view name) const;
  void add_row(std::vector<std::string> row);
};

void write_table(const Table& table, const std::filesystem::path& path);
Table read_table(const std::filesystem::path& path);

/// Shortest text that parses back to exactly `value`.
std::string format_exact(double value);
/// Fixed-point with `digits` decimals; "NA" for NaN.
std::string format_fixed(double value, int digits = 2);
/// Parses a number written by format_exact; "NA" gives NaN.
double parse_number(std::string_view text);

}  // namespace grids
