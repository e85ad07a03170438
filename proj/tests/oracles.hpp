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

// Deliberately naive reference implementations. They share no code with the
// library and trade speed for obviousness.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grids/embedding_store.hpp"

namespace oracle {

struct Neighbors {
  std::vector<double> distances;
  std::vector<std::uint32_t> indices;
};

// Full O(n^2) scan per query: every pair distance, then a full sort.
inline std::vector<Neighbors> knn(const grids::EmbeddingMatrix& m, std::size_t k) {
  const std::size_t n = m.rows();
  std::vector<Neighbors> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double sq = 0.0;
      for (std::size_t c = 0; c < m.cols(); ++c) {
        const double diff = static_cast<double>(m(i, c)) - static_cast<double>(m(j, c));
        sq += diff * diff;
      }
      all.emplace_back(sq, static_cast<std::uint32_t>(j));
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < k; ++r) {
      out[i].distances.push_back(std::sqrt(all[r].first));
      out[i].indices.push_back(all[r].second);
    }
  }
  return out;
}

// Full (n+1) x (m+1) edit-distance matrix.
inline std::size_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  return d[a.size()][b.size()];
}

// P(score_pos > score_neg) + 0.5 P(tie) by enumerating every pair.
inline double pairwise_auroc(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Two-pass: mean of reciprocals via long double, then invert.
inline double harmonic_mean(std::span<const double> v) {
  long double inv = 0.0L;
  for (double x : v) inv += 1.0L / static_cast<long double>(x);
  return static_cast<double>(static_cast<long double>(v.size()) / inv);
}

}  // namespace oracle
