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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "grids/embedding_store.hpp"

namespace grids {

/// Divisor used for columns whose standard deviation falls below it.
inline constexpr double kStdFloor = 1e-8;

/// Where a pooled row came from.
struct FrameOrigin {
  std::uint32_t utterance = 0;
  std::uint32_t frame = 0;
  bool operator==(const FrameOrigin&) const = default;
};

struct StandardizedPool {
  EmbeddingMatrix matrix;
  std::vector<double> means;
  std::vector<double> stds;           // population std before flooring
  std::vector<bool> floored;          // true where the divisor was kStdFloor
  std::vector<FrameOrigin> frame_origin;
};

/// Column-wise z-scoring with the pool's own (population) statistics.
/// `origin` may be empty, in which case rows are labelled (0, row).
/// Throws InputError for fewer than two rows.
StandardizedPool standardize(const EmbeddingMatrix& pool, std::vector<FrameOrigin> origin = {});

/// Concatenates matrices row-wise, recording (utterance index, frame index) per row.
std::pair<EmbeddingMatrix, std::vector<FrameOrigin>> concat_rows(std::span<const EmbeddingMatrix> parts);

/// Ascending distances to one row's nearest neighbours, self excluded.
struct NeighborDistances {
  std::size_t query_row = 0;
  std::span<const double> distances;
  std::span<const std::uint32_t> indices;
};

/// Neighbour lists for a contiguous range of query rows, stored flat.
class NeighborTable {
 public:
  NeighborTable() = default;
  NeighborTable(std::size_t first_row, std::size_t row_count, std::size_t k);

  std::size_t k() const { return k_; }
  std::size_t first_row() const { return first_; }
  std::size_t size() const { return count_; }

  /// `i` is relative to first_row().
  NeighborDistances operator[](std::size_t i) const {
    return {first_ + i, {dist_.data() + i * k_, k_}, {idx_.data() + i * k_, k_}};
  }
  std::span<double> mutable_distances(std::size_t i) { return {dist_.data() + i * k_, k_}; }
  std::span<std::uint32_t> mutable_indices(std::size_t i) { return {idx_.data() + i * k_, k_}; }

  bool operator==(const NeighborTable&) const = default;

 private:
  std::size_t first_ = 0;
  std::size_t count_ = 0;
  std::size_t k_ = 0;
  std::vector<double> dist_;
  std::vector<std::uint32_t> idx_;
};

struct KnnOptions {
  std::size_t workers = 1;  // 0 means hardware concurrency
};

/// Exact Euclidean kNN for every row against all other rows of `pool`.
/// Ties are broken by lower row index. Output does not depend on `workers`.
/// Throws InputError when k < 2 or the pool has fewer than k+1 rows.
NeighborTable knn_all(const EmbeddingMatrix& pool, std::size_t k, const KnnOptions& options = {});
inline NeighborTable knn_all(const StandardizedPool& pool, std::size_t k, const KnnOptions& options = {}) {
  return knn_all(pool.matrix, k, options);
}

/// Same as knn_all but only for query rows [row_begin, row_end).
NeighborTable knn_rows(const EmbeddingMatrix& pool, std::size_t k, std::size_t row_begin, std::size_t row_end,
                       const KnnOptions& options = {});

/// Debug dump: one line per query, "row<TAB>r_1,...,r_k".
void dump_neighbors(const NeighborTable& table, std::ostream& out);

}  // namespace grids
