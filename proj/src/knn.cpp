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

#include "grids/knn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

namespace grids {

StandardizedPool standardize(const EmbeddingMatrix& pool, std::vector<FrameOrigin> origin) {
  const std::size_t n = pool.rows();
  const std::size_t d = pool.cols();
  if (n < 2) throw InputError("standardize needs at least 2 rows, got " + std::to_string(n));
  if (!origin.empty() && origin.size() != n) throw InputError("frame_origin length does not match pool rows");
  if (origin.empty()) {
    origin.resize(n);
    for (std::size_t r = 0; r < n; ++r) origin[r] = {0, static_cast<std::uint32_t>(r)};
  }

  StandardizedPool out;
  out.means.assign(d, 0.0);
  out.stds.assign(d, 0.0);
  out.floored.assign(d, false);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = pool.row(r);
    for (std::size_t c = 0; c < d; ++c) out.means[c] += row[c];
  }
  for (auto& m : out.means) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = pool.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = row[c] - out.means[c];
      out.stds[c] += dev * dev;
    }
  }
  std::vector<double> divisor(d);
  for (std::size_t c = 0; c < d; ++c) {
    out.stds[c] = std::sqrt(out.stds[c] / static_cast<double>(n));
    out.floored[c] = out.stds[c] < kStdFloor;
    divisor[c] = out.floored[c] ? kStdFloor : out.stds[c];
  }

  out.matrix = EmbeddingMatrix(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto src = pool.row(r);
    auto dst = out.matrix.row(r);
    for (std::size_t c = 0; c < d; ++c) dst[c] = static_cast<float>((src[c] - out.means[c]) / divisor[c]);
  }
  out.frame_origin = std::move(origin);
  return out;
}

std::pair<EmbeddingMatrix, std::vector<FrameOrigin>> concat_rows(std::span<const EmbeddingMatrix> parts) {
  std::size_t rows = 0;
  const std::size_t cols = parts.empty() ? 0 : parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw InputError("concat_rows: column counts differ");
    rows += p.rows();
  }
  EmbeddingMatrix out(rows, cols);
  std::vector<FrameOrigin> origin;
  origin.reserve(rows);
  std::size_t r = 0;
  for (std::size_t u = 0; u < parts.size(); ++u) {
    for (std::size_t f = 0; f < parts[u].rows(); ++f, ++r) {
      std::ranges::copy(parts[u].row(f), out.row(r).begin());
      origin.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(f)});
    }
  }
  return {std::move(out), std::move(origin)};
}

NeighborTable::NeighborTable(std::size_t first_row, std::size_t row_count, std::size_t k)
    : first_(first_row), count_(row_count), k_(k), dist_(row_count * k), idx_(row_count * k) {}

namespace {

// Candidates per tile; distances for one query are accumulated across a
// whole tile at once so the inner loop vectorises over candidates while
// each pair's sum still runs over dimensions in order.
constexpr std::size_t kTile = 16;
// Query rows per work item.
constexpr std::size_t kQueryBlock = 64;

struct Candidate {
  double sq = 0.0;
  std::uint32_t index = 0;
};

inline bool before(const Candidate& a, const Candidate& b) {
  return a.sq < b.sq || (a.sq == b.sq && a.index < b.index);
}

// Max-heap (by `before`) of the k best candidates seen so far.
class TopK {
 public:
  void reset(std::size_t k) {
    k_ = k;
    heap_.clear();
    heap_.reserve(k);
  }
  void offer(double sq, std::uint32_t index) {
    const auto cmp = [](const Candidate& a, const Candidate& b) { return before(a, b); };
    if (heap_.size() < k_) {
      heap_.push_back({sq, index});
      std::push_heap(heap_.begin(), heap_.end(), cmp);
    } else if (before({sq, index}, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), cmp);
      heap_.back() = {sq, index};
      std::push_heap(heap_.begin(), heap_.end(), cmp);
    }
  }
  double worst() const { return heap_.size() < k_ ? std::numeric_limits<double>::infinity() : heap_.front().sq; }
  void finish(std::span<double> dist, std::span<std::uint32_t> idx) {
    std::sort(heap_.begin(), heap_.end(), before);
    for (std::size_t i = 0; i < heap_.size(); ++i) {
      dist[i] = std::sqrt(heap_[i].sq);
      idx[i] = heap_[i].index;
    }
  }

 private:
  std::size_t k_ = 0;
  std::vector<Candidate> heap_;
};

void process_block(const EmbeddingMatrix& pool, std::size_t k, std::size_t q_begin, std::size_t q_end,
                   NeighborTable& table) {
  const std::size_t n = pool.rows();
  const std::size_t d = pool.cols();
  const std::size_t nq = q_end - q_begin;

  std::vector<double> queries(nq * d);
  for (std::size_t q = 0; q < nq; ++q) {
    const auto row = pool.row(q_begin + q);
    for (std::size_t j = 0; j < d; ++j) queries[q * d + j] = row[j];
  }
  std::vector<TopK> best(nq);
  for (auto& b : best) b.reset(k);

  std::vector<double> tile(d * kTile);
  alignas(64) double acc[kTile];
  for (std::size_t t0 = 0; t0 < n; t0 += kTile) {
    const std::size_t width = std::min(kTile, n - t0);
    for (std::size_t c = 0; c < kTile; ++c) {
      if (c < width) {
        const auto row = pool.row(t0 + c);
        for (std::size_t j = 0; j < d; ++j) tile[j * kTile + c] = row[j];
      } else {
        for (std::size_t j = 0; j < d; ++j) tile[j * kTile + c] = 0.0;
      }
    }
    for (std::size_t q = 0; q < nq; ++q) {
      const double* qv = queries.data() + q * d;
      for (std::size_t c = 0; c < kTile; ++c) acc[c] = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double qj = qv[j];
        const double* tj = tile.data() + j * kTile;
        for (std::size_t c = 0; c < kTile; ++c) {
          const double diff = tj[c] - qj;
          acc[c] += diff * diff;
        }
      }
      const std::size_t self = q_begin + q;
      TopK& top = best[q];
      const double worst = top.worst();
      for (std::size_t c = 0; c < width; ++c) {
        if (acc[c] > worst || t0 + c == self) continue;
        top.offer(acc[c], static_cast<std::uint32_t>(t0 + c));
      }
    }
  }
  for (std::size_t q = 0; q < nq; ++q) {
    const std::size_t local = q_begin + q - table.first_row();
    best[q].finish(table.mutable_distances(local), table.mutable_indices(local));
  }
}

}  // namespace

NeighborTable knn_rows(const EmbeddingMatrix& pool, std::size_t k, std::size_t row_begin, std::size_t row_end,
                       const KnnOptions& options) {
  if (k < 2) throw InputError("k must be at least 2, got " + std::to_string(k));
  if (pool.rows() < k + 1) {
    throw InputError("k=" + std::to_string(k) + " too large for a pool of " + std::to_string(pool.rows()) + " rows");
  }
  if (pool.rows() > std::numeric_limits<std::uint32_t>::max()) throw InputError("pool too large for 32-bit indices");
  if (row_begin > row_end || row_end > pool.rows()) throw InputError("knn_rows: query range out of bounds");

  NeighborTable table(row_begin, row_end - row_begin, k);
  const std::size_t blocks = (row_end - row_begin + kQueryBlock - 1) / kQueryBlock;
  std::size_t workers = options.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.workers;
  workers = std::max<std::size_t>(1, std::min(workers, blocks));

  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t b = next++; b < blocks; b = next++) {
      const std::size_t q0 = row_begin + b * kQueryBlock;
      process_block(pool, k, q0, std::min(row_end, q0 + kQueryBlock), table);
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run);
  }
  return table;
}

NeighborTable knn_all(const EmbeddingMatrix& pool, std::size_t k, const KnnOptions& options) {
  return knn_rows(pool, k, 0, pool.rows(), options);
}

void dump_neighbors(const NeighborTable& table, std::ostream& out) {
  out << "row\tdistances\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto nd = table[i];
    out << nd.query_row << '\t';
    for (std::size_t j = 0; j < nd.distances.size(); ++j) out << (j ? "," : "") << nd.distances[j];
    out << '\n';
  }
}

}  // namespace grids
