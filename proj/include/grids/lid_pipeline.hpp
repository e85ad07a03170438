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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "grids/embedding_store.hpp"
#include "grids/knn.hpp"
#include "grids/lid.hpp"

namespace grids {

struct AnalysisOptions {
  LidClamp clamp;
  KnnOptions knn;
  std::size_t query_block = 8192;  // rows per kNN batch; bounds neighbour-table memory
  bool features = true;            // also build per-utterance feature vectors
};

/// Everything computed for one condition at a set of neighbourhood sizes.
struct ConditionAnalysis {
  ConditionKey condition;
  std::vector<std::size_t> ks;                          // ascending
  std::vector<LidProfile> profiles;                     // parallel to ks
  std::vector<std::vector<LidFeatureVector>> features;  // [k index][utterance]

  const LidProfile& profile(std::size_t k) const;
  const std::vector<LidFeatureVector>& features_at(std::size_t k) const;
};

/// Supplies the per-utterance matrices of one layer (1-based).
using LayerSource = std::function<std::vector<EmbeddingMatrix>(std::size_t layer)>;

/// Per layer: pool frames across utterances, standardize, run exact kNN at
/// the largest k, then derive every smaller k from the neighbour-list
/// prefix. Layers are loaded one at a time.
ConditionAnalysis analyze_layers(const ConditionKey& condition, const std::vector<std::string>& raw_ids,
                                 const LayerSource& source, std::span<const std::size_t> ks,
                                 const AnalysisOptions& options = {});

ConditionAnalysis analyze_condition(const Manifest& manifest, std::span<const std::size_t> ks,
                                    const AnalysisOptions& options = {});

/// Sorted, de-duplicated copy; throws InputError when empty or when any k < 2.
std::vector<std::size_t> normalize_k_grid(std::span<const std::size_t> ks);

}  // namespace grids
