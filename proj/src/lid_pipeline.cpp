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

#include "grids/lid_pipeline.hpp"

#include <algorithm>

namespace grids {

const LidProfile& ConditionAnalysis::profile(std::size_t k) const {
  const auto it = std::ranges::find(ks, k);
  if (it == ks.end()) throw InputError("no analysis at k=" + std::to_string(k) + " for " + condition.label());
  return profiles[static_cast<std::size_t>(it - ks.begin())];
}

const std::vector<LidFeatureVector>& ConditionAnalysis::features_at(std::size_t k) const {
  const auto it = std::ranges::find(ks, k);
  if (it == ks.end() || features.empty()) {
    throw InputError("no feature vectors at k=" + std::to_string(k) + " for " + condition.label());
  }
  return features[static_cast<std::size_t>(it - ks.begin())];
}

std::vector<std::size_t> normalize_k_grid(std::span<const std::size_t> ks) {
  std::vector<std::size_t> out(ks.begin(), ks.end());
  if (out.empty()) throw InputError("k grid is empty");
  std::ranges::sort(out);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.front() < 2) throw InputError("every k must be at least 2");
  return out;
}

ConditionAnalysis analyze_layers(const ConditionKey& condition, const std::vector<std::string>& raw_ids,
                                 const LayerSource& source, std::span<const std::size_t> ks_in,
                                 const AnalysisOptions& options) {
  ConditionAnalysis out;
  out.condition = condition;
  out.ks = normalize_k_grid(ks_in);
  const std::size_t nk = out.ks.size();
  const std::size_t kmax = out.ks.back();
  const std::size_t n_utt = raw_ids.size();

  std::vector<std::vector<LayerLidSummary>> summaries(nk);
  // utterance_means[k index][utterance][layer]
  std::vector<std::vector<std::vector<HarmonicMean>>> utterance_means;
  if (options.features) {
    utterance_means.assign(nk, std::vector<std::vector<HarmonicMean>>(n_utt, std::vector<HarmonicMean>(kLayerCount)));
  }

  for (std::size_t layer = 1; layer <= kLayerCount; ++layer) {
    std::vector<EmbeddingMatrix> parts = source(layer);
    if (parts.size() != n_utt) {
      throw InputError(condition.label() + ": layer " + std::to_string(layer) + " supplied " +
                       std::to_string(parts.size()) + " utterances, expected " + std::to_string(n_utt));
    }
    auto [pooled, origin] = concat_rows(parts);
    parts.clear();
    if (pooled.rows() < kmax + 1) {
      throw InputError(condition.label() + ": k=" + std::to_string(kmax) + " exceeds the pool of " +
                       std::to_string(pooled.rows()) + " frames at layer " + std::to_string(layer));
    }
    const StandardizedPool pool = standardize(pooled, std::move(origin));
    pooled = EmbeddingMatrix();

    std::vector<HarmonicMean> layer_means(nk);
    const std::size_t n = pool.matrix.rows();
    const std::size_t block = std::max<std::size_t>(1, options.query_block);
    for (std::size_t r0 = 0; r0 < n; r0 += block) {
      const NeighborTable table = knn_rows(pool.matrix, kmax, r0, std::min(n, r0 + block), options.knn);
      for (std::size_t i = 0; i < table.size(); ++i) {
        const auto nd = table[i];
        const FrameOrigin& o = pool.frame_origin[nd.query_row];
        for (std::size_t ki = 0; ki < nk; ++ki) {
          const LocalLidEstimate e = local_lid(nd.distances.first(out.ks[ki]), options.clamp);
          if (!e.valid) continue;
          layer_means[ki].add(e.value);
          if (options.features) utterance_means[ki][o.utterance][layer - 1].add(e.value);
        }
      }
    }
    for (std::size_t ki = 0; ki < nk; ++ki) summaries[ki].push_back(layer_lid(layer_means[ki], n, layer, condition));
  }

  for (std::size_t ki = 0; ki < nk; ++ki) {
    out.profiles.push_back(make_profile(std::move(summaries[ki]), out.ks[ki]));
    if (options.features) {
      std::vector<LidFeatureVector> vecs;
      vecs.reserve(n_utt);
      for (std::size_t u = 0; u < n_utt; ++u) {
        vecs.push_back(utterance_feature_vector(utterance_means[ki][u], raw_ids[u], condition));
      }
      out.features.push_back(std::move(vecs));
    }
  }
  return out;
}

ConditionAnalysis analyze_condition(const Manifest& manifest, std::span<const std::size_t> ks,
                                    const AnalysisOptions& options) {
  std::vector<std::string> ids;
  ids.reserve(manifest.utterances.size());
  for (const auto& u : manifest.utterances) ids.push_back(u.raw_id);
  const LayerSource source = [&manifest](std::size_t layer) {
    std::vector<EmbeddingMatrix> parts;
    parts.reserve(manifest.utterances.size());
    for (const auto& u : manifest.utterances) parts.push_back(read_embedding(u.layer_files[layer - 1]));
    return parts;
  };
  return analyze_layers(manifest.condition, ids, source, ks, options);
}

}  // namespace grids
