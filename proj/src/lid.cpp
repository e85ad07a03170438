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

#include "grids/lid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "grids/errors.hpp"

namespace grids {

LocalLidEstimate local_lid(std::span<const double> distances, const LidClamp& clamp) {
  const std::size_t k = distances.size();
  if (k < 2) return {};
  const double rk = distances[k - 1];
  if (!(rk > kDistanceFloor)) return {};
  double log_sum = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) log_sum += std::log(std::max(distances[i], kDistanceFloor) / rk);
  const double mean_log = log_sum / static_cast<double>(k - 1);
  // mean_log <= 0; zero means every neighbour sits on the k-th radius.
  const double value = mean_log < 0.0 ? -1.0 / mean_log : std::numeric_limits<double>::infinity();
  return {std::clamp(value, clamp.lo, clamp.hi), true};
}

void HarmonicMean::add(double value) {
  const double x = 1.0 / value;
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
  ++count_;
}

double HarmonicMean::value() const {
  if (count_ == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(count_) / (sum_ + compensation_);
}

double harmonic_mean(std::span<const double> values) {
  HarmonicMean h;
  for (double v : values) h.add(v);
  return h.value();
}

LayerLidSummary layer_lid(std::span<const LocalLidEstimate> estimates, std::size_t layer,
                          const ConditionKey& condition) {
  HarmonicMean h;
  for (const auto& e : estimates) {
    if (e.valid) h.add(e.value);
  }
  return layer_lid(h, estimates.size(), layer, condition);
}

LayerLidSummary layer_lid(const HarmonicMean& valid, std::size_t total_count, std::size_t layer,
                          const ConditionKey& condition) {
  if (valid.count() == 0) {
    throw ComputationError("layer " + std::to_string(layer) + " of " + condition.label() +
                           " has no valid local LID estimates");
  }
  return {layer, condition, valid.value(), valid.count(), total_count};
}

double delta_lid_layer(const LayerLidSummary& pert, const LayerLidSummary& clean) {
  if (pert.layer != clean.layer) {
    throw InputError("layer mismatch: " + std::to_string(pert.layer) + " vs " + std::to_string(clean.layer));
  }
  if (pert.condition.model_id != clean.condition.model_id) {
    throw InputError("model mismatch: " + pert.condition.model_id + " vs " + clean.condition.model_id);
  }
  if (clean.condition.perturbation != Perturbation::clean) {
    throw InputError("baseline " + clean.condition.label() + " is not a clean condition");
  }
  return pert.lid - clean.lid;
}

double overall_lid(std::span<const double> layer_lids) {
  if (layer_lids.size() != kLayerCount) {
    throw InputError("overall LID needs " + std::to_string(kLayerCount) + " layers, got " +
                     std::to_string(layer_lids.size()));
  }
  for (std::size_t l = 0; l < layer_lids.size(); ++l) {
    if (!(layer_lids[l] > 0.0) || !std::isfinite(layer_lids[l])) {
      throw InputError("layer " + std::to_string(l + 1) + " LID is missing or non-positive");
    }
  }
  return harmonic_mean(layer_lids);
}

std::vector<double> LidProfile::layer_values() const {
  std::vector<double> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l.lid);
  return out;
}

LidProfile make_profile(std::vector<LayerLidSummary> layers, std::size_t k) {
  LidProfile p;
  p.condition = layers.empty() ? ConditionKey{} : layers.front().condition;
  p.k = k;
  p.layers = std::move(layers);
  p.overall = overall_lid(p.layer_values());
  return p;
}

LidFeatureVector utterance_feature_vector(std::span<const std::vector<LocalLidEstimate>> per_layer,
                                          const std::string& raw_id, const ConditionKey& condition) {
  if (per_layer.size() != kLayerCount) {
    throw InputError("feature vector for '" + raw_id + "' needs " + std::to_string(kLayerCount) + " layers, got " +
                     std::to_string(per_layer.size()));
  }
  std::vector<HarmonicMean> means(kLayerCount);
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    for (const auto& e : per_layer[l]) {
      if (e.valid) means[l].add(e.value);
    }
  }
  return utterance_feature_vector(means, raw_id, condition);
}

LidFeatureVector utterance_feature_vector(std::span<const HarmonicMean> per_layer, const std::string& raw_id,
                                          const ConditionKey& condition) {
  if (per_layer.size() != kLayerCount) {
    throw InputError("feature vector for '" + raw_id + "' needs " + std::to_string(kLayerCount) + " layers, got " +
                     std::to_string(per_layer.size()));
  }
  LidFeatureVector v;
  v.raw_id = raw_id;
  v.normalized_id = normalize_utterance_id(raw_id);
  v.condition = condition;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    if (per_layer[l].count() == 0) {
      throw ComputationError("utterance '" + raw_id + "' has no valid LID estimate at layer " + std::to_string(l + 1));
    }
    v.values[l] = per_layer[l].value();
  }
  return v;
}

}  // namespace grids
