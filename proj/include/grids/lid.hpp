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

#include <array>
#include <span>
#include <string>
#include <vector>

#include "grids/embedding_store.hpp"

namespace grids {

/// Distances below this are floored before entering a logarithm; a k-th
/// neighbour radius at or below it makes the estimate invalid.
inline constexpr double kDistanceFloor = 1e-12;

struct LidClamp {
  double lo = 0.01;
  double hi = 10000.0;
};

struct LocalLidEstimate {
  double value = 0.0;
  bool valid = false;
};

/// Maximum-likelihood local LID from one ascending neighbour-distance list
/// r_1 <= ... <= r_k:
///
///   -[ 1/(k-1) * sum_{i<k} ln(r_i / r_k) ]^-1
///
/// clamped into [clamp.lo, clamp.hi]. Never throws on degenerate geometry.
LocalLidEstimate local_lid(std::span<const double> distances, const LidClamp& clamp = {});

/// Neumaier-compensated running harmonic mean.
class HarmonicMean {
 public:
  void add(double value);
  std::size_t count() const { return count_; }
  double value() const;  // NaN when empty

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
  std::size_t count_ = 0;
};

double harmonic_mean(std::span<const double> values);

struct LayerLidSummary {
  std::size_t layer = 0;  // 1-based
  ConditionKey condition;
  double lid = 0.0;
  std::size_t valid_count = 0;
  std::size_t total_count = 0;
};

/// Harmonic mean over the valid estimates. Throws ComputationError when
/// none are valid.
LayerLidSummary layer_lid(std::span<const LocalLidEstimate> estimates, std::size_t layer, const ConditionKey& condition);
/// Same, from an accumulator that has already seen the valid estimates.
LayerLidSummary layer_lid(const HarmonicMean& valid, std::size_t total_count, std::size_t layer,
                          const ConditionKey& condition);

/// Throws InputError on a layer or model mismatch, or when `clean` is not a clean condition.
double delta_lid_layer(const LayerLidSummary& pert, const LayerLidSummary& clean);

/// Harmonic mean of the per-layer values. Throws InputError when the
/// profile does not hold exactly kLayerCount positive values.
double overall_lid(std::span<const double> layer_lids);

inline double delta_lid_overall(double pert_overall, double clean_overall) { return pert_overall - clean_overall; }

struct LidProfile {
  ConditionKey condition;
  std::size_t k = 0;
  std::vector<LayerLidSummary> layers;  // layers 1..L in order
  double overall = 0.0;

  std::vector<double> layer_values() const;
};

/// Builds the profile and its overall value from per-layer summaries.
LidProfile make_profile(std::vector<LayerLidSummary> layers, std::size_t k);

struct LidFeatureVector {
  std::string normalized_id;
  std::string raw_id;
  ConditionKey condition;
  std::array<double, kLayerCount> values{};
};

/// `per_layer[l]` holds the utterance's own frame estimates at layer l+1,
/// each computed against the full condition pool. Throws ComputationError
/// naming the utterance and layer when a layer has no valid estimate.
LidFeatureVector utterance_feature_vector(std::span<const std::vector<LocalLidEstimate>> per_layer,
                                          const std::string& raw_id, const ConditionKey& condition);
LidFeatureVector utterance_feature_vector(std::span<const HarmonicMean> per_layer, const std::string& raw_id,
                                          const ConditionKey& condition);

}  // namespace grids
