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

#include "grids/k_selector.hpp"

#include <algorithm>
#include <cmath>

namespace grids {

std::string_view to_string(SelectionRationale r) {
  switch (r) {
    case SelectionRationale::stability: return "stability";
    case SelectionRationale::discriminability: return "discriminability";
    case SelectionRationale::smaller_k: return "smaller_k";
  }
  return "unknown";
}

KSweepEntry make_sweep_entry(const LidProfile& pert, const LidProfile& clean) {
  if (pert.k != clean.k) throw InputError("sweep entry mixes k values");
  if (pert.layers.size() != kLayerCount || clean.layers.size() != kLayerCount) {
    throw InputError("sweep entry needs complete layer profiles");
  }
  KSweepEntry e;
  e.k = pert.k;
  e.delta_overall = delta_lid_overall(pert.overall, clean.overall);
  double mean = 0.0;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    e.per_layer_delta[l] = delta_lid_layer(pert.layers[l], clean.layers[l]);
    mean += e.per_layer_delta[l];
  }
  mean /= static_cast<double>(kLayerCount);
  double var = 0.0;
  for (double d : e.per_layer_delta) var += (d - mean) * (d - mean);
  e.layer_std = std::sqrt(var / static_cast<double>(kLayerCount));
  return e;
}

std::vector<KSweepEntry> sweep(const ConditionAnalysis& pert, const ConditionAnalysis& clean,
                               std::span<const std::size_t> grid) {
  std::vector<KSweepEntry> out;
  for (std::size_t k : normalize_k_grid(grid)) out.push_back(make_sweep_entry(pert.profile(k), clean.profile(k)));
  return out;
}

std::vector<KSweepEntry> sweep(const Manifest& pert, const Manifest& clean, std::span<const std::size_t> grid,
                               const AnalysisOptions& options) {
  AnalysisOptions opts = options;
  opts.features = false;
  const auto ks = normalize_k_grid(grid);
  const ConditionAnalysis clean_a = analyze_condition(clean, ks, opts);
  const ConditionAnalysis pert_a = analyze_condition(pert, ks, opts);
  return sweep(pert_a, clean_a, ks);
}

KSelection select_k(std::span<const KSweepEntry> entries, double retain_fraction) {
  if (entries.empty()) throw InputError("select_k needs at least one sweep entry");
  if (!(retain_fraction > 0.0 && retain_fraction <= 1.0)) throw InputError("retain_fraction must lie in (0, 1]");

  std::vector<KSweepEntry> sorted(entries.begin(), entries.end());
  std::ranges::sort(sorted, {}, &KSweepEntry::k);

  double best = sorted.front().delta_overall;
  for (const auto& e : sorted) best = std::max(best, e.delta_overall);

  std::vector<const KSweepEntry*> retained;
  for (const auto& e : sorted) {
    const bool keep = best > 0.0 ? e.delta_overall >= retain_fraction * best : e.delta_overall == best;
    if (keep) retained.push_back(&e);
  }

  double min_std = retained.front()->layer_std;
  for (const auto* e : retained) min_std = std::min(min_std, e->layer_std);
  std::vector<const KSweepEntry*> stable;
  for (const auto* e : retained) {
    if (e->layer_std <= min_std + kLayerStdTieTolerance) stable.push_back(e);
  }

  KSelection sel;
  for (const auto* e : retained) sel.retained.push_back(e->k);
  if (stable.size() == 1) {
    sel.chosen_k = stable.front()->k;
    sel.rationale = SelectionRationale::stability;
    return sel;
  }
  double max_delta = stable.front()->delta_overall;
  for (const auto* e : stable) max_delta = std::max(max_delta, e->delta_overall);
  std::vector<const KSweepEntry*> strongest;
  for (const auto* e : stable) {
    if (e->delta_overall == max_delta) strongest.push_back(e);
  }
  // `stable` is ordered by k, so the front is the smallest candidate.
  sel.chosen_k = strongest.front()->k;
  sel.rationale = strongest.size() == 1 ? SelectionRationale::discriminability : SelectionRationale::smaller_k;
  return sel;
}

}  // namespace grids
