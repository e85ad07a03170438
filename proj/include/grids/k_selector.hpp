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
#include <string_view>
#include <vector>

#include "grids/lid.hpp"
#include "grids/lid_pipeline.hpp"

namespace grids {

struct KSweepEntry {
  std::size_t k = 0;
  double delta_overall = 0.0;
  std::array<double, kLayerCount> per_layer_delta{};
  double layer_std = 0.0;  // population std of per_layer_delta
};

enum class SelectionRationale { stability, discriminability, smaller_k };
std::string_view to_string(SelectionRationale r);

struct KSelection {
  std::size_t chosen_k = 0;
  std::vector<std::size_t> retained;  // ascending
  SelectionRationale rationale = SelectionRationale::stability;
};

inline constexpr std::size_t kDefaultKGrid[] = {10, 25, 50, 100, 200};
inline constexpr double kDefaultRetainFraction = 0.9;
/// Absolute tolerance for treating two layer_std values as tied.
inline constexpr double kLayerStdTieTolerance = 1e-9;

KSweepEntry make_sweep_entry(const LidProfile& pert, const LidProfile& clean);

/// One entry per grid value (ascending k) from analyses that already cover the grid.
std::vector<KSweepEntry> sweep(const ConditionAnalysis& pert, const ConditionAnalysis& clean,
                               std::span<const std::size_t> grid);

/// Runs the LID pipeline for both manifests over the grid, then sweeps.
std::vector<KSweepEntry> sweep(const Manifest& pert, const Manifest& clean, std::span<const std::size_t> grid,
                               const AnalysisOptions& options = {});

/// Keeps every k whose overall delta is at least retain_fraction of the best,
/// then picks the smallest layer_std; ties go to the larger delta, then the
/// smaller k. When no delta is positive only the argmax is retained.
KSelection select_k(std::span<const KSweepEntry> entries, double retain_fraction = kDefaultRetainFraction);

}  // namespace grids
