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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grids/embedding_store.hpp"

namespace grids {

inline constexpr int kSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
};

double l2_norm(std::span<const double> v);

/// 20 log10(||x|| / ||delta||). Throws InputError on length mismatch or a zero-energy delta.
double snr_db(std::span<const double> x, std::span<const double> delta);

/// ||x|| 10^(-s/20). Throws InputError for silent x.
double eps_snr(std::span<const double> x, double snr);

/// Rescales delta_raw to norm eps_snr(x, s), keeping its direction.
std::vector<double> rescale_to_snr(std::span<const double> x, std::span<const double> delta_raw, double snr);

/// Projects onto the l2 ball of radius eps: delta_raw * min(1, eps/||delta_raw||).
std::vector<double> project_to_snr_cap(std::span<const double> delta_raw, double eps);

/// Elementwise clip(x + delta, -1, 1).
std::vector<double> clip_composite(std::span<const double> x, std::span<const double> delta);

struct PerturbationOutput {
  Waveform perturbed;         // clipped composite
  std::vector<double> delta;  // pre-clip perturbation
  double realized_snr_db = 0.0;  // snr_db(x, delta), before clipping
};

inline constexpr double kGaussianSigma = 0.01;
inline constexpr int kPgdIterations = 300;
inline constexpr double kPgdStepSize = 0.01;

/// i.i.d. N(0, sigma^2) noise, capped to the SNR budget, clipped composite.
PerturbationOutput gen_gaussian(const Waveform& x, double snr, double sigma, std::uint64_t seed);

/// Fits `noise` to x's length (tile-then-trim when shorter, seeded random
/// crop when longer), rescales to the target SNR and clips the composite.
PerturbationOutput mix_noise(const Waveform& x, std::span<const double> noise, double snr, std::uint64_t seed);

/// The length-fitting step of mix_noise, exposed for inspection.
std::vector<double> fit_noise_length(std::span<const double> noise, std::size_t length, std::uint64_t seed);

struct OracleResult {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Loss and gradient of the adversarial objective with respect to delta.
using GradientOracle = std::function<OracleResult(std::span<const double> delta)>;

struct PgdResult {
  std::vector<double> delta;  // after the final rescale, before clipping
  Waveform adversarial;       // clip(x + delta, -1, 1)
  double final_loss = 0.0;    // oracle loss at the returned delta
  int iterations_run = 0;
  double final_norm = 0.0;
  double eps = 0.0;
  bool budget_exhausted = true;  // false only if the iterate was still zero
  std::uint64_t seed = 0;
  std::vector<double> loss_trace;  // loss at delta_t, t = 0..iters-1
};

/// Step size for iteration t (t starts at 0).
double pgd_step_size(int t, double eta, double eps);

/// Called after each projected update with (t, delta_{t+1}).
using PgdObserver = std::function<void(int, std::span<const double>)>;

/// Normalised-gradient l2 PGD ascent from delta_0 = 0:
///
///   delta_{t+1} = Proj_eps(delta_t + alpha_t g_t / ||g_t||),
///   alpha_t = eta * eps * (1 + 2 exp(-t/20)),
///
/// followed by a rescale to ||delta|| = eps and a clip of the composite.
/// Zero gradients skip the update; non-finite ones throw ComputationError.
/// `seed` is recorded for sidecars; the loop itself is deterministic.
PgdResult pgd_attack(const Waveform& x, const GradientOracle& oracle, double snr, int iters = kPgdIterations,
                     double eta = kPgdStepSize, std::uint64_t seed = 0, const PgdObserver& observer = {});

/// Stable 64-bit seed derivation for per-utterance streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace grids
