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

#include "grids/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

namespace grids {

double l2_norm(std::span<const double> v) {
  // Scaled accumulation keeps tiny perturbations from underflowing.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double sum = 0.0;
  for (double x : v) {
    const double y = x / scale;
    sum += y * y;
  }
  return scale * std::sqrt(sum);
}

double snr_db(std::span<const double> x, std::span<const double> delta) {
  if (x.size() != delta.size()) throw InputError("snr_db: length mismatch");
  const double nd = l2_norm(delta);
  if (nd == 0.0) throw InputError("snr_db: zero-energy perturbation");
  return 20.0 * std::log10(l2_norm(x) / nd);
}

double eps_snr(std::span<const double> x, double snr) {
  const double nx = l2_norm(x);
  if (nx == 0.0) throw InputError("eps_snr: silent waveform");
  return nx * std::pow(10.0, -snr / 20.0);
}

std::vector<double> rescale_to_snr(std::span<const double> x, std::span<const double> delta_raw, double snr) {
  if (x.size() != delta_raw.size()) throw InputError("rescale_to_snr: length mismatch");
  const double nr = l2_norm(delta_raw);
  if (nr == 0.0) throw InputError("rescale_to_snr: zero raw perturbation");
  const double factor = eps_snr(x, snr) / nr;
  std::vector<double> out(delta_raw.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = delta_raw[i] * factor;
  return out;
}

std::vector<double> project_to_snr_cap(std::span<const double> delta_raw, double eps) {
  std::vector<double> out(delta_raw.begin(), delta_raw.end());
  const double nr = l2_norm(delta_raw);
  if (nr > eps) {
    const double factor = eps / nr;
    for (auto& v : out) v *= factor;
  }
  return out;
}

std::vector<double> clip_composite(std::span<const double> x, std::span<const double> delta) {
  if (x.size() != delta.size()) throw InputError("clip_composite: length mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(x[i] + delta[i], -1.0, 1.0);
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  // FNV-1a over the tag, folded with the base seed through splitmix64.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = base ^ h;
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

PerturbationOutput finish(const Waveform& x, std::vector<double> delta) {
  PerturbationOutput out;
  out.realized_snr_db = snr_db(x.samples, delta);
  out.perturbed.sample_rate = x.sample_rate;
  out.perturbed.samples = clip_composite(x.samples, delta);
  out.delta = std::move(delta);
  return out;
}

void require_audio(const Waveform& x) {
  if (x.samples.empty()) throw InputError("empty waveform");
  for (double v : x.samples) {
    if (!std::isfinite(v)) throw InputError("waveform contains non-finite samples");
  }
}

}  // namespace

PerturbationOutput gen_gaussian(const Waveform& x, double snr, double sigma, std::uint64_t seed) {
  require_audio(x);
  if (!(sigma > 0.0)) throw InputError("gaussian sigma must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> raw(x.samples.size());
  for (auto& v : raw) v = normal(rng);
  return finish(x, project_to_snr_cap(raw, eps_snr(x.samples, snr)));
}

std::vector<double> fit_noise_length(std::span<const double> noise, std::size_t length, std::uint64_t seed) {
  if (noise.empty()) throw InputError("noise source is empty");
  std::vector<double> out(length);
  if (noise.size() >= length) {
    std::size_t offset = 0;
    if (noise.size() > length) {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<std::size_t> pick(0, noise.size() - length);
      offset = pick(rng);
    }
    std::copy_n(noise.begin() + static_cast<std::ptrdiff_t>(offset), length, out.begin());
  } else {
    for (std::size_t i = 0; i < length; ++i) out[i] = noise[i % noise.size()];
  }
  return out;
}

PerturbationOutput mix_noise(const Waveform& x, std::span<const double> noise, double snr, std::uint64_t seed) {
  require_audio(x);
  if (l2_norm(noise) == 0.0) throw InputError("noise source is silent");
  std::vector<double> fitted = fit_noise_length(noise, x.samples.size(), seed);
  if (l2_norm(fitted) == 0.0) throw InputError("noise segment selected for mixing is silent");
  return finish(x, rescale_to_snr(x.samples, fitted, snr));
}

double pgd_step_size(int t, double eta, double eps) { return eta * eps * (1.0 + 2.0 * std::exp(-t / 20.0)); }

PgdResult pgd_attack(const Waveform& x, const GradientOracle& oracle, double snr, int iters, double eta,
                     std::uint64_t seed, const PgdObserver& observer) {
  require_audio(x);
  if (iters < 1) throw InputError("pgd_attack needs at least one iteration");
  const std::size_t n = x.samples.size();
  const double eps = eps_snr(x.samples, snr);

  PgdResult res;
  res.eps = eps;
  res.seed = seed;
  std::vector<double> delta(n, 0.0);
  for (int t = 0; t < iters; ++t) {
    OracleResult o = oracle(delta);
    if (o.gradient.size() != n) {
      throw ComputationError("oracle gradient length " + std::to_string(o.gradient.size()) + " at iteration " +
                             std::to_string(t) + ", expected " + std::to_string(n));
    }
    if (!std::isfinite(o.loss)) throw ComputationError("non-finite loss at iteration " + std::to_string(t));
    for (double g : o.gradient) {
      if (!std::isfinite(g)) throw ComputationError("non-finite gradient at iteration " + std::to_string(t));
    }
    res.loss_trace.push_back(o.loss);
    const double gnorm = l2_norm(o.gradient);
    if (gnorm > 0.0) {
      const double step = pgd_step_size(t, eta, eps) / gnorm;
      for (std::size_t i = 0; i < n; ++i) delta[i] += step * o.gradient[i];
      delta = project_to_snr_cap(delta, eps);
    }
    res.iterations_run = t + 1;
    if (observer) observer(t, delta);
  }

  const double norm = l2_norm(delta);
  if (norm > 0.0) {
    const double factor = eps / norm;
    for (auto& v : delta) v *= factor;
  } else {
    res.budget_exhausted = false;
    std::cerr << "warning: PGD iterate is zero after " << iters << " iterations; budget not exhausted\n";
  }
  res.final_norm = l2_norm(delta);
  res.final_loss = oracle(delta).loss;
  res.adversarial.sample_rate = x.sample_rate;
  res.adversarial.samples = clip_composite(x.samples, delta);
  res.delta = std::move(delta);
  return res;
}

}  // namespace grids
