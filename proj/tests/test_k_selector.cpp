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

#include <doctest.h>

#include <algorithm>
#include <random>

#include "grids/k_selector.hpp"
#include "synthetic.hpp"

using namespace grids;

namespace {

KSweepEntry entry(std::size_t k, double delta, double std_dev) {
  KSweepEntry e;
  e.k = k;
  e.delta_overall = delta;
  e.layer_std = std_dev;
  return e;
}

}  // namespace

TEST_SUITE("k_selector") {
  TEST_CASE("tie-break scenarios") {
    SUBCASE("stability") {
      const std::vector<KSweepEntry> e{entry(50, 10.0, 1.0), entry(100, 9.5, 0.5)};
      const auto s = select_k(e, 0.9);
      CHECK(s.retained == std::vector<std::size_t>{50, 100});
      CHECK(s.chosen_k == 100);
      CHECK(s.rationale == SelectionRationale::stability);
    }
    SUBCASE("smaller k") {
      const std::vector<KSweepEntry> e{entry(100, 10.0, 1.0), entry(50, 10.0, 1.0)};
      const auto s = select_k(e, 0.9);
      CHECK(s.chosen_k == 50);
      CHECK(s.rationale == SelectionRationale::smaller_k);
    }
    SUBCASE("discriminability") {
      const std::vector<KSweepEntry> e{entry(50, 10.0, 1.0), entry(100, 9.5, 1.0 + 5e-10)};
      const auto s = select_k(e, 0.9);
      CHECK(s.chosen_k == 50);
      CHECK(s.rationale == SelectionRationale::discriminability);
    }
  }

  TEST_CASE("retention and edge cases") {
    const std::vector<KSweepEntry> e{entry(10, 5.0, 0.1), entry(25, 9.1, 2.0), entry(50, 10.0, 1.0)};
    CHECK(select_k(e, 0.9).retained == std::vector<std::size_t>{25, 50});
    CHECK(select_k(e, 1.0).retained == std::vector<std::size_t>{50});
    CHECK(select_k(e, 0.5).chosen_k == 10);
    const std::vector<KSweepEntry> neg{entry(10, -1.0, 0.1), entry(25, -0.5, 5.0)};
    const auto s = select_k(neg, 0.9);
    CHECK(s.retained == std::vector<std::size_t>{25});
    CHECK(s.chosen_k == 25);
    CHECK_THROWS_AS(select_k(std::vector<KSweepEntry>{}, 0.9), InputError);
    CHECK_THROWS_AS(select_k(e, 0.0), InputError);
    CHECK_THROWS_AS(select_k(e, 1.1), InputError);
    CHECK(to_string(SelectionRationale::smaller_k) == "smaller_k");
  }

  TEST_CASE("random entries: permutation invariance and monotone shrinkage") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::uniform_int_distribution<int> coarse(0, 3);
    for (int t = 0; t < 300; ++t) {
      std::vector<KSweepEntry> e;
      for (std::size_t k : {10, 25, 50, 100, 200}) e.push_back(entry(k, coarse(rng) + 6.0, coarse(rng) * 0.5));
      const auto base = select_k(e, 0.8);
      std::shuffle(e.begin(), e.end(), rng);
      const auto again = select_k(e, 0.8);
      CHECK(again.chosen_k == base.chosen_k);
      CHECK(again.retained == base.retained);
      CHECK(std::ranges::find(base.retained, base.chosen_k) != base.retained.end());
      std::vector<std::size_t> prev = base.retained;
      for (double f : {0.85, 0.9, 0.95, 1.0}) {
        const auto r = select_k(e, f).retained;
        CHECK(std::ranges::includes(prev, r));
        prev = r;
      }
    }
    (void)u;
  }

  TEST_CASE("sweep entries from profiles; grid order is irrelevant") {
    const ConditionKey clean{"m", Perturbation::clean, std::nullopt};
    const ConditionKey noisy{"m", Perturbation::gaussian, 10};
    const auto corpus = synth::mixture_corpus(5, 30, 8, 2, 3);
    const auto noisy_corpus = synth::add_isotropic_noise(corpus, 0.5, 9, "-gaussian-10");
    auto source = [](const synth::SyntheticCorpus& c) {
      return [&c](std::size_t l) {
        std::vector<EmbeddingMatrix> out;
        for (auto& u : c.layers) out.push_back(u[l - 1]);
        return out;
      };
    };
    const std::vector<std::size_t> grid{5, 10, 20};
    const auto ca = analyze_layers(clean, corpus.ids, source(corpus), grid);
    const auto pa = analyze_layers(noisy, noisy_corpus.ids, source(noisy_corpus), grid);
    const auto entries = sweep(pa, ca, grid);
    REQUIRE(entries.size() == 3);
    for (const auto& e : entries) {
      CHECK(e.delta_overall == doctest::Approx(pa.profile(e.k).overall - ca.profile(e.k).overall));
      CHECK(e.layer_std >= 0.0);
      double mean = 0, sq = 0;
      for (double d : e.per_layer_delta) mean += d / 12.0;
      for (double d : e.per_layer_delta) sq += (d - mean) * (d - mean) / 12.0;
      CHECK(e.layer_std == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
    }
    const std::vector<std::size_t> reversed{20, 5, 10};
    const auto again = sweep(pa, ca, reversed);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& match = *std::ranges::find(again, entries[i].k, &KSweepEntry::k);
      CHECK(match.delta_overall == entries[i].delta_overall);
    }
    const std::vector<std::size_t> single{10};
    CHECK(sweep(pa, ca, single).size() == 1);
  }
}
