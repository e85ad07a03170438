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

// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "grids/asr_metrics.hpp"
#include "grids/detection.hpp"
#include "grids/k_selector.hpp"
#include "grids/knn.hpp"
#include "grids/lid.hpp"
#include "grids/perturb.hpp"
#include "grids/pipeline.hpp"
#include "grids/tables.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace grids;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome lid_hand_case() {
  const std::vector<double> r{1, 2, 4, 8};
  const auto e = local_lid(r);
  return {e.valid && std::abs(e.value - 0.721348) <= 1e-6, fmt("local_lid=%.9f", e.value)};
}

Outcome synthetic_manifold() {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (std::size_t m : {2u, 5u, 10u}) {
    const auto pool = standardize(synth::ball_points(20000, m, 64, 1000 + m));
    const auto table = knn_all(pool, 100, {0});
    HarmonicMean h;
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto e = local_lid(table[i].distances);
      if (e.valid) h.add(e.value);
    }
    const double lid = h.value();
    ok = ok && std::abs(lid - static_cast<double>(m)) <= 0.15 * static_cast<double>(m);
    detail += "m=" + std::to_string(m) + ":" + fmt("%.3f", lid) + " ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  detail += fmt("runtime=%.1fs", secs);
  return {ok && secs < 120.0, detail};
}

Outcome knn_exactness() {
  const auto m = synth::gaussian_matrix(5000, 32, 99);
  const auto expect = oracle::knn(m, 50);
  const auto single = knn_all(m, 50, {1});
  const auto parallel = knn_all(m, 50, {4});
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto got = single[i];
    if (!std::equal(expect[i].distances.begin(), expect[i].distances.end(), got.distances.begin()) ||
        !std::equal(expect[i].indices.begin(), expect[i].indices.end(), got.indices.begin())) {
      ++mismatches;
    }
  }
  const bool identical = single == parallel;
  return {mismatches == 0 && identical,
          "oracle mismatches=" + std::to_string(mismatches) + " parallel_bit_identical=" + (identical ? "yes" : "no")};
}

Outcome snr_round_trips() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 4000);
  std::uniform_real_distribution<double> snr(-20.0, 80.0), scale(-4.0, 2.0);
  double worst = 0.0;
  bool cap_ok = true;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = len(rng);
    std::normal_distribution<double> gx(0.0, std::pow(10.0, scale(rng))), gd(0.0, std::pow(10.0, scale(rng)));
    std::vector<double> x(n), d(n);
    for (auto& v : x) v = gx(rng);
    for (auto& v : d) v = gd(rng);
    const double s = snr(rng);
    worst = std::max(worst, std::abs(snr_db(x, rescale_to_snr(x, d, s)) - s));
    const double eps = eps_snr(x, s);
    const auto capped = project_to_snr_cap(d, eps);
    if (l2_norm(d) <= eps) cap_ok = cap_ok && capped == d;
    cap_ok = cap_ok && l2_norm(capped) <= eps * (1.0 + 1e-15);
  }
  return {worst <= 1e-9 && cap_ok, fmt("max |snr - s|=%.3g", worst) + " cap_ok=" + (cap_ok ? "yes" : "no")};
}

Outcome pgd_optimum() {
  const Waveform x{{0.6, -0.8}, kSampleRate};
  const GradientOracle lin = [](std::span<const double> d) { return OracleResult{3 * d[0] + 4 * d[1], {3.0, 4.0}}; };
  double max_norm = 0.0;
  const auto r = pgd_attack(x, lin, 0.0, 50, kPgdStepSize, 0,
                            [&](int, std::span<const double> d) { max_norm = std::max(max_norm, l2_norm(d)); });
  const double err = std::max(std::abs(r.delta[0] - 0.6), std::abs(r.delta[1] - 0.8));
  const bool ok = r.eps == 1.0 && r.iterations_run <= 50 && err <= 1e-4 && max_norm <= 1.0 + 1e-9 &&
                  std::abs(r.final_norm - r.eps) <= 1e-12 * r.eps;
  return {ok, fmt("err=%.2e", err) + fmt(" max_iterate_norm=%.6f", max_norm) + fmt(" final_norm=%.15f", r.final_norm)};
}

KSweepEntry entry(std::size_t k, double d, double s) {
  KSweepEntry e;
  e.k = k;
  e.delta_overall = d;
  e.layer_std = s;
  return e;
}

Outcome k_selection() {
  const auto a = select_k(std::vector<KSweepEntry>{entry(50, 10.0, 1.0), entry(100, 9.5, 0.5)}, 0.9);
  const auto b = select_k(std::vector<KSweepEntry>{entry(50, 10.0, 1.0), entry(100, 10.0, 1.0)}, 0.9);
  const auto c = select_k(std::vector<KSweepEntry>{entry(50, 10.0, 1.0), entry(100, 9.5, 1.0)}, 0.9);
  const bool ok = a.chosen_k == 100 && a.rationale == SelectionRationale::stability && a.retained.size() == 2 &&
                  b.chosen_k == 50 && b.rationale == SelectionRationale::smaller_k && c.chosen_k == 50 &&
                  c.rationale == SelectionRationale::discriminability;
  return {ok, "stability->" + std::to_string(a.chosen_k) + " smaller_k->" + std::to_string(b.chosen_k) +
                  " discriminability->" + std::to_string(c.chosen_k)};
}

Outcome wer_oracle() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 20), word(0, 6);
  const char* vocab[] = {"the", "cat", "sat", "on", "a", "mat", "hat"};
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::string> r(len(rng) + 1), h(len(rng));
    for (auto& w : r) w = vocab[word(rng)];
    for (auto& w : h) w = vocab[word(rng)];
    if (wer(r, h) != static_cast<double>(oracle::edit_distance(r, h)) / static_cast<double>(r.size())) ++mismatches;
  }
  const auto sr = [](double c, double p) { return success_rate(std::vector<WerRecord>{{"u", c, p, {}}}, 0.2, 0.3); };
  const bool examples = sr(0.04, 0.50) == 1.0 && sr(0.04, 0.20) == 0.0 && sr(0.25, 0.35) == 0.0;
  return {mismatches == 0 && examples,
          "dp mismatches=" + std::to_string(mismatches) + " sr_examples=" + (examples ? "ok" : "wrong")};
}

Outcome auroc_oracle() {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> level(0, 20);
  std::bernoulli_distribution pos(0.5);
  std::vector<double> s(200);
  std::vector<int> l(200);
  for (int i = 0; i < 200; ++i) {
    l[i] = pos(rng);
    s[i] = level(rng) / 20.0 + 0.1 * l[i];
  }
  const double diff = std::abs(auroc(s, l) - oracle::pairwise_auroc(s, l));
  const std::set<double> distinct(s.begin(), s.end());

  std::size_t leaks = 0;
  for (int t = 0; t < 1000; ++t) {
    std::uniform_int_distribution<int> ng(5, 80), per(1, 8);
    std::vector<std::string> keys;
    const int groups = ng(rng);
    for (int g = 0; g < groups; ++g) {
      const int m = per(rng);
      for (int j = 0; j < m; ++j) keys.push_back(std::to_string(g) + "-0-0-v" + std::to_string(j));
    }
    for (auto& k : keys) k = normalize_utterance_id(k);
    std::shuffle(keys.begin(), keys.end(), rng);
    const auto folds = assign_folds(keys, 5, t);
    for (std::size_t f = 0; f < 5; ++f) {
      std::set<std::string> train;
      for (std::size_t i = 0; i < keys.size(); ++i) {
        if (folds.fold[i] != f) train.insert(keys[i]);
      }
      for (std::size_t i = 0; i < keys.size(); ++i) leaks += folds.fold[i] == f && train.count(keys[i]);
    }
  }
  return {diff <= 1e-12 && leaks == 0, fmt("|rank - pairwise|=%.2e", diff) + " tied_levels=" +
                                           std::to_string(200 - distinct.size()) + " leaks=" + std::to_string(leaks)};
}

Outcome end_to_end() {
  const auto root = synth::scratch_dir("acceptance_e2e");
  const auto clean = synth::mixture_corpus(40, 25, 24, 3, 21);
  RunConfig cfg;
  cfg.command = "lid";
  cfg.k_grid = {20};
  cfg.output_dir = root / "lid";
  cfg.manifests.push_back(synth::write_condition(root, {"synthetic", Perturbation::clean, std::nullopt}, clean));
  const std::vector<std::pair<int, double>> levels{{40, 0.1}, {20, 0.3}, {0, 0.9}};
  for (const auto& [snr, sigma] : levels) {
    const auto noisy = synth::add_isotropic_noise(clean, sigma, 500 + snr, "-gaussian-" + std::to_string(snr));
    cfg.manifests.push_back(synth::write_condition(root, {"synthetic", Perturbation::gaussian, snr}, noisy));
  }
  if (run_command(cfg) != kExitOk) return {false, "lid command failed"};
  std::map<int, double> delta;
  const auto t = read_table(root / "lid/delta_lid.tsv");
  for (const auto& r : t.rows) {
    if (r[1] == "gaussian" && r[4] == "overall") delta[std::stoi(r[2])] = parse_number(r[6]);
  }
  const double d1 = delta[40], d2 = delta[20], d3 = delta[0];
  const bool monotone = d1 > 0.0 && d2 > d1 && d3 > d2;

  std::mt19937_64 rng(3);
  DetectionTask sep;
  sep.positives = synth::gaussian_features(200, 3.0, "p", rng);
  sep.negatives = synth::gaussian_features(400, 0.0, "n", rng);
  const double sep_auc = run_detection(sep, 7).auroc;
  DetectionTask null_task;
  std::bernoulli_distribution coin(0.5);
  for (auto& v : synth::gaussian_features(600, 0.0, "u", rng)) (coin(rng) ? null_task.positives : null_task.negatives).push_back(v);
  const double null_auc = run_detection(null_task, 7).auroc;

  return {monotone && sep_auc > 0.95 && null_auc >= 0.4 && null_auc <= 0.6,
          fmt("dLID(sigma=0.1,0.3,0.9)=%.3f", d1) + fmt(",%.3f", d2) + fmt(",%.3f", d3) +
              fmt(" separable_auroc=%.3f", sep_auc) + fmt(" null_auroc=%.3f", null_auc)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome report_formats() {
  const fs::path fx = GRIDS_FIXTURE_DIR;
  const auto root = synth::scratch_dir("acceptance_report");
  RunConfig cfg;
  cfg.command = "report";
  cfg.delta_lid_tables = {fx / "delta_lid.tsv"};
  cfg.selection_tables = {fx / "selection.tsv"};
  cfg.wer_summaries = {fx / "wer_summary.tsv"};
  cfg.detection_tables = {fx / "detection.tsv"};
  cfg.output_dir = root;
  if (run_command(cfg) != kExitOk) return {false, "report command failed"};
  bool ok = true;
  std::string detail;
  const std::map<std::string, std::pair<std::size_t, std::size_t>> shapes{
      {"table2", {10, 6}}, {"table3", {10, 7}}, {"table4", {15, 6}}};
  for (const auto& [name, shape] : shapes) {
    const auto t = read_table(root / (name + ".tsv"));
    const bool same = slurp(root / (name + ".tsv")) == slurp(fx / ("expected_" + name + ".tsv"));
    const bool shaped = t.rows.size() == shape.first && t.header.size() == shape.second;
    ok = ok && same && shaped;
    detail += name + "=" + std::to_string(t.rows.size()) + "x" + std::to_string(t.header.size()) +
              (same ? "(match) " : "(DIFFERS) ");
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"lid-hand-case", lid_hand_case},
      {"synthetic-manifold-recovery", synthetic_manifold},
      {"knn-exactness", knn_exactness},
      {"snr-round-trips", snr_round_trips},
      {"pgd-analytic-optimum", pgd_optimum},
      {"k-selection-rule", k_selection},
      {"wer-oracle", wer_oracle},
      {"auroc-oracle-and-fold-leakage", auroc_oracle},
      {"end-to-end-synthetic-run", end_to_end},
      {"report-table-formats", report_formats},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
