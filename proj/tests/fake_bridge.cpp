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

// Stand-in for the model bridge's `attack` verb. It runs the library PGD
// loop against a seeded linear objective and writes the same audio and
// sidecar files the real bridge produces. FAKE_BRIDGE_MODE selects faulty
// behaviours for negative tests: "fail", "overbudget", "underexhaust".

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <random>
#include <string>

#include "grids/perturb.hpp"
#include "grids/wav_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fake bridge"};
  auto* attack = app.add_subcommand("attack");
  std::string wav, objective, out, sidecar;
  double snr = 0, eta = grids::kPgdStepSize;
  int iters = grids::kPgdIterations;
  std::uint64_t seed = 0;
  attack->add_option("--wav", wav)->required();
  attack->add_option("--objective", objective)->required()->check(CLI::IsMember({"mse", "ctc"}));
  attack->add_option("--snr", snr)->required();
  attack->add_option("--iters", iters);
  attack->add_option("--eta", eta);
  attack->add_option("--seed", seed);
  attack->add_option("--out", out)->required();
  attack->add_option("--sidecar", sidecar)->required();
  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);

  const char* mode_env = std::getenv("FAKE_BRIDGE_MODE");
  const std::string mode = mode_env ? mode_env : "";
  if (mode == "fail") return 1;

  const grids::Waveform x = grids::read_wav(wav);
  std::mt19937_64 rng(seed ^ (objective == "ctc" ? 0x5555u : 0u));
  std::normal_distribution<double> g;
  std::vector<double> w(x.samples.size());
  for (auto& v : w) v = g(rng);
  const grids::GradientOracle oracle = [&](std::span<const double> d) {
    double loss = 0;
    for (std::size_t i = 0; i < d.size(); ++i) loss += w[i] * d[i];
    return grids::OracleResult{loss, w};
  };
  grids::PgdResult r = grids::pgd_attack(x, oracle, snr, iters, eta, seed);
  if (mode == "overbudget") {
    for (auto& v : r.delta) v *= 2.0;
    r.adversarial.samples = grids::clip_composite(x.samples, r.delta);
  }
  grids::write_wav(r.adversarial, out);
  nlohmann::json meta = {{"kind", objective == "mse" ? "pgd_mse" : "pgd_ctc"},
                         {"target_snr_db", snr},
                         {"realized_snr_db", mode == "underexhaust" ? snr + 1.0 : grids::snr_db(x.samples, r.delta)},
                         {"seed", seed},
                         {"iterations", r.iterations_run},
                         {"eta", eta},
                         {"loss_trace", r.loss_trace},
                         {"source", wav}};
  std::ofstream(sidecar) << meta.dump(2) << '\n';
  return 0;
}
