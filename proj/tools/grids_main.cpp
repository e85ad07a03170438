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

#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "grids/pipeline.hpp"

namespace {

void add_common(CLI::App& sub, grids::RunConfig& cfg) {
  sub.add_option("--data-root", cfg.data_root, "Directory that relative input paths resolve against")
      ->envname("GRIDS_DATA_ROOT");
  sub.add_option("-o,--out", cfg.output_dir, "Output directory")->capture_default_str();
  sub.add_option("--workers", cfg.workers, "Worker threads (0: all cores)")->capture_default_str();
  sub.add_option("--seed", cfg.seed, "Base random seed")->capture_default_str();
  sub.add_option("--model", cfg.models, "Restrict to these model ids");
  sub.add_option("--perturbation", cfg.perturbations, "Restrict to these perturbation kinds");
  sub.add_option("--snr", cfg.snrs, "Restrict to these SNR levels (dB)");
}

void add_lid_options(CLI::App& sub, grids::RunConfig& cfg) {
  sub.add_option("manifests", cfg.manifests, "Condition manifests (JSON)")->required();
  sub.add_option("-k,--k-grid", cfg.k_grid, "Neighbourhood sizes")->capture_default_str();
  sub.add_option("--clamp-lo", cfg.clamp_lo, "Lower clamp for local estimates")->capture_default_str();
  sub.add_option("--clamp-hi", cfg.clamp_hi, "Upper clamp for local estimates")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  grids::RunConfig cfg;
  CLI::App app{"LID diagnostics for layer-wise speech model embeddings"};
  app.set_config("--config", "", "INI/TOML file with option values");
  app.require_subcommand(1);
  app.fallthrough();

  auto* perturb = app.add_subcommand("perturb", "Generate perturbed waveforms at fixed SNR levels");
  add_common(*perturb, cfg);
  perturb->add_option("--clean-dir", cfg.clean_dir, "Directory of clean 16 kHz .wav files")->required();
  perturb->add_option("--kinds", cfg.kinds, "gaussian, babble, speech, pgd_mse, pgd_ctc")->capture_default_str();
  perturb->add_option("--levels", cfg.snr_levels, "Target SNR levels (dB)")->capture_default_str();
  perturb->add_option("--babble-source", cfg.babble_source, "Babble clip or directory of clips");
  perturb->add_option("--speech-source", cfg.speech_source, "Directory of competing-talker utterances");
  perturb->add_option("--sigma", cfg.sigma, "Gaussian noise scale before rescaling")->capture_default_str();
  perturb->add_option("--iters", cfg.iterations, "PGD iterations")->capture_default_str();
  perturb->add_option("--eta", cfg.eta, "PGD base step size")->capture_default_str();
  perturb->add_option("--bridge-cmd", cfg.bridge_cmd, "Command that runs the model bridge for PGD kinds");
  perturb->add_option("--bridge-dir", cfg.bridge_dir, "Existing bridge outputs laid out as <kind>/<snr>/<id>.wav");
  const std::map<std::string, grids::WavEncoding> encodings{{"float32", grids::WavEncoding::float32},
                                                             {"pcm16", grids::WavEncoding::pcm16}};
  perturb->add_option("--encoding", cfg.encoding, "Output sample format")
      ->transform(CLI::CheckedTransformer(encodings, CLI::ignore_case));

  auto* lid = app.add_subcommand("lid", "Layer-wise LID profiles, delta-LID and utterance features");
  add_common(*lid, cfg);
  add_lid_options(*lid, cfg);

  auto* ksweep = app.add_subcommand("ksweep", "Sweep k and select a neighbourhood size per condition");
  add_common(*ksweep, cfg);
  add_lid_options(*ksweep, cfg);
  ksweep->add_option("--retain-fraction", cfg.retain_fraction, "Keep k whose delta reaches this share of the max")
      ->capture_default_str();

  auto* wer = app.add_subcommand("wer", "Word error rates, delta-WER and attack success rate");
  add_common(*wer, cfg);
  wer->add_option("--asr-model", cfg.model, "Model id the hypotheses came from")->required();
  wer->add_option("--ref", cfg.references, "Reference transcripts")->required();
  wer->add_option("--clean-hyp", cfg.clean_hyp, "Hypotheses on clean audio")->required();
  wer->add_option("--hyp", cfg.pert_hyps, "perturbation:snr=path, repeatable")->required();
  wer->add_option("--gamma", cfg.gamma, "Minimum WER increase for a successful attack")->capture_default_str();
  wer->add_option("--tau", cfg.tau, "Minimum perturbed WER for a successful attack")->capture_default_str();

  auto* detect = app.add_subcommand("detect", "Cross-validated adversarial detection from LID features");
  add_common(*detect, cfg);
  detect->add_option("features", cfg.feature_tables, "features.tsv tables from 'lid'")->required();
  detect->add_option("--feature-k", cfg.feature_k, "k of the feature vectors to use (0: the only one present)");
  detect->add_option("--folds", cfg.folds, "Cross-validation folds")->capture_default_str();
  detect->add_option("--lambda", cfg.lambda, "L2 penalty on logistic weights")->capture_default_str();
  detect->add_option("--wer-summary", cfg.wer_summaries, "wer_summary.tsv tables supplying success rates");

  auto* report = app.add_subcommand("report", "Assemble summary tables from earlier outputs");
  add_common(*report, cfg);
  report->add_option("--delta-lid", cfg.delta_lid_tables, "delta_lid.tsv tables")->required();
  report->add_option("--selection", cfg.selection_tables, "selection.tsv tables");
  report->add_option("--wer-summary", cfg.wer_summaries, "wer_summary.tsv tables")->required();
  report->add_option("--detection", cfg.detection_tables, "detection.tsv tables")->required();
  report->add_option("--table2-k", cfg.table2_ks, "k columns of the sensitivity table")->capture_default_str();
  report->add_option("--table2-snr", cfg.table2_snrs, "SNR columns of the sensitivity table")->capture_default_str();
  report->add_option("--table3-k", cfg.table3_k, "Fallback k when no selection covers a condition")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? grids::kExitOk : grids::kExitInputError;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  return grids::run_command(cfg);
}
