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
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "grids/k_selector.hpp"
#include "grids/wav_io.hpp"

namespace grids {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitComputationError = 3;

/// Every effective parameter of one command invocation. Each run writes
/// this back out as config_echo.json in its output directory.
struct RunConfig {
  std::string command;
  std::filesystem::path data_root;  // relative inputs resolve against this
  std::filesystem::path output_dir = "grids_out";
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  // Condition filters; empty means "all".
  std::vector<std::string> models;
  std::vector<std::string> perturbations;
  std::vector<int> snrs;

  // lid / ksweep
  std::vector<std::filesystem::path> manifests;
  std::vector<std::size_t> k_grid{std::begin(kDefaultKGrid), std::end(kDefaultKGrid)};
  double retain_fraction = kDefaultRetainFraction;
  double clamp_lo = 0.01;
  double clamp_hi = 10000.0;

  // perturb
  std::filesystem::path clean_dir;
  std::filesystem::path babble_source;  // file or directory of clips
  std::filesystem::path speech_source;  // file or directory of competing talkers
  std::vector<std::string> kinds{"gaussian", "babble", "speech"};
  std::vector<int> snr_levels{std::begin(kSnrGrid), std::end(kSnrGrid)};
  double sigma = kGaussianSigma;
  int iterations = kPgdIterations;
  double eta = kPgdStepSize;
  std::string bridge_cmd;
  std::filesystem::path bridge_dir;
  WavEncoding encoding = WavEncoding::float32;

  // wer
  std::string model;
  std::filesystem::path references;
  std::filesystem::path clean_hyp;
  std::vector<std::string> pert_hyps;  // "perturbation:snr=path"
  double gamma = 0.2;
  double tau = 0.3;

  // detect
  std::vector<std::filesystem::path> feature_tables;
  std::size_t feature_k = 0;  // 0: the single k present in the tables
  std::size_t folds = 5;
  double lambda = 1.0;

  // detect / report
  std::vector<std::filesystem::path> wer_summaries;
  std::vector<std::filesystem::path> delta_lid_tables;
  std::vector<std::filesystem::path> selection_tables;
  std::vector<std::filesystem::path> detection_tables;
  std::vector<std::size_t> table2_ks{50, 100};
  std::vector<int> table2_snrs{0, 40};
  std::size_t table3_k = 50;  // used when no selection table covers a condition
};

nlohmann::json config_echo(const RunConfig& config);

/// Each command throws InputError / ComputationError on failure.
void cmd_perturb(const RunConfig& config);
void cmd_lid(const RunConfig& config);
void cmd_ksweep(const RunConfig& config);
void cmd_wer(const RunConfig& config);
void cmd_detect(const RunConfig& config);
void cmd_report(const RunConfig& config);

/// Dispatches on config.command and maps exceptions to exit codes.
int run_command(const RunConfig& config);

// Column orders of the emitted tables.
inline const std::vector<std::string> kLayerLidColumns{"condition", "layer", "k", "lid", "valid_count", "total_count"};
inline const std::vector<std::string> kDeltaLidColumns{"model", "perturbation", "snr", "k", "layer", "lid", "delta"};

std::vector<std::string> feature_columns();
std::vector<std::string> sweep_columns();
inline const std::vector<std::string> kSelectionColumns{"model",  "perturbation", "snr",           "chosen_k",
                                                        "rationale", "retained",  "retain_fraction"};
inline const std::vector<std::string> kWerRecordColumns{"model", "perturbation", "snr", "utterance", "wer_clean",
                                                        "wer_pert"};
inline const std::vector<std::string> kWerSummaryColumns{"model",    "perturbation", "snr",          "n",    "wer_clean",
                                                         "wer_pert", "delta_wer",    "success_rate", "gamma", "tau"};
inline const std::vector<std::string> kDetectionColumns{"model", "attack", "snr",          "positives",   "negatives",
                                                        "auroc", "auprc",  "fpr_at_tpr95", "success_rate"};

}  // namespace grids
