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

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grids/embedding_store.hpp"

namespace grids {

/// Case-folds, splits on whitespace and strips leading/trailing ASCII
/// punctuation from each token; tokens that become empty are dropped.
std::vector<std::string> normalize_transcript(std::string_view text);

/// Word-level Levenshtein distance with unit costs.
std::size_t word_edit_distance(std::span<const std::string> reference, std::span<const std::string> hypothesis);

/// Edit distance over reference length; may exceed 1. Throws InputError for an empty reference.
double wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);
double wer(std::string_view reference, std::string_view hypothesis);

struct WerRecord {
  std::string utterance;  // normalized id
  double wer_clean = 0.0;
  double wer_pert = 0.0;
  ConditionKey condition;
};

inline constexpr double kSuccessGamma = 0.2;
inline constexpr double kSuccessTau = 0.3;

/// Mean per-utterance WER increase. Throws InputError on an empty list.
double delta_wer(std::span<const WerRecord> records);

/// Fraction with wer_pert >= tau and wer_pert - wer_clean >= gamma.
double success_rate(std::span<const WerRecord> records, double gamma = kSuccessGamma, double tau = kSuccessTau);

/// Two-column transcript file: "<id> <transcript words...>" per line,
/// keyed here by normalized utterance id. Blank lines are skipped;
/// duplicate normalized ids throw InputError.
std::map<std::string, std::string> read_transcripts(const std::filesystem::path& path);

/// Pairs references with clean and perturbed hypotheses by normalized id.
/// Every reference must have both hypotheses.
std::vector<WerRecord> build_wer_records(const std::map<std::string, std::string>& references,
                                         const std::map<std::string, std::string>& clean_hyp,
                                         const std::map<std::string, std::string>& pert_hyp,
                                         const ConditionKey& condition);

}  // namespace grids
