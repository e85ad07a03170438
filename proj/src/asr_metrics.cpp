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

#include "grids/asr_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace grids {

std::vector<std::string> normalize_transcript(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0, e = cur.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(cur[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(cur[e - 1]))) --e;
    if (e > b) tokens.push_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else {
      cur += static_cast<char>(std::tolower(u));
    }
  }
  flush();
  return tokens;
}

std::size_t word_edit_distance(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  std::vector<std::size_t> prev(hypothesis.size() + 1), cur(hypothesis.size() + 1);
  for (std::size_t j = 0; j <= hypothesis.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= reference.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hypothesis.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hypothesis.size()];
}

double wer(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  if (reference.empty()) throw InputError("WER is undefined for an empty reference");
  return static_cast<double>(word_edit_distance(reference, hypothesis)) / static_cast<double>(reference.size());
}

double wer(std::string_view reference, std::string_view hypothesis) {
  return wer(normalize_transcript(reference), normalize_transcript(hypothesis));
}

double delta_wer(std::span<const WerRecord> records) {
  if (records.empty()) throw InputError("delta_wer needs at least one record");
  double sum = 0.0;
  for (const auto& r : records) sum += r.wer_pert - r.wer_clean;
  return sum / static_cast<double>(records.size());
}

double success_rate(std::span<const WerRecord> records, double gamma, double tau) {
  if (records.empty()) throw InputError("success_rate needs at least one record");
  std::size_t hits = 0;
  for (const auto& r : records) {
    if (r.wer_pert >= tau && r.wer_pert - r.wer_clean >= gamma) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

std::map<std::string, std::string> read_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open transcript file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string id;
    if (!(ss >> id)) continue;
    std::string rest;
    std::getline(ss, rest);
    const std::string key = normalize_utterance_id(id);
    if (!out.emplace(key, rest).second) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": duplicate utterance '" + key + "'");
    }
  }
  return out;
}

std::vector<WerRecord> build_wer_records(const std::map<std::string, std::string>& references,
                                         const std::map<std::string, std::string>& clean_hyp,
                                         const std::map<std::string, std::string>& pert_hyp,
                                         const ConditionKey& condition) {
  std::vector<WerRecord> out;
  for (const auto& [id, ref] : references) {
    const auto c = clean_hyp.find(id);
    const auto p = pert_hyp.find(id);
    if (c == clean_hyp.end()) throw InputError("no clean hypothesis for '" + id + "'");
    if (p == pert_hyp.end()) throw InputError("no " + condition.label() + " hypothesis for '" + id + "'");
    const auto ref_tokens = normalize_transcript(ref);
    if (ref_tokens.empty()) throw InputError("empty reference transcript for '" + id + "'");
    out.push_back({id, wer(ref_tokens, normalize_transcript(c->second)), wer(ref_tokens, normalize_transcript(p->second)),
                   condition});
  }
  return out;
}

}  // namespace grids
