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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grids/errors.hpp"

namespace grids {

/// One layer's frame embeddings: rows are frames, cols the hidden size.
/// Values are row-major 32-bit floats.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols);
  EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  std::span<float> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  float& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
};

enum class Perturbation { clean, gaussian, babble, speech, pgd_mse, pgd_ctc };

std::string_view to_string(Perturbation p);
/// Throws InputError for unknown names.
Perturbation parse_perturbation(std::string_view name);
bool is_adversarial(Perturbation p);
bool is_benign_noise(Perturbation p);

/// Target SNR levels used throughout (dB).
inline constexpr int kSnrGrid[] = {0, 10, 20, 30, 40};
bool is_valid_snr(int snr_db);

/// Every supported encoder exposes this many transformer layers.
inline constexpr std::size_t kLayerCount = 12;

/// (model, perturbation, SNR). The SNR is absent exactly for clean.
struct ConditionKey {
  std::string model_id;
  Perturbation perturbation = Perturbation::clean;
  std::optional<int> snr_db;

  /// Throws InputError when the SNR presence or value is inconsistent.
  void validate() const;
  /// "model/perturbation/snr", or "model/clean".
  std::string label() const;
  /// SNR as table text; "NA" for clean.
  std::string snr_text() const;
  ConditionKey clean_baseline() const { return {model_id, Perturbation::clean, std::nullopt}; }

  auto operator<=>(const ConditionKey&) const = default;
};

/// Parses "model/perturbation[/snr]".
ConditionKey parse_condition(std::string_view text);

/// Strips condition decorations: keeps the first three hyphen-separated
/// fields (speaker-chapter-utterance). IDs with fewer fields are returned
/// unchanged.
std::string normalize_utterance_id(std::string_view raw_id);

struct UtteranceRecord {
  std::string raw_id;
  std::string normalized_id;
  double duration_s = 0.0;
  std::vector<std::filesystem::path> layer_files;  // index 0 is layer 1
  std::size_t frames = 0;                          // filled by load_manifest
};

struct Manifest {
  ConditionKey condition;
  std::vector<UtteranceRecord> utterances;
  std::size_t ambient_dim = 0;
  std::size_t layer_count = kLayerCount;
  std::filesystem::path source;
};

// Distinct failure modes of the binary reader.
class EmbeddingFormatError : public InputError {
 public:
  using InputError::InputError;
};
class BadMagicError : public EmbeddingFormatError {
 public:
  using EmbeddingFormatError::EmbeddingFormatError;
};
class VersionMismatchError : public EmbeddingFormatError {
 public:
  using EmbeddingFormatError::EmbeddingFormatError;
};
class TruncatedPayloadError : public EmbeddingFormatError {
 public:
  TruncatedPayloadError(const std::string& what, std::uint64_t expected, std::uint64_t actual)
      : EmbeddingFormatError(what), expected_bytes(expected), actual_bytes(actual) {}
  std::uint64_t expected_bytes;
  std::uint64_t actual_bytes;
};
class NonFiniteValueError : public EmbeddingFormatError {
 public:
  using EmbeddingFormatError::EmbeddingFormatError;
};
class ManifestError : public InputError {
 public:
  using InputError::InputError;
};

inline constexpr char kEmbeddingMagic[4] = {'G', 'R', 'I', 'D'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 16;

struct EmbeddingHeader {
  std::uint32_t version = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
};

/// Encodes the header followed by the little-endian float payload.
std::vector<std::uint8_t> encode_embedding(const EmbeddingMatrix& matrix);
EmbeddingMatrix decode_embedding(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

void write_embedding(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix read_embedding(const std::filesystem::path& path);
/// Reads and checks only the header and the file size.
EmbeddingHeader read_embedding_header(const std::filesystem::path& path);

/*
 * Manifest documents are JSON:
 *
 *   {
 *     "condition": {"model": "wavlm_base", "perturbation": "gaussian", "snr_db": 20},
 *     "ambient_dim": 768,
 *     "layer_count": 12,
 *     "utterances": [
 *       {"raw_id": "1089-134686-0000-gaussian-20", "duration_s": 5.3,
 *        "layers": ["emb/1089-134686-0000/L01.grid", ...]}
 *     ]
 *   }
 *
 * "snr_db" is omitted or null for clean. Layer paths are relative to the
 * manifest's directory unless absolute. See docs/formats.md.
 */
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

}  // namespace grids
