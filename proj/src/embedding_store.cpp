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

#include "grids/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

namespace grids {

namespace fs = std::filesystem;
using nlohmann::json;

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0f) {}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw std::invalid_argument("EmbeddingMatrix: value count does not match rows*cols");
  }
}

namespace {

constexpr std::string_view kPerturbationNames[] = {"clean", "gaussian", "babble", "speech", "pgd_mse", "pgd_ctc"};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

EmbeddingHeader decode_header(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < kEmbeddingHeaderBytes) {
    throw TruncatedPayloadError(origin + ": truncated header: expected " + std::to_string(kEmbeddingHeaderBytes) +
                                    " bytes, got " + std::to_string(bytes.size()),
                                kEmbeddingHeaderBytes, bytes.size());
  }
  if (!std::equal(std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic), bytes.begin())) {
    throw BadMagicError(origin + ": bad magic '" + std::string(bytes.begin(), bytes.begin() + 4) + "'");
  }
  EmbeddingHeader h;
  h.version = get_u32(bytes.data() + 4);
  h.rows = get_u32(bytes.data() + 8);
  h.cols = get_u32(bytes.data() + 12);
  if (h.version != kEmbeddingVersion) {
    throw VersionMismatchError(origin + ": format version " + std::to_string(h.version) + ", expected " +
                               std::to_string(kEmbeddingVersion));
  }
  if (h.rows == 0 || h.cols == 0) {
    throw EmbeddingFormatError(origin + ": empty matrix (" + std::to_string(h.rows) + "x" + std::to_string(h.cols) + ")");
  }
  return h;
}

std::uint64_t expected_file_size(const EmbeddingHeader& h) {
  return kEmbeddingHeaderBytes + std::uint64_t{h.rows} * h.cols * 4;
}

void check_payload_size(const EmbeddingHeader& h, std::uint64_t actual, const std::string& origin) {
  const std::uint64_t expected = expected_file_size(h);
  if (actual < expected) {
    throw TruncatedPayloadError(origin + ": truncated payload: expected " + std::to_string(expected) +
                                    " bytes, got " + std::to_string(actual),
                                expected, actual);
  }
  if (actual > expected) {
    throw EmbeddingFormatError(origin + ": " + std::to_string(actual - expected) + " trailing bytes after payload");
  }
}

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string_view to_string(Perturbation p) { return kPerturbationNames[static_cast<int>(p)]; }

Perturbation parse_perturbation(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kPerturbationNames); ++i) {
    if (kPerturbationNames[i] == name) return static_cast<Perturbation>(i);
  }
  throw InputError("unknown perturbation '" + std::string(name) + "'");
}

bool is_adversarial(Perturbation p) { return p == Perturbation::pgd_mse || p == Perturbation::pgd_ctc; }

bool is_benign_noise(Perturbation p) {
  return p == Perturbation::gaussian || p == Perturbation::babble || p == Perturbation::speech;
}

bool is_valid_snr(int snr_db) { return std::ranges::find(kSnrGrid, snr_db) != std::end(kSnrGrid); }

void ConditionKey::validate() const {
  if (model_id.empty()) throw InputError("condition has an empty model id");
  if (perturbation == Perturbation::clean) {
    if (snr_db) throw InputError("clean condition must not carry an SNR");
    return;
  }
  if (!snr_db) throw InputError("condition " + label() + " is missing its SNR");
  if (!is_valid_snr(*snr_db)) {
    throw InputError("SNR " + std::to_string(*snr_db) + " dB is outside the {0,10,20,30,40} grid");
  }
}

std::string ConditionKey::label() const {
  std::string out = model_id + "/" + std::string(to_string(perturbation));
  if (snr_db) out += "/" + std::to_string(*snr_db);
  return out;
}

std::string ConditionKey::snr_text() const { return snr_db ? std::to_string(*snr_db) : "NA"; }

ConditionKey parse_condition(std::string_view text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == '/') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() < 2 || parts.size() > 3) {
    throw InputError("condition '" + std::string(text) + "' is not model/perturbation[/snr]");
  }
  ConditionKey key{parts[0], parse_perturbation(parts[1]), std::nullopt};
  if (parts.size() == 3 && parts[2] != "NA") {
    try {
      std::size_t used = 0;
      key.snr_db = std::stoi(parts[2], &used);
      if (used != parts[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError("condition '" + std::string(text) + "' has a non-integer SNR");
    }
  }
  key.validate();
  return key;
}

std::string normalize_utterance_id(std::string_view raw_id) {
  std::size_t hyphens = 0;
  for (std::size_t i = 0; i < raw_id.size(); ++i) {
    if (raw_id[i] == '-' && ++hyphens == 3) return std::string(raw_id.substr(0, i));
  }
  return std::string(raw_id);
}

std::vector<std::uint8_t> encode_embedding(const EmbeddingMatrix& matrix) {
  if (matrix.empty()) throw InputError("cannot encode an empty embedding matrix");
  if (matrix.rows() > UINT32_MAX || matrix.cols() > UINT32_MAX) throw InputError("embedding matrix too large");
  std::vector<std::uint8_t> out;
  out.reserve(kEmbeddingHeaderBytes + matrix.values().size() * 4);
  out.insert(out.end(), std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic));
  put_u32(out, kEmbeddingVersion);
  put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  put_u32(out, static_cast<std::uint32_t>(matrix.cols()));
  for (std::size_t i = 0; i < matrix.values().size(); ++i) {
    const float v = matrix.values()[i];
    if (!std::isfinite(v)) {
      throw NonFiniteValueError("non-finite value at row " + std::to_string(i / matrix.cols()) + ", col " +
                                std::to_string(i % matrix.cols()));
    }
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

EmbeddingMatrix decode_embedding(std::span<const std::uint8_t> bytes, const std::string& origin) {
  const EmbeddingHeader h = decode_header(bytes, origin);
  check_payload_size(h, bytes.size(), origin);
  std::vector<float> values(std::size_t{h.rows} * h.cols);
  const std::uint8_t* p = bytes.data() + kEmbeddingHeaderBytes;
  for (std::size_t i = 0; i < values.size(); ++i, p += 4) {
    values[i] = std::bit_cast<float>(get_u32(p));
    if (!std::isfinite(values[i])) {
      throw NonFiniteValueError(origin + ": non-finite value at row " + std::to_string(i / h.cols) + ", col " +
                                std::to_string(i % h.cols));
    }
  }
  return EmbeddingMatrix(h.rows, h.cols, std::move(values));
}

void write_embedding(const EmbeddingMatrix& matrix, const fs::path& path) {
  const auto bytes = encode_embedding(matrix);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed: " + path.string());
}

EmbeddingMatrix read_embedding(const fs::path& path) { return decode_embedding(slurp(path), path.string()); }

EmbeddingHeader read_embedding_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::uint8_t buf[kEmbeddingHeaderBytes];
  in.read(reinterpret_cast<char*>(buf), sizeof buf);
  const EmbeddingHeader h = decode_header(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(in.gcount())),
                                          path.string());
  check_payload_size(h, fs::file_size(path), path.string());
  return h;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ManifestError(path.string() + ": " + e.what());
  }
  const std::string where = path.string();
  Manifest m;
  m.source = path;
  try {
    const auto& cond = doc.at("condition");
    m.condition.model_id = cond.at("model").get<std::string>();
    m.condition.perturbation = parse_perturbation(cond.at("perturbation").get<std::string>());
    if (cond.contains("snr_db") && !cond.at("snr_db").is_null()) m.condition.snr_db = cond.at("snr_db").get<int>();
    m.ambient_dim = doc.at("ambient_dim").get<std::size_t>();
    m.layer_count = doc.value("layer_count", kLayerCount);
    for (const auto& u : doc.at("utterances")) {
      UtteranceRecord rec;
      rec.raw_id = u.at("raw_id").get<std::string>();
      rec.normalized_id = normalize_utterance_id(rec.raw_id);
      rec.duration_s = u.at("duration_s").get<double>();
      for (const auto& f : u.at("layers")) rec.layer_files.emplace_back(f.get<std::string>());
      m.utterances.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ManifestError(where + ": schema error: " + e.what());
  } catch (const InputError& e) {
    throw ManifestError(where + ": " + e.what());
  }

  try {
    m.condition.validate();
  } catch (const InputError& e) {
    throw ManifestError(where + ": " + e.what());
  }
  if (m.layer_count != kLayerCount) {
    throw ManifestError(where + ": layer_count " + std::to_string(m.layer_count) + ", supported encoders have " +
                        std::to_string(kLayerCount));
  }
  if (m.ambient_dim == 0) throw ManifestError(where + ": ambient_dim must be positive");
  if (m.utterances.empty()) throw ManifestError(where + ": no utterances listed");

  const fs::path base = path.parent_path();
  std::set<std::string> seen;
  std::vector<std::string> missing;
  for (auto& rec : m.utterances) {
    if (!seen.insert(rec.raw_id).second) throw ManifestError(where + ": duplicate raw_id '" + rec.raw_id + "'");
    if (rec.layer_files.size() != m.layer_count) {
      throw ManifestError(where + ": utterance '" + rec.raw_id + "' lists " + std::to_string(rec.layer_files.size()) +
                          " layers, expected " + std::to_string(m.layer_count));
    }
    if (!(rec.duration_s >= 0.0)) throw ManifestError(where + ": utterance '" + rec.raw_id + "' has negative duration");
    for (auto& f : rec.layer_files) {
      if (f.is_relative()) f = base / f;
      if (!fs::exists(f)) missing.push_back(f.string());
    }
  }
  if (!missing.empty()) {
    std::string msg = where + ": missing embedding file reference(s):";
    for (const auto& p : missing) msg += "\n  " + p;
    throw ManifestError(msg);
  }

  for (auto& rec : m.utterances) {
    for (std::size_t l = 0; l < rec.layer_files.size(); ++l) {
      EmbeddingHeader h;
      try {
        h = read_embedding_header(rec.layer_files[l]);
      } catch (const InputError& e) {
        throw ManifestError(where + ": " + e.what());
      }
      if (h.cols != m.ambient_dim) {
        throw ManifestError(where + ": inconsistent ambient_dim: " + rec.layer_files[l].string() + " has " +
                            std::to_string(h.cols) + " columns, manifest declares " + std::to_string(m.ambient_dim));
      }
      if (l == 0) {
        rec.frames = h.rows;
      } else if (h.rows != rec.frames) {
        throw ManifestError(where + ": utterance '" + rec.raw_id + "' has inconsistent frame counts across layers");
      }
    }
  }
  return m;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  json doc;
  json cond = {{"model", manifest.condition.model_id},
               {"perturbation", std::string(to_string(manifest.condition.perturbation))}};
  cond["snr_db"] = manifest.condition.snr_db ? json(*manifest.condition.snr_db) : json(nullptr);
  doc["condition"] = cond;
  doc["ambient_dim"] = manifest.ambient_dim;
  doc["layer_count"] = manifest.layer_count;
  json utts = json::array();
  const fs::path base = path.parent_path();
  for (const auto& rec : manifest.utterances) {
    json layers = json::array();
    for (const auto& f : rec.layer_files) {
      layers.push_back(f.is_absolute() && !base.empty() ? fs::relative(f, base).generic_string() : f.generic_string());
    }
    utts.push_back({{"raw_id", rec.raw_id}, {"duration_s", rec.duration_s}, {"layers", layers}});
  }
  doc["utterances"] = utts;
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
}

}  // namespace grids
