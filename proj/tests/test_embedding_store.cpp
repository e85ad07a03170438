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

#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "grids/embedding_store.hpp"
#include "synthetic.hpp"

using namespace grids;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

}  // namespace

TEST_SUITE("embedding_store") {
  TEST_CASE("1x1 zero matrix is a 20 byte file") {
    const auto dir = synth::scratch_dir("emb_small");
    write_embedding(EmbeddingMatrix(1, 1, {0.0f}), dir / "a.grid");
    const auto bytes = slurp(dir / "a.grid");
    REQUIRE(bytes.size() == 20);
    CHECK(std::memcmp(bytes.data(), "GRID", 4) == 0);
    const std::vector<std::uint8_t> header_tail{1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
    CHECK(std::equal(header_tail.begin(), header_tail.end(), bytes.begin() + 4));
    CHECK(bytes[16] == 0);
    CHECK(bytes[17] == 0);
    CHECK(bytes[18] == 0);
    CHECK(bytes[19] == 0);
  }

  TEST_CASE("2x3 header and payload size") {
    const auto bytes = encode_embedding(EmbeddingMatrix(2, 3, {1, 2, 3, 4, 5, 6}));
    REQUIRE(bytes.size() == 16 + 24);
    CHECK(bytes[8] == 2);
    CHECK(bytes[12] == 3);
    // 1.0f little-endian
    CHECK(bytes[16] == 0x00);
    CHECK(bytes[19] == 0x3f);
    CHECK(bytes[18] == 0x80);
  }

  TEST_CASE("random round trips are bit exact") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dim(1, 40);
    std::uniform_int_distribution<std::uint32_t> bits;
    for (int trial = 0; trial < 200; ++trial) {
      EmbeddingMatrix m(dim(rng), dim(rng));
      for (auto& v : m.values()) {
        float f;
        do {
          const std::uint32_t b = bits(rng);
          std::memcpy(&f, &b, 4);
        } while (!std::isfinite(f));
        v = f;
      }
      const auto bytes = encode_embedding(m);
      const auto back = decode_embedding(bytes);
      REQUIRE(back.rows() == m.rows());
      CHECK(std::memcmp(back.values().data(), m.values().data(), m.values().size() * 4) == 0);
      CHECK(encode_embedding(back) == bytes);
    }
    const auto dir = synth::scratch_dir("emb_rt");
    const auto m = synth::gaussian_matrix(17, 9, 3);
    write_embedding(m, dir / "m.grid");
    CHECK(read_embedding(dir / "m.grid") == m);
    const auto h = read_embedding_header(dir / "m.grid");
    CHECK(h.rows == 17);
    CHECK(h.cols == 9);
  }

  TEST_CASE("each corruption raises its own error") {
    auto bytes = encode_embedding(EmbeddingMatrix(2, 2, {1, 2, 3, 4}));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_embedding(bad), BadMagicError);
    bad = bytes;
    bad[4] = 2;
    CHECK_THROWS_AS(decode_embedding(bad), VersionMismatchError);
    bad = bytes;
    bad.resize(bad.size() - 3);
    try {
      decode_embedding(bad);
      FAIL("expected truncation");
    } catch (const TruncatedPayloadError& e) {
      CHECK(e.expected_bytes == 32);
      CHECK(e.actual_bytes == 29);
      CHECK(std::string(e.what()).find("32") != std::string::npos);
    }
    bad = bytes;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + 20, &nan, 4);
    CHECK_THROWS_AS(decode_embedding(bad), NonFiniteValueError);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_embedding(bad), EmbeddingFormatError);
    CHECK_THROWS_AS(decode_embedding(std::vector<std::uint8_t>(5, 0)), TruncatedPayloadError);
    CHECK_THROWS_AS(encode_embedding(EmbeddingMatrix(1, 1, {nan})), NonFiniteValueError);

    const auto dir = synth::scratch_dir("emb_corrupt");
    bad = bytes;
    bad[0] = 'X';
    spit(dir / "bad.grid", bad);
    CHECK_THROWS_AS(read_embedding(dir / "bad.grid"), BadMagicError);
  }

  TEST_CASE("condition keys") {
    CHECK(parse_condition("wavlm_base/clean").label() == "wavlm_base/clean");
    const auto k = parse_condition("wav2vec2_base/pgd_ctc/30");
    CHECK(k.perturbation == Perturbation::pgd_ctc);
    CHECK(*k.snr_db == 30);
    CHECK(k.clean_baseline().perturbation == Perturbation::clean);
    CHECK_THROWS_AS(parse_condition("m/gaussian/15"), InputError);
    CHECK_THROWS_AS(parse_condition("m/gaussian"), InputError);
    CHECK_THROWS_AS(parse_condition("m/clean/10"), InputError);
    CHECK_THROWS_AS(parse_perturbation("pink"), InputError);
    for (auto p : {Perturbation::clean, Perturbation::gaussian, Perturbation::babble, Perturbation::speech,
                   Perturbation::pgd_mse, Perturbation::pgd_ctc}) {
      CHECK(parse_perturbation(to_string(p)) == p);
    }
  }

  TEST_CASE("normalized id keeps three fields") {
    CHECK(normalize_utterance_id("1089-134686-0000") == "1089-134686-0000");
    CHECK(normalize_utterance_id("1089-134686-0000-pgd_mse-0") == "1089-134686-0000");
    CHECK(normalize_utterance_id("1089-134686-0000-gaussian-40") ==
          normalize_utterance_id("1089-134686-0000-speech-10"));
    CHECK(normalize_utterance_id("short") == "short");
  }

  TEST_CASE("manifest validation") {
    const auto dir = synth::scratch_dir("manifest");
    fs::create_directories(dir / "emb");
    std::vector<std::string> layers;
    for (int l = 1; l <= 12; ++l) {
      const std::string name = "emb/u1_L" + std::to_string(l) + ".grid";
      write_embedding(synth::gaussian_matrix(5, 4, l), dir / name);
      layers.push_back(name);
    }
    nlohmann::json good = {{"condition", {{"model", "wavlm_base"}, {"perturbation", "clean"}, {"snr_db", nullptr}}},
                           {"ambient_dim", 4},
                           {"layer_count", 12},
                           {"utterances", {{{"raw_id", "1-2-3"}, {"duration_s", 0.1}, {"layers", layers}}}}};

    SUBCASE("clean without snr is accepted") {
      write_json(dir / "m.json", good);
      const auto m = load_manifest(dir / "m.json");
      CHECK(m.condition.perturbation == Perturbation::clean);
      CHECK(m.utterances.at(0).frames == 5);
      CHECK(m.utterances[0].normalized_id == "1-2-3");
      auto j = good;
      j["condition"].erase("snr_db");
      write_json(dir / "m2.json", j);
      CHECK_NOTHROW(load_manifest(dir / "m2.json"));
    }
    SUBCASE("missing file is listed") {
      auto j = good;
      j["utterances"][0]["layers"][3] = "emb/nope.grid";
      write_json(dir / "m.json", j);
      try {
        load_manifest(dir / "m.json");
        FAIL("expected error");
      } catch (const ManifestError& e) {
        CHECK(std::string(e.what()).find("nope.grid") != std::string::npos);
      }
    }
    SUBCASE("duplicate raw id") {
      auto j = good;
      j["utterances"].push_back(j["utterances"][0]);
      write_json(dir / "m.json", j);
      CHECK_THROWS_WITH_AS(load_manifest(dir / "m.json"), doctest::Contains("duplicate"), ManifestError);
    }
    SUBCASE("snr outside the grid") {
      auto j = good;
      j["condition"] = {{"model", "wavlm_base"}, {"perturbation", "babble"}, {"snr_db", 5}};
      write_json(dir / "m.json", j);
      CHECK_THROWS_AS(load_manifest(dir / "m.json"), InputError);
    }
    SUBCASE("ambient dim mismatch") {
      auto j = good;
      j["ambient_dim"] = 8;
      write_json(dir / "m.json", j);
      CHECK_THROWS_AS(load_manifest(dir / "m.json"), InputError);
    }
    SUBCASE("inconsistent frame counts across layers") {
      write_embedding(synth::gaussian_matrix(6, 4, 99), dir / "emb/u1_L7.grid");
      write_json(dir / "m.json", good);
      CHECK_THROWS_AS(load_manifest(dir / "m.json"), InputError);
    }
    SUBCASE("wrong layer count") {
      auto j = good;
      j["utterances"][0]["layers"].erase(j["utterances"][0]["layers"].begin());
      write_json(dir / "m.json", j);
      CHECK_THROWS_AS(load_manifest(dir / "m.json"), ManifestError);
    }
    SUBCASE("malformed document") {
      std::ofstream(dir / "m.json") << "{ not json";
      CHECK_THROWS_AS(load_manifest(dir / "m.json"), ManifestError);
      CHECK_THROWS_AS(load_manifest(dir / "absent.json"), InputError);
    }
    SUBCASE("save then load") {
      write_json(dir / "m.json", good);
      const auto m = load_manifest(dir / "m.json");
      save_manifest(m, dir / "copy.json");
      const auto again = load_manifest(dir / "copy.json");
      CHECK(again.condition == m.condition);
      CHECK(again.utterances[0].layer_files == m.utterances[0].layer_files);
    }
  }
}
