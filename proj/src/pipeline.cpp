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

#include "grids/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include "grids/asr_metrics.hpp"
#include "grids/detection.hpp"
#include "grids/lid_pipeline.hpp"
#include "grids/perturb.hpp"
#include "grids/tables.hpp"
#include "grids/wav_io.hpp"

namespace grids {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const RunConfig& cfg, const fs::path& p) {
  if (p.empty() || p.is_absolute() || cfg.data_root.empty()) return p;
  return cfg.data_root / p;
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

void prepare_output(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir / "config_echo.json");
  if (!out) throw InputError("cannot write to output directory " + cfg.output_dir.string());
  out << config_echo(cfg).dump(2) << '\n';
}

bool model_selected(const RunConfig& cfg, const std::string& model) {
  return cfg.models.empty() || std::ranges::find(cfg.models, model) != cfg.models.end();
}

// Clean baselines are never filtered out by perturbation or SNR.
bool condition_selected(const RunConfig& cfg, const ConditionKey& c) {
  if (!model_selected(cfg, c.model_id)) return false;
  if (c.perturbation == Perturbation::clean) return true;
  if (!cfg.perturbations.empty() &&
      std::ranges::find(cfg.perturbations, std::string(to_string(c.perturbation))) == cfg.perturbations.end()) {
    return false;
  }
  return cfg.snrs.empty() || std::ranges::find(cfg.snrs, *c.snr_db) != cfg.snrs.end();
}

bool snr_selected(const RunConfig& cfg, int snr) {
  return cfg.snrs.empty() || std::ranges::find(cfg.snrs, snr) != cfg.snrs.end();
}

int model_rank(const std::string& model) {
  if (model == "wavlm_base") return 0;
  if (model == "wav2vec2_base") return 1;
  return 2;
}

std::vector<std::string> order_models(const std::set<std::string>& models) {
  std::vector<std::string> out(models.begin(), models.end());
  std::ranges::stable_sort(out, {}, model_rank);
  return out;
}

std::string model_display(const std::string& model) {
  if (model == "wavlm_base") return "WavLM";
  if (model == "wav2vec2_base") return "wav2vec 2.0";
  return model;
}

std::string model_short(const std::string& model) {
  if (model == "wavlm_base") return "WavLM";
  if (model == "wav2vec2_base") return "w2v2";
  return model;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

std::vector<fs::path> list_wavs(const fs::path& p) {
  if (fs::is_regular_file(p)) return {p};
  if (!fs::is_directory(p)) throw InputError("audio source not found: " + p.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  }
  std::ranges::sort(out);
  if (out.empty()) throw InputError("no .wav files in " + p.string());
  return out;
}

Waveform read_16k(const fs::path& p) {
  Waveform w = read_wav(p);
  if (w.sample_rate != kSampleRate) {
    throw InputError(p.string() + ": sample rate " + std::to_string(w.sample_rate) + " Hz, expected " +
                     std::to_string(kSampleRate) + " Hz (no implicit resampling)");
  }
  if (w.samples.empty()) throw InputError(p.string() + ": no samples");
  return w;
}

struct NoiseClip {
  fs::path path;
  std::string normalized_id;
  Waveform wav;
};

std::vector<NoiseClip> load_noise_pool(const fs::path& source) {
  std::vector<NoiseClip> pool;
  for (const auto& p : list_wavs(source)) {
    pool.push_back({p, normalize_utterance_id(p.stem().string()), read_16k(p)});
  }
  return pool;
}

std::string speaker_of(const std::string& id) { return id.substr(0, id.find('-')); }

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InputError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

// Confirms an adversarial waveform produced by the bridge honours its SNR budget.
double verify_bridge_output(const Waveform& clean, const fs::path& adv_path, const fs::path& sidecar, int snr) {
  const Waveform adv = read_16k(adv_path);
  if (adv.samples.size() != clean.samples.size()) {
    throw ComputationError(adv_path.string() + ": length " + std::to_string(adv.samples.size()) +
                           " differs from the clean input (" + std::to_string(clean.samples.size()) + ")");
  }
  std::vector<double> delta(adv.samples.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = adv.samples[i] - clean.samples[i];
  if (l2_norm(delta) == 0.0) throw ComputationError(adv_path.string() + ": output is identical to the clean input");
  const double measured = snr_db(clean.samples, delta);
  // Clipping only shrinks the perturbation; the slack covers PCM16 storage.
  if (measured < snr - 0.1) {
    throw ComputationError(adv_path.string() + ": measured SNR " + std::to_string(measured) +
                           " dB exceeds the " + std::to_string(snr) + " dB budget");
  }
  if (fs::exists(sidecar)) {
    const json meta = read_json_file(sidecar);
    if (meta.contains("realized_snr_db") && meta["realized_snr_db"].is_number()) {
      const double realized = meta["realized_snr_db"].get<double>();
      if (std::abs(realized - snr) > 1e-4) {
        throw ComputationError(sidecar.string() + ": pre-clip SNR " + std::to_string(realized) +
                               " dB does not exhaust the " + std::to_string(snr) + " dB budget");
      }
    }
  }
  return measured;
}

void write_sidecar(const fs::path& path, const json& meta) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << meta.dump(2) << '\n';
}

}  // namespace

json config_echo(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["data_root"] = c.data_root.string();
  j["output_dir"] = c.output_dir.string();
  j["workers"] = c.workers;
  j["seed"] = c.seed;
  j["filters"] = {{"models", c.models}, {"perturbations", c.perturbations}, {"snrs", c.snrs}};
  if (c.command == "lid" || c.command == "ksweep") {
    j["manifests"] = path_strings(c.manifests);
    j["k_grid"] = c.k_grid;
    j["retain_fraction"] = c.retain_fraction;
    j["clamp"] = {c.clamp_lo, c.clamp_hi};
  } else if (c.command == "perturb") {
    j["clean_dir"] = c.clean_dir.string();
    j["babble_source"] = c.babble_source.string();
    j["speech_source"] = c.speech_source.string();
    j["kinds"] = c.kinds;
    j["snr_levels"] = c.snr_levels;
    j["sigma"] = c.sigma;
    j["iterations"] = c.iterations;
    j["eta"] = c.eta;
    j["bridge_cmd"] = c.bridge_cmd;
    j["bridge_dir"] = c.bridge_dir.string();
    j["encoding"] = c.encoding == WavEncoding::pcm16 ? "pcm16" : "float32";
  } else if (c.command == "wer") {
    j["model"] = c.model;
    j["references"] = c.references.string();
    j["clean_hyp"] = c.clean_hyp.string();
    j["pert_hyps"] = c.pert_hyps;
    j["gamma"] = c.gamma;
    j["tau"] = c.tau;
  } else if (c.command == "detect") {
    j["feature_tables"] = path_strings(c.feature_tables);
    j["feature_k"] = c.feature_k;
    j["folds"] = c.folds;
    j["lambda"] = c.lambda;
    j["logistic"] = {{"penalty", "l2"}, {"bias_penalized", false}, {"gradient_tolerance", 1e-8}, {"max_iterations", 1000}};
    j["wer_summaries"] = path_strings(c.wer_summaries);
  } else if (c.command == "report") {
    j["delta_lid_tables"] = path_strings(c.delta_lid_tables);
    j["selection_tables"] = path_strings(c.selection_tables);
    j["wer_summaries"] = path_strings(c.wer_summaries);
    j["detection_tables"] = path_strings(c.detection_tables);
    j["table2_ks"] = c.table2_ks;
    j["table2_snrs"] = c.table2_snrs;
    j["table3_k"] = c.table3_k;
  }
  return j;
}

// ---------------------------------------------------------------- perturb

void cmd_perturb(const RunConfig& cfg) {
  const fs::path clean_dir = resolve(cfg, cfg.clean_dir);
  if (cfg.clean_dir.empty() || !fs::is_directory(clean_dir)) {
    throw InputError("clean input directory not found: " + clean_dir.string());
  }
  std::vector<Perturbation> kinds;
  for (const auto& k : cfg.kinds) {
    const Perturbation p = parse_perturbation(k);
    if (p == Perturbation::clean) throw InputError("'clean' is not a perturbation kind");
    kinds.push_back(p);
  }
  for (int s : cfg.snr_levels) {
    if (!is_valid_snr(s)) throw InputError("SNR " + std::to_string(s) + " dB is outside the {0,10,20,30,40} grid");
  }
  const auto uses = [&](Perturbation p) { return std::ranges::find(kinds, p) != kinds.end(); };

  std::vector<NoiseClip> babble, speech;
  if (uses(Perturbation::babble)) {
    if (cfg.babble_source.empty()) throw InputError("babble perturbation requires --babble-source");
    babble = load_noise_pool(resolve(cfg, cfg.babble_source));
  }
  if (uses(Perturbation::speech)) {
    if (cfg.speech_source.empty()) throw InputError("speech perturbation requires --speech-source");
    speech = load_noise_pool(resolve(cfg, cfg.speech_source));
  }
  const bool needs_bridge = uses(Perturbation::pgd_mse) || uses(Perturbation::pgd_ctc);
  if (needs_bridge && cfg.bridge_cmd.empty() && cfg.bridge_dir.empty()) {
    throw InputError("PGD kinds are generated by the model bridge: pass --bridge-cmd to run it or --bridge-dir "
                     "pointing at its outputs");
  }

  const auto inputs = list_wavs(clean_dir);
  prepare_output(cfg);
  Table meta{{"raw_id", "perturbation", "snr", "output", "realized_snr_db", "seed", "noise_source"}, {}};

  for (const auto& in_path : inputs) {
    const Waveform x = read_16k(in_path);
    const std::string stem = in_path.stem().string();
    const std::string base_id = normalize_utterance_id(stem);
    for (const Perturbation kind : kinds) {
      for (const int snr : cfg.snr_levels) {
        const std::string kind_name(to_string(kind));
        const fs::path dir = cfg.output_dir / kind_name / std::to_string(snr);
        fs::create_directories(dir);
        const fs::path out_wav = dir / (stem + ".wav");
        const fs::path out_meta = dir / (stem + ".json");
        const std::uint64_t seed = derive_seed(cfg.seed, stem + "/" + kind_name + "/" + std::to_string(snr));

        json side = {{"source", in_path.string()},     {"raw_id", stem + "-" + kind_name + "-" + std::to_string(snr)},
                     {"kind", kind_name},              {"target_snr_db", snr},
                     {"seed", seed},                   {"sample_rate", kSampleRate},
                     {"iterations", nullptr},          {"snr_measured", "pre-clip"}};
        std::string noise_name;
        double realized = 0.0;

        if (is_adversarial(kind)) {
          const fs::path bridge_wav = out_wav;
          if (!cfg.bridge_cmd.empty()) {
            const std::string cmd = cfg.bridge_cmd + " attack --wav " + shell_quote(in_path.string()) +
                                    " --objective " + (kind == Perturbation::pgd_mse ? "mse" : "ctc") + " --snr " +
                                    std::to_string(snr) + " --iters " + std::to_string(cfg.iterations) +
                                    " --eta " + format_exact(cfg.eta) + " --seed " + std::to_string(seed) +
                                    " --out " + shell_quote(out_wav.string()) + " --sidecar " +
                                    shell_quote(out_meta.string());
            const int rc = std::system(cmd.c_str());
            if (rc != 0) throw ComputationError("bridge attack failed (status " + std::to_string(rc) + "): " + cmd);
            if (!fs::exists(out_wav)) throw ComputationError("bridge attack produced no output at " + out_wav.string());
          } else {
            const fs::path src = resolve(cfg, cfg.bridge_dir) / kind_name / std::to_string(snr) / (stem + ".wav");
            if (!fs::exists(src)) {
              throw InputError("bridge output absent for " + stem + " (" + kind_name + ", " + std::to_string(snr) +
                               " dB): expected " + src.string());
            }
            fs::copy_file(src, out_wav, fs::copy_options::overwrite_existing);
            const fs::path src_meta = fs::path(src).replace_extension(".json");
            if (fs::exists(src_meta)) fs::copy_file(src_meta, out_meta, fs::copy_options::overwrite_existing);
          }
          realized = verify_bridge_output(x, bridge_wav, out_meta, snr);
          if (!fs::exists(out_meta)) {
            side["iterations"] = cfg.iterations;
            side["snr_measured"] = "post-clip, recomputed from audio";
            side["realized_snr_db"] = realized;
            write_sidecar(out_meta, side);
          }
          meta.add_row({stem, kind_name, std::to_string(snr), out_wav.string(), format_exact(realized),
                        std::to_string(seed), ""});
          continue;
        }

        PerturbationOutput out;
        if (kind == Perturbation::gaussian) {
          out = gen_gaussian(x, snr, cfg.sigma, seed);
          side["sigma"] = cfg.sigma;
        } else if (kind == Perturbation::babble) {
          const NoiseClip& clip = babble[seed % babble.size()];
          out = mix_noise(x, clip.wav.samples, snr, seed);
          noise_name = clip.path.string();
        } else {
          // Competing talker: prefer another speaker, never the same utterance.
          std::vector<const NoiseClip*> others, other_speakers;
          for (const auto& c : speech) {
            if (c.normalized_id == base_id) continue;
            others.push_back(&c);
            if (speaker_of(c.normalized_id) != speaker_of(base_id)) other_speakers.push_back(&c);
          }
          const auto& pool = other_speakers.empty() ? others : other_speakers;
          if (pool.empty()) throw InputError("no competing-talker utterance distinct from " + stem);
          const NoiseClip& clip = *pool[seed % pool.size()];
          out = mix_noise(x, clip.wav.samples, snr, seed);
          noise_name = clip.path.string();
        }
        realized = out.realized_snr_db;
        side["realized_snr_db"] = realized;
        side["noise_source"] = noise_name.empty() ? json(nullptr) : json(noise_name);
        write_wav(out.perturbed, out_wav, cfg.encoding);
        write_sidecar(out_meta, side);
        meta.add_row({stem, kind_name, std::to_string(snr), out_wav.string(), format_exact(realized),
                      std::to_string(seed), noise_name});
      }
    }
  }
  write_table(meta, cfg.output_dir / "perturbations.tsv");
  std::cout << "wrote " << meta.rows.size() << " perturbed utterances to " << cfg.output_dir.string() << '\n';
}

// ------------------------------------------------------------ lid, ksweep

namespace {

struct ModelConditions {
  std::optional<Manifest> clean;
  std::vector<Manifest> perturbed;
};

std::map<std::string, ModelConditions> load_condition_sets(const RunConfig& cfg) {
  if (cfg.manifests.empty()) throw InputError("no manifests given");
  std::map<std::string, ModelConditions> by_model;
  std::set<ConditionKey> seen;
  for (const auto& p : cfg.manifests) {
    Manifest m = load_manifest(resolve(cfg, p));
    if (!condition_selected(cfg, m.condition)) continue;
    if (!seen.insert(m.condition).second) throw InputError("condition " + m.condition.label() + " listed twice");
    auto& slot = by_model[m.condition.model_id];
    if (m.condition.perturbation == Perturbation::clean) {
      slot.clean = std::move(m);
    } else {
      slot.perturbed.push_back(std::move(m));
    }
  }
  for (auto& [model, set] : by_model) {
    if (!set.clean) throw InputError("missing clean baseline manifest for model " + model);
    std::ranges::sort(set.perturbed, {}, [](const Manifest& m) { return m.condition; });
  }
  return by_model;
}

AnalysisOptions analysis_options(const RunConfig& cfg, bool features) {
  AnalysisOptions o;
  o.clamp = {cfg.clamp_lo, cfg.clamp_hi};
  if (!(o.clamp.lo > 0.0 && o.clamp.hi > o.clamp.lo)) throw InputError("clamp range must satisfy 0 < lo < hi");
  o.knn.workers = cfg.workers;
  o.features = features;
  return o;
}

void add_lid_rows(const ConditionAnalysis& a, const ConditionAnalysis& clean, Table& layer_t, Table& delta_t,
                  Table* feature_t) {
  const ConditionKey& c = a.condition;
  for (std::size_t ki = 0; ki < a.ks.size(); ++ki) {
    const LidProfile& p = a.profiles[ki];
    const LidProfile& cp = clean.profile(a.ks[ki]);
    const std::string k = std::to_string(a.ks[ki]);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      const auto& s = p.layers[l];
      layer_t.add_row({c.label(), std::to_string(s.layer), k, format_exact(s.lid), std::to_string(s.valid_count),
                       std::to_string(s.total_count)});
      delta_t.add_row({c.model_id, std::string(to_string(c.perturbation)), c.snr_text(), k, std::to_string(s.layer),
                       format_exact(s.lid), format_exact(delta_lid_layer(s, cp.layers[l]))});
    }
    delta_t.add_row({c.model_id, std::string(to_string(c.perturbation)), c.snr_text(), k, "overall",
                     format_exact(p.overall), format_exact(delta_lid_overall(p.overall, cp.overall))});
    if (feature_t != nullptr) {
      for (const auto& v : a.features[ki]) {
        std::vector<std::string> row{c.model_id, std::string(to_string(c.perturbation)), c.snr_text(), k, v.raw_id,
                                     v.normalized_id};
        for (double x : v.values) row.push_back(format_exact(x));
        feature_t->add_row(std::move(row));
      }
    }
  }
}

}  // namespace

std::vector<std::string> feature_columns() {
  std::vector<std::string> cols{"model", "perturbation", "snr", "k", "raw_id", "normalized_id"};
  for (std::size_t l = 1; l <= kLayerCount; ++l) cols.push_back("lid_" + std::to_string(l));
  return cols;
}

std::vector<std::string> sweep_columns() {
  std::vector<std::string> cols{"model", "perturbation", "snr", "k", "delta_overall", "layer_std"};
  for (std::size_t l = 1; l <= kLayerCount; ++l) cols.push_back("delta_l" + std::to_string(l));
  return cols;
}

void cmd_lid(const RunConfig& cfg) {
  const auto sets = load_condition_sets(cfg);
  const auto ks = normalize_k_grid(cfg.k_grid);
  const AnalysisOptions opts = analysis_options(cfg, true);
  prepare_output(cfg);

  Table layer_t{kLayerLidColumns, {}};
  Table delta_t{kDeltaLidColumns, {}};
  Table feature_t{feature_columns(), {}};
  std::set<std::string> names;
  for (const auto& [m, s] : sets) names.insert(m);
  for (const auto& model : order_models(names)) {
    const auto& set = sets.at(model);
    const ConditionAnalysis clean = analyze_condition(*set.clean, ks, opts);
    add_lid_rows(clean, clean, layer_t, delta_t, &feature_t);
    for (const auto& m : set.perturbed) {
      const ConditionAnalysis a = analyze_condition(m, ks, opts);
      add_lid_rows(a, clean, layer_t, delta_t, &feature_t);
      std::cout << a.condition.label();
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        std::cout << "  k=" << ks[ki] << " dLID=" << format_fixed(a.profiles[ki].overall - clean.profiles[ki].overall);
      }
      std::cout << '\n';
    }
  }
  write_table(layer_t, cfg.output_dir / "layer_lid.tsv");
  write_table(delta_t, cfg.output_dir / "delta_lid.tsv");
  write_table(feature_t, cfg.output_dir / "features.tsv");
}

void cmd_ksweep(const RunConfig& cfg) {
  const auto sets = load_condition_sets(cfg);
  const auto grid = normalize_k_grid(cfg.k_grid);
  if (!(cfg.retain_fraction > 0.0 && cfg.retain_fraction <= 1.0)) throw InputError("retain_fraction must lie in (0, 1]");
  const AnalysisOptions opts = analysis_options(cfg, false);
  prepare_output(cfg);

  Table sweep_t{sweep_columns(), {}};
  Table sel_t{kSelectionColumns, {}};
  std::set<std::string> names;
  for (const auto& [m, s] : sets) names.insert(m);
  for (const auto& model : order_models(names)) {
    const auto& set = sets.at(model);
    const ConditionAnalysis clean = analyze_condition(*set.clean, grid, opts);
    for (const auto& m : set.perturbed) {
      const ConditionAnalysis a = analyze_condition(m, grid, opts);
      const auto entries = sweep(a, clean, grid);
      const KSelection sel = select_k(entries, cfg.retain_fraction);
      const ConditionKey& c = a.condition;
      for (const auto& e : entries) {
        std::vector<std::string> row{c.model_id, std::string(to_string(c.perturbation)), c.snr_text(),
                                     std::to_string(e.k), format_exact(e.delta_overall), format_exact(e.layer_std)};
        for (double d : e.per_layer_delta) row.push_back(format_exact(d));
        sweep_t.add_row(std::move(row));
      }
      std::string retained;
      for (std::size_t i = 0; i < sel.retained.size(); ++i) retained += (i ? "," : "") + std::to_string(sel.retained[i]);
      sel_t.add_row({c.model_id, std::string(to_string(c.perturbation)), c.snr_text(), std::to_string(sel.chosen_k),
                     std::string(to_string(sel.rationale)), retained, format_exact(cfg.retain_fraction)});
      std::cout << c.label() << "  chosen k=" << sel.chosen_k << " (" << to_string(sel.rationale) << ")\n";
    }
  }
  write_table(sweep_t, cfg.output_dir / "sweep.tsv");
  write_table(sel_t, cfg.output_dir / "selection.tsv");
}

// -------------------------------------------------------------------- wer

void cmd_wer(const RunConfig& cfg) {
  if (cfg.model.empty()) throw InputError("wer requires --model");
  if (cfg.references.empty() || cfg.clean_hyp.empty()) throw InputError("wer requires --ref and --clean-hyp");
  if (cfg.pert_hyps.empty()) throw InputError("wer requires at least one --hyp perturbation:snr=path");
  const auto refs = read_transcripts(resolve(cfg, cfg.references));
  const auto clean = read_transcripts(resolve(cfg, cfg.clean_hyp));
  if (refs.empty()) throw InputError("reference transcript file is empty");

  std::vector<std::pair<ConditionKey, fs::path>> jobs;
  for (const auto& arg : cfg.pert_hyps) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos) throw InputError("--hyp expects perturbation:snr=path, got '" + arg + "'");
    std::string cond = arg.substr(0, eq);
    std::replace(cond.begin(), cond.end(), ':', '/');
    const ConditionKey key = parse_condition(cfg.model + "/" + cond);
    if (key.perturbation == Perturbation::clean) throw InputError("--hyp must name a perturbed condition");
    if (!condition_selected(cfg, key)) continue;
    jobs.emplace_back(key, resolve(cfg, arg.substr(eq + 1)));
  }
  prepare_output(cfg);

  Table rec_t{kWerRecordColumns, {}};
  Table sum_t{kWerSummaryColumns, {}};
  for (const auto& [key, path] : jobs) {
    const auto records = build_wer_records(refs, clean, read_transcripts(path), key);
    double wc = 0.0, wp = 0.0;
    for (const auto& r : records) {
      rec_t.add_row({key.model_id, std::string(to_string(key.perturbation)), key.snr_text(), r.utterance,
                     format_exact(r.wer_clean), format_exact(r.wer_pert)});
      wc += r.wer_clean;
      wp += r.wer_pert;
    }
    const double n = static_cast<double>(records.size());
    sum_t.add_row({key.model_id, std::string(to_string(key.perturbation)), key.snr_text(),
                   std::to_string(records.size()), format_exact(wc / n), format_exact(wp / n),
                   format_exact(delta_wer(records)), format_exact(success_rate(records, cfg.gamma, cfg.tau)),
                   format_exact(cfg.gamma), format_exact(cfg.tau)});
  }
  write_table(rec_t, cfg.output_dir / "wer_records.tsv");
  write_table(sum_t, cfg.output_dir / "wer_summary.tsv");
}

// ----------------------------------------------------------------- detect

namespace {

using CellKey = std::tuple<std::string, Perturbation, int>;

std::map<CellKey, double> read_success_rates(const RunConfig& cfg) {
  std::map<CellKey, double> out;
  for (const auto& p : cfg.wer_summaries) {
    const Table t = read_table(resolve(cfg, p));
    const auto cm = t.column("model"), cp = t.column("perturbation"), cs = t.column("snr"), csr = t.column("success_rate");
    for (const auto& r : t.rows) {
      if (r[cs] == "NA") continue;
      out[{r[cm], parse_perturbation(r[cp]), std::stoi(r[cs])}] = parse_number(r[csr]);
    }
  }
  return out;
}

}  // namespace

void cmd_detect(const RunConfig& cfg) {
  if (cfg.feature_tables.empty()) throw InputError("detect requires at least one --features table");
  std::map<CellKey, std::vector<LidFeatureVector>> cells;
  std::set<std::size_t> ks_seen;
  std::vector<Table> tables;
  for (const auto& p : cfg.feature_tables) tables.push_back(read_table(resolve(cfg, p)));
  for (const auto& t : tables) {
    for (const auto& r : t.rows) ks_seen.insert(std::stoul(r[t.column("k")]));
  }
  std::size_t k = cfg.feature_k;
  if (k == 0) {
    if (ks_seen.size() > 1) throw InputError("feature tables hold several k values; pass --feature-k");
    k = ks_seen.empty() ? 0 : *ks_seen.begin();
  }
  for (const auto& t : tables) {
    const auto cm = t.column("model"), cp = t.column("perturbation"), cs = t.column("snr"), ck = t.column("k"),
               craw = t.column("raw_id");
    std::vector<std::size_t> lid_cols;
    for (std::size_t l = 1; l <= kLayerCount; ++l) lid_cols.push_back(t.column("lid_" + std::to_string(l)));
    for (const auto& r : t.rows) {
      if (std::stoul(r[ck]) != k || r[cs] == "NA") continue;
      const ConditionKey key{r[cm], parse_perturbation(r[cp]), std::stoi(r[cs])};
      if (!condition_selected(cfg, key)) continue;
      LidFeatureVector v;
      v.raw_id = r[craw];
      v.normalized_id = normalize_utterance_id(v.raw_id);
      v.condition = key;
      for (std::size_t l = 0; l < kLayerCount; ++l) v.values[l] = parse_number(r[lid_cols[l]]);
      cells[{key.model_id, key.perturbation, *key.snr_db}].push_back(std::move(v));
    }
  }
  const auto rates = read_success_rates(cfg);
  prepare_output(cfg);

  Table det_t{kDetectionColumns, {}};
  Table oof_t{{"model", "attack", "snr", "raw_id", "normalized_id", "label", "fold", "score"}, {}};
  DetectionOptions opts;
  opts.n_folds = cfg.folds;
  opts.logistic.lambda = cfg.lambda;
  for (const auto& [key, positives] : cells) {
    const auto& [model, attack, snr] = key;
    if (!is_adversarial(attack)) continue;
    DetectionTask task;
    task.model_id = model;
    task.attack = attack;
    task.snr_db = snr;
    task.positives = positives;
    for (Perturbation benign : {Perturbation::gaussian, Perturbation::babble, Perturbation::speech}) {
      const auto it = cells.find({model, benign, snr});
      if (it != cells.end()) task.negatives.insert(task.negatives.end(), it->second.begin(), it->second.end());
    }
    if (task.negatives.empty()) {
      throw InputError("no benign feature vectors for " + model + " at " + std::to_string(snr) + " dB");
    }
    if (const auto sr = rates.find(key); sr != rates.end()) task.success_rate = sr->second;
    const DetectionReport rep = run_detection(task, cfg.seed, opts);
    const std::string attack_name(to_string(attack));
    det_t.add_row({model, attack_name, std::to_string(snr), std::to_string(rep.positives), std::to_string(rep.negatives),
                   format_exact(rep.auroc), format_exact(rep.auprc), format_exact(rep.fpr_at_tpr95),
                   format_exact(rep.success_rate)});
    const auto all = [&] {
      std::vector<const LidFeatureVector*> v;
      for (const auto& x : task.positives) v.push_back(&x);
      for (const auto& x : task.negatives) v.push_back(&x);
      return v;
    }();
    for (std::size_t i = 0; i < all.size(); ++i) {
      oof_t.add_row({model, attack_name, std::to_string(snr), all[i]->raw_id, all[i]->normalized_id,
                     std::to_string(rep.labels[i]), std::to_string(rep.folds.fold[i]), format_exact(rep.scores[i])});
    }
    std::cout << model << "/" << attack_name << "/" << snr << "  AUROC=" << format_fixed(rep.auroc)
              << " AUPRC=" << format_fixed(rep.auprc) << " FPR@0.95=" << format_fixed(rep.fpr_at_tpr95) << '\n';
  }
  write_table(det_t, cfg.output_dir / "detection.tsv");
  write_table(oof_t, cfg.output_dir / "oof_scores.tsv");
}

// ----------------------------------------------------------------- report

namespace {

constexpr Perturbation kTable2Rows[] = {Perturbation::pgd_mse, Perturbation::pgd_ctc, Perturbation::gaussian,
                                        Perturbation::babble, Perturbation::speech};
constexpr const char* kTable2Names[] = {"PGD-MSE", "PGD-CTC", "Gaussian noise", "Babble noise", "Speech noise"};
constexpr Perturbation kTable3Cols[] = {Perturbation::pgd_ctc, Perturbation::pgd_mse, Perturbation::gaussian,
                                        Perturbation::babble, Perturbation::speech};
constexpr const char* kTable3Names[] = {"PGD-CTC", "PGD-MSE", "Gaussian", "Babble", "Speech"};

std::vector<Table> read_required(const RunConfig& cfg, const std::vector<fs::path>& paths, const char* what) {
  if (paths.empty()) throw InputError(std::string("report is missing its constituent ") + what);
  std::vector<Table> out;
  for (const auto& p : paths) {
    const fs::path r = resolve(cfg, p);
    if (!fs::exists(r)) throw InputError(std::string("missing constituent ") + what + ": " + r.string());
    out.push_back(read_table(r));
  }
  return out;
}

double lookup(const std::map<CellKey, double>& m, const CellKey& key) {
  const auto it = m.find(key);
  return it == m.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
}

}  // namespace

void cmd_report(const RunConfig& cfg) {
  const auto delta_tables = read_required(cfg, cfg.delta_lid_tables, "delta-LID table");
  const auto wer_tables = read_required(cfg, cfg.wer_summaries, "WER summary");
  const auto det_tables = read_required(cfg, cfg.detection_tables, "detection table");
  std::vector<Table> sel_tables;
  for (const auto& p : cfg.selection_tables) sel_tables.push_back(read_table(resolve(cfg, p)));

  // (model, perturbation, snr, k) -> overall delta
  std::map<std::tuple<std::string, Perturbation, int, std::size_t>, double> overall;
  std::map<std::string, std::set<int>> model_snrs;
  for (const auto& t : delta_tables) {
    const auto cm = t.column("model"), cp = t.column("perturbation"), cs = t.column("snr"), ck = t.column("k"),
               cl = t.column("layer"), cd = t.column("delta");
    for (const auto& r : t.rows) {
      if (r[cl] != "overall" || r[cs] == "NA") continue;
      if (!model_selected(cfg, r[cm])) continue;
      const int snr = std::stoi(r[cs]);
      if (!snr_selected(cfg, snr)) continue;
      overall[{r[cm], parse_perturbation(r[cp]), snr, std::stoul(r[ck])}] = parse_number(r[cd]);
      model_snrs[r[cm]].insert(snr);
    }
  }
  std::map<CellKey, std::size_t> chosen_k;
  for (const auto& t : sel_tables) {
    const auto cm = t.column("model"), cp = t.column("perturbation"), cs = t.column("snr"), ck = t.column("chosen_k");
    for (const auto& r : t.rows) chosen_k[{r[cm], parse_perturbation(r[cp]), std::stoi(r[cs])}] = std::stoul(r[ck]);
  }
  std::map<CellKey, double> dwer, sr_wer;
  for (const auto& t : wer_tables) {
    const auto cm = t.column("model"), cp = t.column("perturbation"), cs = t.column("snr"), cd = t.column("delta_wer"),
               csr = t.column("success_rate");
    for (const auto& r : t.rows) {
      if (r[cs] == "NA") continue;
      const CellKey key{r[cm], parse_perturbation(r[cp]), std::stoi(r[cs])};
      dwer[key] = parse_number(r[cd]);
      sr_wer[key] = parse_number(r[csr]);
    }
  }
  struct DetCell {
    double auroc, auprc, fpr, sr;
  };
  std::map<CellKey, DetCell> det;
  std::set<std::string> det_models;
  std::set<int> det_snrs;
  for (const auto& t : det_tables) {
    const auto cm = t.column("model"), ca = t.column("attack"), cs = t.column("snr"), cau = t.column("auroc"),
               cap = t.column("auprc"), cf = t.column("fpr_at_tpr95"), csr = t.column("success_rate");
    for (const auto& r : t.rows) {
      const int snr = std::stoi(r[cs]);
      if (!model_selected(cfg, r[cm]) || !snr_selected(cfg, snr)) continue;
      det[{r[cm], parse_perturbation(r[ca]), snr}] = {parse_number(r[cau]), parse_number(r[cap]), parse_number(r[cf]),
                                                       parse_number(r[csr])};
      det_models.insert(r[cm]);
      det_snrs.insert(snr);
    }
  }
  prepare_output(cfg);

  std::set<std::string> lid_model_set;
  for (const auto& [m, s] : model_snrs) lid_model_set.insert(m);
  const auto lid_models = order_models(lid_model_set);

  // Per-SNR overall delta-LID sensitivity to k.
  Table t2{{"Model", "Perturbation"}, {}};
  for (int snr : cfg.table2_snrs) {
    for (std::size_t k : cfg.table2_ks) t2.header.push_back(std::to_string(snr) + "dB k=" + std::to_string(k));
  }
  for (const auto& model : lid_models) {
    for (std::size_t i = 0; i < std::size(kTable2Rows); ++i) {
      std::vector<std::string> row{model_display(model), kTable2Names[i]};
      for (int snr : cfg.table2_snrs) {
        for (std::size_t k : cfg.table2_ks) {
          const auto it = overall.find({model, kTable2Rows[i], snr, k});
          row.push_back(format_fixed(it == overall.end() ? std::numeric_limits<double>::quiet_NaN() : it->second));
        }
      }
      t2.add_row(std::move(row));
    }
  }

  // Per-SNR "delta-LID / delta-WER" cells at the selected k.
  Table t3{{"Model", "SNR"}, {}};
  for (const char* name : kTable3Names) t3.header.emplace_back(name);
  for (const auto& model : lid_models) {
    for (int snr : model_snrs.at(model)) {
      std::vector<std::string> row{model_display(model), std::to_string(snr)};
      for (Perturbation p : kTable3Cols) {
        const CellKey key{model, p, snr};
        const auto sel = chosen_k.find(key);
        const std::size_t k = sel != chosen_k.end() ? sel->second : cfg.table3_k;
        const auto it = overall.find({model, p, snr, k});
        const double dl = it == overall.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
        row.push_back(format_fixed(dl) + " / " + format_fixed(lookup(dwer, key)));
      }
      t3.add_row(std::move(row));
    }
  }

  // Detection metrics: rows SNR x metric, columns model x attack.
  Table t4{{"SNR", "METRIC"}, {}};
  const auto det_model_order = order_models(det_models);
  for (const auto& model : det_model_order) {
    t4.header.push_back(model_short(model) + "_CTC");
    t4.header.push_back(model_short(model) + "_MSE");
  }
  for (int snr : det_snrs) {
    std::vector<std::string> au{std::to_string(snr), "AUROC"}, ap{std::to_string(snr), "AUPRC"},
        fp{std::to_string(snr), "FPR@0.95[SR]"};
    for (const auto& model : det_model_order) {
      for (Perturbation attack : {Perturbation::pgd_ctc, Perturbation::pgd_mse}) {
        const CellKey key{model, attack, snr};
        const auto it = det.find(key);
        if (it == det.end()) {
          au.emplace_back("NA");
          ap.emplace_back("NA");
          fp.emplace_back("NA");
          continue;
        }
        const double sr = std::isnan(it->second.sr) ? lookup(sr_wer, key) : it->second.sr;
        au.push_back(format_fixed(it->second.auroc));
        ap.push_back(format_fixed(it->second.auprc));
        fp.push_back(format_fixed(it->second.fpr) + "[" + format_fixed(sr) + "]");
      }
    }
    t4.add_row(std::move(au));
    t4.add_row(std::move(ap));
    t4.add_row(std::move(fp));
  }

  write_table(t2, cfg.output_dir / "table2.tsv");
  write_table(t3, cfg.output_dir / "table3.tsv");
  write_table(t4, cfg.output_dir / "table4.tsv");
}

int run_command(const RunConfig& cfg) {
  try {
    if (cfg.command == "perturb") cmd_perturb(cfg);
    else if (cfg.command == "lid") cmd_lid(cfg);
    else if (cfg.command == "ksweep") cmd_ksweep(cfg);
    else if (cfg.command == "wer") cmd_wer(cfg);
    else if (cfg.command == "detect") cmd_detect(cfg);
    else if (cfg.command == "report") cmd_report(cfg);
    else throw InputError("unknown command '" + cfg.command + "'");
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: malformed number in input: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitComputationError;
  }
  return kExitOk;
}

}  // namespace grids
