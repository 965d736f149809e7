/*
 * Copyright 2026 the momics authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "core/config.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

namespace momics::config {

std::vector<Omics> parse_modalities(const std::string& text,
                                    const std::string& what) {
  std::vector<Omics> out;
  std::set<Omics> seen;
  for (const std::string& tok : split(text, ',')) {
    const std::string name = lower(trim(tok));
    if (name.empty()) continue;
    const Omics o = omics_from_name(name);
    if (seen.insert(o).second) out.push_back(o);
    (void)what;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string modalities_to_text(const std::vector<Omics>& mods) {
  std::string out;
  for (std::size_t i = 0; i < mods.size(); ++i) {
    if (i) out += ',';
    out += omics_name(mods[i]);
  }
  return out;
}

namespace {

void reject_unknown(const IniSection& sec,
                    const std::vector<std::string>& known,
                    const std::string& origin) {
  const std::unordered_set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : sec.entries) {
    if (allowed.find(key) == allowed.end()) {
      throw_config(origin + ": [" + sec.name + "] unknown key '" + key + "'");
    }
  }
}

struct SectionReader {
  const IniSection* sec;
  std::string prefix;

  bool has(const char* key) const { return sec && sec->find(key) != nullptr; }
  void geti(const char* key, int& out) const {
    if (has(key)) {
      out = static_cast<int>(parse_long(*sec->find(key), prefix + key));
    }
  }
  void getu64(const char* key, std::uint64_t& out) const {
    if (has(key)) out = parse_u64(*sec->find(key), prefix + key);
  }
  void getd(const char* key, double& out) const {
    if (has(key)) out = parse_double(*sec->find(key), prefix + key);
  }
  void gets(const char* key, std::string& out) const {
    if (has(key)) out = *sec->find(key);
  }
};

const std::vector<std::string> kRunKeys = {"seed", "out", "checkpoint",
                                           "threads"};
const std::vector<std::string> kDataKeys = {"manifest"};
const std::vector<std::string> kSynthKeys = {
    "num_patients",   "latent_dim",     "wsi_latent_dim", "patch_dim",
    "patches_min",    "patches_max",    "rna_features",   "dnam_features",
    "cnv_features",   "rna_groups",     "dnam_groups",    "cnv_groups",
    "rna_noise_std",  "dnam_noise_std", "cnv_noise_std",  "patch_noise_std",
    "subtype_coord",  "subtype_threshold", "risk_coord",  "risk_scale",
    "censoring_rate", "cnv_missing_rate"};
const std::vector<std::string> kPretrainKeys = {
    "epochs",   "batch_size",   "warmup_epochs",   "lr_start",
    "lr_peak",  "lr_final",     "weight_decay",    "checkpoint_every"};
const std::vector<std::string> kFewShotKeys = {
    "k",       "runs",    "num_classes",  "epochs", "batch_size",
    "lr",      "dropout", "weight_decay", "inputs"};
const std::vector<std::string> kSurvivalKeys = {
    "folds",    "epochs",   "batch_size", "num_intervals", "warmup_epochs",
    "lr_start", "lr_peak",  "lr_final",   "dropout",       "weight_decay",
    "inputs"};
const std::vector<std::string> kGenerateKeys = {"combos"};

const IniSection* unique_section(const IniFile& ini, const std::string& name,
                                 const std::string& origin) {
  const IniSection* found = nullptr;
  for (const IniSection& sec : ini.sections) {
    if (sec.name != name) continue;
    if (found != nullptr) {
      throw_config(origin + ": duplicate section [" + name + "]");
    }
    found = &sec;
  }
  return found;
}

}  // namespace

RunConfig RunConfig::from_ini(const IniFile& ini, const std::string& origin) {
  static const std::vector<std::string> known_sections = {
      "run",      "data",     "synth",    "model",
      "pretrain", "few_shot", "survival", "generate"};
  for (const IniSection& sec : ini.sections) {
    if (std::find(known_sections.begin(), known_sections.end(), sec.name) ==
        known_sections.end()) {
      throw_config(origin + ": unknown section [" + sec.name + "]");
    }
  }

  RunConfig cfg;

  if (const IniSection* sec = unique_section(ini, "run", origin)) {
    reject_unknown(*sec, kRunKeys, origin);
    SectionReader r{sec, "run."};
    r.getu64("seed", cfg.seed);
    r.gets("out", cfg.out);
    r.gets("checkpoint", cfg.checkpoint);
    r.geti("threads", cfg.threads);
  }
  if (const IniSection* sec = unique_section(ini, "data", origin)) {
    reject_unknown(*sec, kDataKeys, origin);
    SectionReader r{sec, "data."};
    r.gets("manifest", cfg.manifest);
  }
  if (const IniSection* sec = unique_section(ini, "synth", origin)) {
    reject_unknown(*sec, kSynthKeys, origin);
    SectionReader r{sec, "synth."};
    auto& s = cfg.synth;
    r.geti("num_patients", s.num_patients);
    r.geti("latent_dim", s.latent_dim);
    r.geti("wsi_latent_dim", s.wsi_latent_dim);
    r.geti("patch_dim", s.patch_dim);
    r.geti("patches_min", s.patches_min);
    r.geti("patches_max", s.patches_max);
    for (Omics o : kAllOmics) {
      const int oi = static_cast<int>(o);
      r.geti((omics_name(o) + "_features").c_str(), s.feature_counts[oi]);
      r.geti((omics_name(o) + "_groups").c_str(), s.group_counts[oi]);
      r.getd((omics_name(o) + "_noise_std").c_str(), s.noise_std[oi]);
    }
    r.getd("patch_noise_std", s.patch_noise_std);
    r.geti("subtype_coord", s.subtype_coord);
    r.getd("subtype_threshold", s.subtype_threshold);
    r.geti("risk_coord", s.risk_coord);
    r.getd("risk_scale", s.risk_scale);
    r.getd("censoring_rate", s.censoring_rate);
    r.getd("cnv_missing_rate", s.cnv_missing_rate);
  }
  if (const IniSection* sec = unique_section(ini, "model", origin)) {
    reject_unknown(*sec, momics::model::model_config_keys(), origin);
    cfg.model.apply_section(*sec);
  }
  if (const IniSection* sec = unique_section(ini, "pretrain", origin)) {
    reject_unknown(*sec, kPretrainKeys, origin);
    SectionReader r{sec, "pretrain."};
    auto& p = cfg.pretrain;
    r.geti("epochs", p.epochs);
    r.geti("batch_size", p.batch_size);
    r.geti("warmup_epochs", p.warmup_epochs);
    r.getd("lr_start", p.lr_start);
    r.getd("lr_peak", p.lr_peak);
    r.getd("lr_final", p.lr_final);
    r.getd("weight_decay", p.weight_decay);
    r.geti("checkpoint_every", cfg.checkpoint_every);
  }
  if (const IniSection* sec = unique_section(ini, "few_shot", origin)) {
    reject_unknown(*sec, kFewShotKeys, origin);
    SectionReader r{sec, "few_shot."};
    auto& f = cfg.few_shot;
    r.geti("k", f.k);
    r.geti("runs", f.runs);
    r.geti("num_classes", f.num_classes);
    r.geti("epochs", f.epochs);
    r.geti("batch_size", f.batch_size);
    r.getd("lr", f.lr);
    r.getd("dropout", f.dropout);
    r.getd("weight_decay", f.weight_decay);
    if (r.has("inputs")) {
      f.input_modalities =
          parse_modalities(*sec->find("inputs"), "few_shot.inputs");
    }
  }
  if (const IniSection* sec = unique_section(ini, "survival", origin)) {
    reject_unknown(*sec, kSurvivalKeys, origin);
    SectionReader r{sec, "survival."};
    auto& s = cfg.survival;
    r.geti("folds", s.folds);
    r.geti("epochs", s.epochs);
    r.geti("batch_size", s.batch_size);
    r.geti("num_intervals", s.num_intervals);
    r.geti("warmup_epochs", s.warmup_epochs);
    r.getd("lr_start", s.lr_start);
    r.getd("lr_peak", s.lr_peak);
    r.getd("lr_final", s.lr_final);
    r.getd("dropout", s.dropout);
    r.getd("weight_decay", s.weight_decay);
    if (r.has("inputs")) {
      s.input_modalities =
          parse_modalities(*sec->find("inputs"), "survival.inputs");
    }
  }
  if (const IniSection* sec = unique_section(ini, "generate", origin)) {
    reject_unknown(*sec, kGenerateKeys, origin);
    SectionReader r{sec, "generate."};
    r.gets("combos", cfg.combos);
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  synth.validate();
  momics::model::ModelConfig mc = model;
  if (mc.patch_dim == 0) mc.patch_dim = 1;  // 0 = resolved from the dataset
  mc.validate();
  pretrain.validate();
  few_shot.validate();
  survival.validate();
  if (checkpoint_every < 0) {
    throw_config("pretrain.checkpoint_every: must be >= 0");
  }
}

IniFile RunConfig::to_ini() const {
  IniFile ini;

  IniSection& run = ini.get_or_add("run");
  run.set("seed", std::to_string(seed));
  run.set("out", out);
  run.set("checkpoint", checkpoint);
  run.set("threads", std::to_string(threads));

  IniSection& dat = ini.get_or_add("data");
  dat.set("manifest", manifest);

  IniSection& sy = ini.get_or_add("synth");
  sy.set("num_patients", std::to_string(synth.num_patients));
  sy.set("latent_dim", std::to_string(synth.latent_dim));
  sy.set("wsi_latent_dim", std::to_string(synth.wsi_latent_dim));
  sy.set("patch_dim", std::to_string(synth.patch_dim));
  sy.set("patches_min", std::to_string(synth.patches_min));
  sy.set("patches_max", std::to_string(synth.patches_max));
  for (Omics o : kAllOmics) {
    const int oi = static_cast<int>(o);
    sy.set(omics_name(o) + "_features",
           std::to_string(synth.feature_counts[oi]));
    sy.set(omics_name(o) + "_groups", std::to_string(synth.group_counts[oi]));
    sy.set(omics_name(o) + "_noise_std", format_double(synth.noise_std[oi]));
  }
  sy.set("patch_noise_std", format_double(synth.patch_noise_std));
  sy.set("subtype_coord", std::to_string(synth.subtype_coord));
  sy.set("subtype_threshold", format_double(synth.subtype_threshold));
  sy.set("risk_coord", std::to_string(synth.risk_coord));
  sy.set("risk_scale", format_double(synth.risk_scale));
  sy.set("censoring_rate", format_double(synth.censoring_rate));
  sy.set("cnv_missing_rate", format_double(synth.cnv_missing_rate));

  IniSection& mo = ini.get_or_add("model");
  model.to_section(mo);

  IniSection& pt = ini.get_or_add("pretrain");
  pt.set("epochs", std::to_string(pretrain.epochs));
  pt.set("batch_size", std::to_string(pretrain.batch_size));
  pt.set("warmup_epochs", std::to_string(pretrain.warmup_epochs));
  pt.set("lr_start", format_double(pretrain.lr_start));
  pt.set("lr_peak", format_double(pretrain.lr_peak));
  pt.set("lr_final", format_double(pretrain.lr_final));
  pt.set("weight_decay", format_double(pretrain.weight_decay));
  pt.set("checkpoint_every", std::to_string(checkpoint_every));

  IniSection& fs = ini.get_or_add("few_shot");
  fs.set("k", std::to_string(few_shot.k));
  fs.set("runs", std::to_string(few_shot.runs));
  fs.set("num_classes", std::to_string(few_shot.num_classes));
  fs.set("epochs", std::to_string(few_shot.epochs));
  fs.set("batch_size", std::to_string(few_shot.batch_size));
  fs.set("lr", format_double(few_shot.lr));
  fs.set("dropout", format_double(few_shot.dropout));
  fs.set("weight_decay", format_double(few_shot.weight_decay));
  fs.set("inputs", modalities_to_text(few_shot.input_modalities));

  IniSection& sv = ini.get_or_add("survival");
  sv.set("folds", std::to_string(survival.folds));
  sv.set("epochs", std::to_string(survival.epochs));
  sv.set("batch_size", std::to_string(survival.batch_size));
  sv.set("num_intervals", std::to_string(survival.num_intervals));
  sv.set("warmup_epochs", std::to_string(survival.warmup_epochs));
  sv.set("lr_start", format_double(survival.lr_start));
  sv.set("lr_peak", format_double(survival.lr_peak));
  sv.set("lr_final", format_double(survival.lr_final));
  sv.set("dropout", format_double(survival.dropout));
  sv.set("weight_decay", format_double(survival.weight_decay));
  sv.set("inputs", modalities_to_text(survival.input_modalities));

  IniSection& ge = ini.get_or_add("generate");
  ge.set("combos", combos);

  return ini;
}

RunConfig RunConfig::load_file(const std::filesystem::path& path) {
  return from_ini(IniFile::load(path.string()), path.string());
}

}  // namespace momics::config
